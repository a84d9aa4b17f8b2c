"""Two-population adversarial imitation.

Generators act in the environment; discriminators read a whole trajectory of
(observation, one-hot action) steps and report a confidence that it is real.
Each generation every discriminator is matched with a distinct generator and a
random real trajectory:

    generator fitness     = c_fake
    discriminator fitness = c_real - c_fake
"""

from __future__ import annotations

import copy
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import genome as genome_mod
from .envs import Dataset, Env, Trajectory, make_env
from .errors import ConfigError
from .evolution import (MASTER, STATIC_HIDDEN, Agent, EvolutionConfig, RunResult, action_select,
                        actor_genome, apply_selection, forward, network_size, truncation_select,
                        variation_step)
from .genome import Genome
from .rng import CHOICE, derive_stream

log = logging.getLogger(__name__)

ADV_LOG_HEADER = ("generation", "gen_mean", "gen_max", "disc_mean", "disc_max", "agreement_top_gen")
DEFAULT_T = 100


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def discriminator_genome(task: str, net: str, hidden: int = STATIC_HIDDEN) -> Genome:
    """Empty genome of a discriminator: one output, the one-hot action as extra inputs."""
    env = make_env(task)
    n_act = env.n_actions
    if net not in ("dynamic", "static"):
        raise ConfigError(f"unknown net kind {net!r}")
    if len(env.obs_shape) == 1:
        n_in = env.obs_shape[0] + n_act
        if net == "dynamic":
            return Genome("drn", (n_in, 1))
        return Genome("static", (n_in, hidden, hidden, 1, "rec"))
    c, h, w = env.obs_shape
    if net == "dynamic":
        return Genome("composite", (c, h, w, 1, n_act))
    return Genome("static", ("conv", c, h, w, hidden, 1, n_act, "rec"))


def one_hot(a: int, n: int) -> list[float]:
    v = [0.0] * n
    v[int(a)] = 1.0
    return v


def confidence(disc, traj: Trajectory, n_actions: int) -> float:
    """logistic(final output) after feeding the trajectory from a reset state."""
    disc.reset()
    out = None
    for obs, a in zip(traj.obs, traj.actions):
        out = forward(disc, obs, one_hot(a, n_actions))
    if out is None:
        raise ConfigError("empty trajectory")
    return logistic(out[0])


def generate(gen, env: Env, seed: int, T: int) -> Trajectory:
    """Fake trajectory: the generator's first ``T`` steps (fewer if the episode ends)."""
    gen.reset()
    obs = env.reset(seed)
    seen, acts, done = [], [], False
    while not done and len(acts) < T:
        a = action_select(forward(gen, obs))
        seen.append(np.asarray(obs, dtype=float))
        acts.append(a)
        obs, _, done = env.step(a)
    return Trajectory(np.stack(seen), np.asarray(acts, dtype=int))


def agreement(gen, probe: Dataset) -> float:
    """Share of probe steps where the generator picks the recorded expert action.

    Probe trajectories are fed in order from a reset state, so recurrent
    generators see the same context they would when acting.
    """
    hits = total = 0
    for tr in probe.trajectories:
        gen.reset()
        for obs, a in zip(tr.obs, tr.actions):
            hits += action_select(forward(gen, obs)) == a
            total += 1
    return hits / total if total else 0.0


@dataclass
class MatchAssignment:
    pairs: list[tuple[int, int, int]]  # (generator, discriminator, real index)


def assign_matches(n: int, n_real: int, rng) -> MatchAssignment:
    """Discriminator i meets generator perm[i] and a uniformly drawn real point."""
    if n < 1:
        raise ConfigError("need at least one match")
    if n_real < 1:
        raise ConfigError("empty real dataset")
    perm = rng.permutation(n)
    return MatchAssignment([(int(perm[i]), i, rng.integers(n_real)) for i in range(n)])


def match_fitness(c_real: float, c_fake: float) -> tuple[float, float]:
    return c_fake, c_real - c_fake


def evaluate_match(gen, disc, real: Trajectory, env: Env, T: int, seed: int,
                   n_actions: int | None = None) -> tuple[float, float]:
    n_actions = env.n_actions if n_actions is None else n_actions
    fake = generate(gen, env, seed, T)
    return match_fitness(confidence(disc, real, n_actions), confidence(disc, fake, n_actions))


# ----------------------------------------------------------------------
# run loop


@dataclass
class AdversarialConfig(EvolutionConfig):
    T: int = DEFAULT_T

    def validate(self):
        super().validate()
        if self.T < 1:
            raise ConfigError("trajectory length must be positive")
        discriminator_genome(self.task, self.net, self.hidden)


class AdversarialSchedule:
    """Generation 0 draws an episode seed and a match seed; later generations
    first draw one variation seed per generator, then per discriminator."""

    def __init__(self, seed: int, pop: int):
        self.rng = derive_stream(seed, MASTER)
        self.pop = pop

    def initial(self) -> tuple[int, int]:
        return self.rng.seed64(), self.rng.seed64()

    def generation(self):
        gs = [self.rng.seed64() for _ in range(self.pop)]
        ds = [self.rng.seed64() for _ in range(self.pop)]
        return gs, ds, self.rng.seed64(), self.rng.seed64()


def match_rng(match_seed: int):
    return derive_stream(match_seed, CHOICE)


def adv_row(g, gen_fits, disc_fits, agree) -> tuple:
    return (g, float(np.mean(gen_fits)), float(np.max(gen_fits)),
            float(np.mean(disc_fits)), float(np.max(disc_fits)), float(agree))


def _fake_job(args):
    net, task, seed, T = args
    return generate(net, make_env(task), seed, T)


def _conf_job(args):
    net, trajs, n_act = args
    return [confidence(net, t, n_act) for t in trajs]


class MatchEvaluator:
    """Plays generators and scores trajectories, serially or in worker processes."""

    def __init__(self, task: str, workers: int = 1):
        self.task = task
        self.env = make_env(task)
        self._pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def fakes(self, nets, seed: int, T: int) -> list[Trajectory]:
        if self._pool is None:
            return [generate(n, self.env, seed, T) for n in nets]
        return list(self._pool.map(_fake_job, [(n, self.task, seed, T) for n in nets]))

    def confidences(self, nets, trajs_per_net) -> list[list[float]]:
        n_act = self.env.n_actions
        if self._pool is None:
            return [[confidence(n, t, n_act) for t in ts] for n, ts in zip(nets, trajs_per_net)]
        return list(self._pool.map(_conf_job, [(n, ts, n_act) for n, ts in zip(nets, trajs_per_net)]))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def play_matches(ev: MatchEvaluator, gens, discs, real: Dataset, assignment: MatchAssignment,
                 episode_seed: int, T: int):
    """Returns (generator fitnesses, discriminator fitnesses) in population order."""
    fakes = ev.fakes([g.network for g in gens], episode_seed, T)
    order = sorted(assignment.pairs, key=lambda p: p[1])
    confs = ev.confidences([discs[d].network for _, d, _ in order],
                           [[real[r], fakes[g]] for g, _, r in order])
    gen_fit = [0.0] * len(gens)
    disc_fit = [0.0] * len(discs)
    for (g, d, _), (c_real, c_fake) in zip(order, confs):
        gen_fit[g], disc_fit[d] = match_fitness(c_real, c_fake)
    return gen_fit, disc_fit


def evolve_adversarial(config: AdversarialConfig, dataset: Dataset, probe: Dataset,
                       on_generation=None) -> RunResult:
    """Co-evolve generators and discriminators against ``dataset``; log the top
    generator's expert agreement on ``probe`` every generation."""
    config.validate()
    env = make_env(config.task)
    if tuple(dataset.obs_shape) != tuple(env.obs_shape) or dataset.n_actions != env.n_actions:
        raise ConfigError("dataset does not match the task")
    if len(dataset) < 1:
        raise ConfigError("empty real dataset")
    if config.comm != "local":
        from .distrib.protocol import run_distributed_adversarial
        return run_distributed_adversarial(config, dataset, probe, on_generation=on_generation)
    g_tmpl = actor_genome(config.task, config.net, config.hidden)
    d_tmpl = discriminator_genome(config.task, config.net, config.hidden)
    g_base, d_base = genome_mod.replay(g_tmpl), genome_mod.replay(d_tmpl)
    gens = [Agent(g_tmpl, copy.deepcopy(g_base)) for _ in range(config.pop)]
    discs = [Agent(d_tmpl, copy.deepcopy(d_base)) for _ in range(config.pop)]
    sched = AdversarialSchedule(config.seed, config.pop)
    rows = []
    best = None
    with MatchEvaluator(config.task, config.workers) as ev:
        for g in range(config.gens + 1):
            if g == 0:
                ep, ms = sched.initial()
            else:
                gs, ds, ep, ms = sched.generation()
                for a, s in zip(gens, gs):
                    variation_step(a, s)
                for a, s in zip(discs, ds):
                    variation_step(a, s)
            assignment = assign_matches(config.pop, len(dataset), match_rng(ms))
            gen_fit, disc_fit = play_matches(ev, gens, discs, dataset, assignment, ep, config.T)
            gsel, dsel = truncation_select(gen_fit), truncation_select(disc_fit)
            top = gsel.ranking[0]
            agree = agreement(gens[top].network, probe)
            rows.append(adv_row(g, gen_fit, disc_fit, agree))
            best = (gens[top].genome, gen_fit[top], ep, agree, discs[dsel.ranking[0]].genome)
            if g > 0:
                apply_selection(gens, gsel)
                apply_selection(discs, dsel)
            if on_generation is not None:
                on_generation(rows[-1])
            log.debug("gen %d gen_mean %.3f disc_mean %.3f agree %.3f",
                      g, rows[-1][1], rows[-1][3], agree)
    return RunResult(rows, gens, best[0], best[1], best[2],
                     extra={"agreement": best[3], "discriminators": discs, "best_discriminator": best[4]})

