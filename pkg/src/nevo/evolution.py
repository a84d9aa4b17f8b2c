"""Score-maximising evolution: variation, evaluation, truncation selection.

Every agent, selected or copied, undergoes one variation step per
generation; there is no elitism.  Fitness is the score of one episode whose
seed is drawn fresh each generation and shared by the whole population.
"""

from __future__ import annotations

import copy
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import genome as genome_mod
from .composite import CompositeNet
from .drn import DrnGraph
from .envs import Env, make_env
from .errors import ConfigError
from .genome import Genome
from .rng import derive_stream
from .static import StaticConvNet, StaticNet

log = logging.getLogger(__name__)

MASTER = 7  # stream label of the run-level seed source
STATIC_HIDDEN = 32

SCORE_LOG_HEADER = ("generation", "mean_fitness", "max_fitness", "mean_genome_len",
                    "mean_nodes", "mean_connections")


@dataclass
class Agent:
    genome: Genome
    network: object
    fitness: float | None = None

    @classmethod
    def from_genome(cls, genome: Genome) -> "Agent":
        return cls(genome, genome_mod.replay(genome))

    def copy(self) -> "Agent":
        return Agent(self.genome, copy.deepcopy(self.network), self.fitness)


def actor_genome(task: str, net: str, hidden: int = STATIC_HIDDEN) -> Genome:
    """Empty genome of an action-taking agent for ``task``."""
    env = make_env(task)
    n_act = env.n_actions
    if net not in ("dynamic", "static"):
        raise ConfigError(f"unknown net kind {net!r}")
    if len(env.obs_shape) == 1:
        n_in = env.obs_shape[0]
        if net == "dynamic":
            return Genome("drn", (n_in, n_act))
        return Genome("static", (n_in, hidden, hidden, n_act))
    c, h, w = env.obs_shape
    if net == "dynamic":
        return Genome("composite", (c, h, w, n_act))
    return Genome("static", ("conv", c, h, w, hidden, n_act))


def action_select(outputs) -> int:
    """Argmax; ties go to the lowest index."""
    if len(outputs) == 0:
        raise ValueError("no outputs to select from")
    best, arg = outputs[0], 0
    for i, v in enumerate(outputs):
        if v > best:
            best, arg = v, i
    return arg


def forward(net, obs, extra=()):
    """Run one pass of any network kind on one observation."""
    if isinstance(net, (CompositeNet, StaticConvNet)):
        return net.forward(obs, extra)
    if extra:
        return net.forward(list(obs) + list(extra))
    return net.forward(obs)


def run_episode(net, env: Env, seed: int, max_steps: int | None = None, record: bool = False):
    """Play one episode greedily.

    Returns ``(score, steps)``, or ``(score, steps, observations, actions)``
    when ``record`` is set.
    """
    limit = env.max_steps if max_steps is None else max_steps
    net.reset()
    obs = env.reset(seed)
    score, steps, done = 0.0, 0, False
    seen, acts = [], []
    while not done and steps < limit:
        a = action_select(forward(net, obs))
        if record:
            seen.append(np.asarray(obs, dtype=float))
            acts.append(a)
        obs, r, done = env.step(a)
        score += r
        steps += 1
    if record:
        return score, steps, seen, acts
    return score, steps


def network_size(net) -> tuple[int, int]:
    """(nodes, connections) summary used in run logs."""
    if isinstance(net, CompositeNet):
        return (net.drn.n_nodes() + len(net.dcn.nodes),
                len(net.drn.connections) + len(net.dcn.nodes) - 1)
    if isinstance(net, DrnGraph):
        return net.n_nodes(), len(net.connections)
    if isinstance(net, StaticNet):
        return sum(net.widths), sum(w.size for w in net.weights)
    raise TypeError(type(net).__name__)


def variation_step(agent: Agent, seed: int) -> str | None:
    """Append ``seed`` to the genome and apply the variation it encodes."""
    agent.genome = agent.genome.appended(seed)
    agent.fitness = None
    return genome_mod.vary(agent.network, seed)


@dataclass
class Selection:
    ranking: list[int]  # agent indices, best first
    selected: list[int]
    pairs: list[tuple[int, int]]  # (winner copied, loser overwritten)


def truncation_select(fitnesses) -> Selection:
    """Top half survives; the i-th best survivor overwrites the i-th best loser."""
    n = len(fitnesses)
    if n == 0 or n % 2:
        raise ConfigError(f"truncation selection needs an even, nonempty population (got {n})")
    if any(f is None for f in fitnesses):
        raise ConfigError("unset fitness")
    ranking = sorted(range(n), key=lambda i: (-fitnesses[i], i))
    half = n // 2
    return Selection(ranking, sorted(ranking[:half]), list(zip(ranking[:half], ranking[half:])))


def apply_selection(agents: list[Agent], sel: Selection):
    for win, lose in sel.pairs:
        agents[lose] = agents[win].copy()


# ----------------------------------------------------------------------
# evaluation


def _eval_one(args):
    net, task, seed = args
    return run_episode(net, make_env(task), seed)[0]


class Evaluator:
    """Evaluates networks on one task, serially or across worker processes.

    Results do not depend on the worker count: every evaluation is a pure
    function of (network, task, episode seed).
    """

    def __init__(self, task: str, workers: int = 1):
        self.task = task
        self.env = make_env(task)
        self.workers = workers
        self._pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def scores(self, nets, seed: int) -> list[float]:
        if self._pool is None:
            return [run_episode(n, self.env, seed)[0] for n in nets]
        return list(self._pool.map(_eval_one, [(n, self.task, seed) for n in nets]))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ----------------------------------------------------------------------
# run loop


@dataclass
class EvolutionConfig:
    task: str = "cartpole"
    net: str = "dynamic"
    pop: int = 50
    gens: int = 300
    seed: int = 1
    workers: int = 1
    comm: str = "local"
    hidden: int = STATIC_HIDDEN
    stop_mean: float | None = None  # stop once the population mean reaches this
    transport: str = "sim"  # worker transport for rebuild/p2p: sim or socket

    def validate(self):
        if self.pop < 2 or self.pop % 2:
            raise ConfigError(f"population must be even and >= 2, got {self.pop}")
        if self.gens < 0:
            raise ConfigError("negative generation count")
        if self.comm not in ("local", "rebuild", "p2p"):
            raise ConfigError(f"unknown comm mode {self.comm!r}")
        if self.transport not in ("sim", "socket"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.workers < 1:
            raise ConfigError("need at least one worker")
        make_env(self.task)
        actor_genome(self.task, self.net, self.hidden)


@dataclass
class RunResult:
    rows: list[tuple]
    agents: list[Agent]
    best_genome: Genome
    best_fitness: float
    best_episode_seed: int
    extra: dict = field(default_factory=dict)


def score_row(g: int, fitnesses, agents: list[Agent]) -> tuple:
    sizes = [network_size(a.network) for a in agents]
    return (g, float(np.mean(fitnesses)), float(np.max(fitnesses)),
            float(np.mean([len(a.genome) for a in agents])),
            float(np.mean([s[0] for s in sizes])), float(np.mean([s[1] for s in sizes])))


class SeedSchedule:
    """Run-level seed source shared by every execution mode.

    Generation 0 draws one episode seed; each later generation draws one
    variation seed per agent, then its episode seed.
    """

    def __init__(self, seed: int, pop: int):
        self.rng = derive_stream(seed, MASTER)
        self.pop = pop

    def initial(self) -> int:
        return self.rng.seed64()

    def generation(self) -> tuple[list[int], int]:
        seeds = [self.rng.seed64() for _ in range(self.pop)]
        return seeds, self.rng.seed64()


def evolve_score(config: EvolutionConfig, on_generation=None) -> RunResult:
    """Score-maximisation loop; dispatches to the worker protocol when
    ``config.comm`` is ``rebuild`` or ``p2p``."""
    config.validate()
    if config.comm != "local":
        from .distrib.protocol import run_distributed_score
        return run_distributed_score(config, on_generation=on_generation)
    template = actor_genome(config.task, config.net, config.hidden)
    base = genome_mod.replay(template)
    agents = [Agent(template, copy.deepcopy(base)) for _ in range(config.pop)]
    sched = SeedSchedule(config.seed, config.pop)
    rows = []
    with Evaluator(config.task, config.workers) as ev:
        ep = sched.initial()
        fits = ev.scores([a.network for a in agents], ep)
        rows.append(score_row(0, fits, agents))
        best = (agents[0].genome, fits[0], ep)
        for g in range(1, config.gens + 1):
            seeds, ep = sched.generation()
            for a, s in zip(agents, seeds):
                variation_step(a, s)
            fits = ev.scores([a.network for a in agents], ep)
            for a, f in zip(agents, fits):
                a.fitness = f
            rows.append(score_row(g, fits, agents))
            sel = truncation_select(fits)
            top = sel.ranking[0]
            best = (agents[top].genome, fits[top], ep)
            apply_selection(agents, sel)
            if on_generation is not None:
                on_generation(rows[-1])
            log.debug("gen %d mean %.2f max %.2f", g, rows[-1][1], rows[-1][2])
            if config.stop_mean is not None and rows[-1][1] >= config.stop_mean:
                break
    return RunResult(rows, agents, best[0], best[1], best[2])
