"""Coordinator side of the worker protocol.

One agent lives on each worker.  Each generation the coordinator scatters one
seed per worker, gathers fitness, selects, and sends every worker a verdict.
The two modes differ only in how agent state moves:

* ``rebuild``: workers keep just a genome and replay it from scratch every
  generation; overwritten workers receive the winner's seed chain.
* ``p2p``: workers keep the built agent and apply one variation step; a
  selected worker sends its encoded agent straight to its partner.

Seeds come from the same run-level schedules as the in-process loops, so all
modes produce the same logs.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .. import codec
from .. import genome as genome_mod
from ..adversarial import (AdversarialSchedule, adv_row, assign_matches, discriminator_genome,
                           match_rng)
from ..errors import ConfigError, ProtocolError
from ..evolution import (Agent, RunResult, SeedSchedule, actor_genome, truncation_select)
from . import messages as m
from .transport import DEFAULT_TIMEOUT, COORD, SimTransport, SocketCoordinator
from .worker import serve

log = logging.getLogger(__name__)

BENCH_HEADER = ("generation", "mode", "variation_ops", "variation_ms", "comm_ms")
TRANSPORTS = ("sim", "socket")


def pair_selected_to_unselected(fitnesses) -> list[tuple[int, int]]:
    """(sender worker, receiver worker) pairs; same rule as truncation selection."""
    return truncation_select(list(fitnesses)).pairs


@dataclass
class GenerationStats:
    generation: int
    variation_ops: float
    variation_ms: float
    comm_ms: float


@dataclass
class Cluster:
    """Coordinator endpoint plus the running workers."""

    ep: object
    n: int
    threads: list = field(default_factory=list)
    transport: object = None

    @classmethod
    def start(cls, n: int, transport: str = "sim", timeout: float = DEFAULT_TIMEOUT) -> "Cluster":
        if transport == "sim":
            t = SimTransport(n, timeout)
            threads = [threading.Thread(target=serve, args=(t.endpoint(i), t), daemon=True,
                                        name=f"nevo-worker-{i}") for i in range(n)]
            for th in threads:
                th.start()
            return cls(t.endpoint(COORD), n, threads, t)
        if transport == "socket":
            return cls(SocketCoordinator(n, timeout), n)
        raise ConfigError(f"unknown transport {transport!r}")

    def send(self, i, msg):
        self.ep.send(i, msg)

    def recv(self, i, cls):
        msg = self.ep.recv(i)
        if not isinstance(msg, cls):
            raise ProtocolError(f"coordinator: expected {cls.__name__} from worker {i}, "
                                f"got {type(msg).__name__}")
        return msg

    def gather(self, cls, ids=None) -> list:
        return [self.recv(i, cls) for i in (range(self.n) if ids is None else ids)]

    def shutdown(self, generation: int) -> list[tuple[object, genome_mod.Genome]]:
        for i in range(self.n):
            self.send(i, m.Shutdown(generation))
        agents = [codec.decode(msg.frame) for msg in self.gather(m.AgentTransfer)]
        self.close()
        return agents

    def close(self):
        for th in self.threads:
            th.join(timeout=5)
        self.ep.close()


def _setup(cluster: Cluster, roles, mode, task, T, genomes, data):
    for i in range(cluster.n):
        cluster.send(i, m.Setup(0, i, roles[i], mode, task, T, genome_mod.dumps(genomes[i]), data[i]))


def _verdicts(pairs, n, generation, offset=0, probe=None):
    """Verdict per worker; unpaired workers keep their agent."""
    out = {i + offset: m.SelectionVerdict(generation, i + offset, True, -1, probe == i + offset)
           for i in range(n)}
    for win, lose in pairs:
        out[win + offset] = m.SelectionVerdict(generation, win + offset, True, lose + offset,
                                               probe == win + offset)
        out[lose + offset] = m.SelectionVerdict(generation, lose + offset, False, win + offset,
                                                probe == lose + offset)
    return out


def _select_phase(cluster, mode, verdicts, genomes, pairs_by_offset, generation):
    """Send verdicts (plus seed chains in rebuild mode); returns GenerationDone list."""
    for i, v in sorted(verdicts.items()):
        cluster.send(i, v)
        if mode == "rebuild" and not v.selected:
            cluster.send(i, m.GenomeAssign(generation, i, genome_mod.dumps(genomes[v.partner])))
    done = cluster.gather(m.GenerationDone)
    for offset, pairs in pairs_by_offset:
        for win, lose in pairs:
            genomes[lose + offset] = genomes[win + offset]
    return done


def _check_mode(mode):
    if mode not in ("rebuild", "p2p"):
        raise ConfigError(f"worker protocol mode must be rebuild or p2p, got {mode!r}")


# ----------------------------------------------------------------------
# score maximisation


def run_distributed_score(config, on_generation=None, on_stats=None, null_task: bool = False,
                          template: genome_mod.Genome | None = None,
                          timeout: float = DEFAULT_TIMEOUT) -> RunResult:
    """Score loop over one worker per agent; ``config.comm`` picks the mode."""
    mode = config.comm
    _check_mode(mode)
    if template is None:
        template = actor_genome(config.task, config.net, config.hidden)
    pop = config.pop
    sched = SeedSchedule(config.seed, pop)
    genomes = [template] * pop
    rows, stats = [], []
    cluster = Cluster.start(pop, config.transport, timeout)
    try:
        _setup(cluster, ["actor"] * pop, mode, "null" if null_task else config.task, 0,
               genomes, [b""] * pop)
        best = None
        g = 0
        for g in range(config.gens + 1):
            if g == 0:
                ep, seeds = sched.initial(), [None] * pop
            else:
                seeds, ep = sched.generation()
                genomes = [gn.appended(s) for gn, s in zip(genomes, seeds)]
            t0 = time.perf_counter()
            for i in range(pop):
                cluster.send(i, m.SeedScatter(g, i, seeds[i], ep))
            reports = cluster.gather(m.FitnessReport)
            t1 = time.perf_counter()
            fits = [r.fitness for r in reports]
            rows.append((g, float(np.mean(fits)), float(np.max(fits)),
                         float(np.mean([len(x) for x in genomes])),
                         float(np.mean([r.nodes for r in reports])),
                         float(np.mean([r.connections for r in reports]))))
            pairs = []
            if g == 0:
                best = (genomes[0], fits[0], ep)
            else:
                sel = truncation_select(fits)
                top = sel.ranking[0]
                best = (genomes[top], fits[top], ep)
                pairs = sel.pairs
            _select_phase(cluster, mode, _verdicts(pairs, pop, g), genomes, [(0, pairs)], g)
            t2 = time.perf_counter()
            st = GenerationStats(g, float(np.mean([r.variation_ops for r in reports])),
                                 (t1 - t0) * 1e3, (t2 - t1) * 1e3)
            stats.append(st)
            if on_stats is not None:
                on_stats(st)
            if on_generation is not None:
                on_generation(rows[-1])
            if config.stop_mean is not None and rows[-1][1] >= config.stop_mean:
                break
        final = cluster.shutdown(g)
    except BaseException:
        _abort(cluster)
        raise
    agents = [Agent(gn, net) for net, gn in final]
    if [a.genome for a in agents] != genomes:
        raise ProtocolError("worker genomes diverged from the coordinator's record")
    return RunResult(rows, agents, best[0], best[1], best[2], extra={"stats": stats, "mode": mode})


def _abort(cluster: Cluster):
    try:
        if isinstance(cluster.ep, SocketCoordinator):
            for p in cluster.ep.procs:
                p.kill()
        cluster.ep.close()
    except Exception:  # already failing; keep the original error
        log.debug("cleanup after abort failed", exc_info=True)


# ----------------------------------------------------------------------
# adversarial imitation


def run_distributed_adversarial(config, dataset, probe, on_generation=None,
                                timeout: float = DEFAULT_TIMEOUT) -> RunResult:
    """Generators on workers 0..pop-1, discriminators on pop..2*pop-1."""
    mode = config.comm
    _check_mode(mode)
    pop = config.pop
    g_tmpl = actor_genome(config.task, config.net, config.hidden)
    d_tmpl = discriminator_genome(config.task, config.net, config.hidden)
    genomes = [g_tmpl] * pop + [d_tmpl] * pop
    sched = AdversarialSchedule(config.seed, pop)
    real_blob, probe_blob = m.pack_dataset(dataset), m.pack_dataset(probe)
    cluster = Cluster.start(2 * pop, config.transport, timeout)
    rows = []
    try:
        _setup(cluster, ["gen"] * pop + ["disc"] * pop, mode, config.task, config.T, genomes,
               [probe_blob] * pop + [real_blob] * pop)
        best = None
        for g in range(config.gens + 1):
            if g == 0:
                (ep, ms), seeds = sched.initial(), [None] * (2 * pop)
            else:
                gs, ds, ep, ms = sched.generation()
                seeds = gs + ds
                genomes = [gn.appended(s) for gn, s in zip(genomes, seeds)]
            for i in range(2 * pop):
                cluster.send(i, m.SeedScatter(g, i, seeds[i], ep))
            assignment = assign_matches(pop, len(dataset), match_rng(ms))
            for gi, di, r in assignment.pairs:
                cluster.send(gi, m.MatchOrder(g, gi, "gen", pop + di, r))
                cluster.send(pop + di, m.MatchOrder(g, pop + di, "disc", gi, r))
            reports = cluster.gather(m.FitnessReport)
            gen_fit, disc_fit = [0.0] * pop, [0.0] * pop
            for rep in reports[pop:]:
                disc_fit[rep.worker - pop] = rep.fitness
                gen_fit[rep.partner] = rep.partner_fitness
            gsel, dsel = truncation_select(gen_fit), truncation_select(disc_fit)
            top = gsel.ranking[0]
            gpairs = gsel.pairs if g else []
            dpairs = dsel.pairs if g else []
            verdicts = _verdicts(gpairs, pop, g, 0, probe=top)
            verdicts.update(_verdicts(dpairs, pop, g, pop))
            best = (genomes[top], gen_fit[top], ep, genomes[pop + dsel.ranking[0]])
            done = _select_phase(cluster, mode, verdicts, genomes, [(0, gpairs), (pop, dpairs)], g)
            agree = done[top].probe
            rows.append(adv_row(g, gen_fit, disc_fit, agree))
            if on_generation is not None:
                on_generation(rows[-1])
        final = cluster.shutdown(config.gens)
    except BaseException:
        _abort(cluster)
        raise
    agents = [Agent(gn, net) for net, gn in final]
    if [a.genome for a in agents] != genomes:
        raise ProtocolError("worker genomes diverged from the coordinator's record")
    return RunResult(rows, agents[:pop], best[0], best[1], best[2],
                     extra={"agreement": rows[-1][5], "discriminators": agents[pop:],
                            "best_discriminator": best[3], "mode": mode})


# ----------------------------------------------------------------------
# communication benchmark


def bench_comm(gens: int, workers: int = 2, seed: int = 1, modes=("rebuild", "p2p"),
               template: genome_mod.Genome | None = None, transport: str = "sim",
               on_row=None) -> list[tuple]:
    """Null-task runs (fixed fitness) of each mode; one CSV row per generation and mode."""
    from ..evolution import EvolutionConfig

    if workers < 2 or workers % 2:
        raise ConfigError("bench needs an even worker count >= 2")
    template = template or genome_mod.Genome("composite", (1, 8, 8, 5))
    rows = []
    for mode in modes:
        cfg = EvolutionConfig(task="dotchase", pop=workers, gens=gens, seed=seed, comm=mode,
                              transport=transport)

        def record(st, mode=mode):
            if st.generation == 0:
                return
            row = (st.generation, mode, st.variation_ops, st.variation_ms, st.comm_ms)
            rows.append(row)
            if on_row is not None:
                on_row(row)

        run_distributed_score(cfg, on_stats=record, null_task=True, template=template)
    return rows
