"""Worker role: owns exactly one agent and follows the coordinator's orders.

Socket-transport workers are spawned processes running :func:`main` with
``HOST PORT ID``; the simulated transport runs :meth:`Worker.run` on a thread.
"""

from __future__ import annotations

import logging
import sys
import time

from .. import codec
from .. import genome as genome_mod
from ..adversarial import agreement, confidence, generate
from ..envs import make_env
from ..errors import ProtocolError
from ..evolution import network_size, run_episode
from . import messages as m
from .transport import COORD, Endpoint, SocketWorker

log = logging.getLogger(__name__)


class Worker:
    def __init__(self, ep: Endpoint):
        self.ep = ep
        self.me = ep.me
        self.generation = 0
        self.network = None
        self.genome = None
        self.episode_seed = None

    def _expect(self, src, cls):
        msg = self.ep.recv(src)
        m.check_generation(msg, self.generation)
        if not isinstance(msg, cls):
            raise ProtocolError(f"worker {self.me}: expected {cls.__name__}, got {type(msg).__name__}")
        return msg

    def setup(self, msg: m.Setup):
        self.role, self.mode, self.task, self.T = msg.role, msg.mode, msg.task, msg.T
        self.genome = genome_mod.loads(msg.genome)
        self.env = None if self.task == "null" else make_env(self.task)
        self.data = m.unpack_dataset(msg.data) if msg.data else None
        if self.mode == "p2p":
            self.network = genome_mod.replay(self.genome)

    def run(self):
        self.setup(self._expect(COORD, m.Setup))
        while True:
            msg = self.ep.recv(COORD)
            m.check_generation(msg, self.generation)
            if isinstance(msg, m.Shutdown):
                self.ep.send(COORD, m.AgentTransfer(msg.generation, self.me,
                                                    codec.encode(self._built(), self.genome)))
                return
            if not isinstance(msg, m.SeedScatter):
                raise ProtocolError(f"worker {self.me}: unexpected {type(msg).__name__}")
            self.generation = msg.generation
            self.generation_step(msg)

    def _built(self):
        if self.network is None:
            self.network = genome_mod.replay(self.genome)
        return self.network

    # ------------------------------------------------------------------

    def vary(self, seed) -> int:
        """Variation stage; returns the number of variation operations performed."""
        if self.mode == "rebuild":
            if seed is not None:
                self.genome = self.genome.appended(seed)
            self.network = genome_mod.replay(self.genome)
            return len(self.genome)
        if seed is None:
            return 0
        self.genome = self.genome.appended(seed)
        genome_mod.vary(self.network, seed)
        return 1

    def generation_step(self, scatter: m.SeedScatter):
        g = scatter.generation
        t0 = time.perf_counter()
        ops = self.vary(scatter.seed)
        var_ms = (time.perf_counter() - t0) * 1e3
        nodes, conns = network_size(self.network)
        if self.role == "actor":
            fit = 0.0 if self.env is None else run_episode(self.network, self.env, scatter.episode_seed)[0]
            self.ep.send(COORD, m.FitnessReport(g, self.me, fit, ops, var_ms, nodes, conns))
        else:
            order = self._expect(COORD, m.MatchOrder)
            if order.role == "gen":
                fake = generate(self.network, self.env, scatter.episode_seed, self.T)
                self.ep.send(order.partner, m.pack_trajectory(g, self.me, fake))
                self.ep.send(COORD, m.FitnessReport(g, self.me, None, ops, var_ms, nodes, conns))
            else:
                fake = m.unpack_trajectory(self._expect(order.partner, m.TrajectoryTransfer))
                n_act = self.env.n_actions
                c_real = confidence(self.network, self.data[order.real_index], n_act)
                c_fake = confidence(self.network, fake, n_act)
                self.ep.send(COORD, m.FitnessReport(g, self.me, c_real - c_fake, ops, var_ms, nodes, conns,
                                                    order.partner, c_fake))
        self.select(self._expect(COORD, m.SelectionVerdict))

    def select(self, verdict: m.SelectionVerdict):
        g = verdict.generation
        probe = agreement(self.network, self.data) if verdict.probe else None
        t0 = time.perf_counter()
        if verdict.partner >= 0:
            if verdict.selected:
                if self.mode == "p2p":
                    self.ep.send(verdict.partner, m.AgentTransfer(g, self.me,
                                                                  codec.encode(self.network, self.genome)))
            elif self.mode == "p2p":
                msg = self._expect(verdict.partner, m.AgentTransfer)
                self.network, self.genome = codec.decode(msg.frame)
                if self.genome is None:
                    raise ProtocolError(f"worker {self.me}: transfer without genome")
            else:
                self.genome = genome_mod.loads(self._expect(COORD, m.GenomeAssign).genome)
                self.network = None
        comm_ms = (time.perf_counter() - t0) * 1e3
        self.ep.send(COORD, m.GenerationDone(g, self.me, comm_ms, probe))


def serve(ep: Endpoint, transport=None):
    """Thread target for the simulated transport: failures are reported, not raised."""
    try:
        Worker(ep).run()
    except BaseException as e:  # reported to the coordinator through the transport
        log.debug("worker %d failed", ep.me, exc_info=True)
        if transport is not None:
            transport.fail(ep.me, e)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    host, port, me = argv[0], int(argv[1]), int(argv[2])
    ep = SocketWorker(host, port, me)
    try:
        Worker(ep).run()
    finally:
        ep.close()

