"""Command line: evolve, record-expert, replay, bench-comm.

Run options can come from a ``key=value`` file given with ``--config``;
flags given on the command line override the file.  Exit status is 0 on
success, 1 for a configuration or input error and 2 for a runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import genome as genome_mod
from .adversarial import ADV_LOG_HEADER, AdversarialConfig, evolve_adversarial
from .composite import CompositeNet
from .dcn import CONV
from .envs import make_env, read_dataset, record_expert, write_dataset
from .errors import ConfigError, DatasetError, FormatError, NevoError
from .evolution import SCORE_LOG_HEADER, EvolutionConfig, evolve_score, network_size, run_episode
from .report import atomic_write_text, plot_bench, plot_fitness, write_csv
from .rng import derive_stream

log = logging.getLogger("nevo")

PROBE_STATES = 1000
PROBE_LABEL = 11


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ----------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    task: str = "cartpole"
    mode: str = "score"
    net: str = "dynamic"
    pop: int = 50
    gens: int = 300
    seed: int = 1
    workers: int = 1
    comm: str = "local"
    T: int = 100
    out: str = "runs/out"
    dataset: str | None = None
    transport: str = "sim"

    def validate(self):
        if self.mode not in ("score", "imitate"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "imitate" and not self.dataset:
            raise ConfigError("imitate mode needs --dataset")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.evolution_config().validate()

    def evolution_config(self):
        common = dict(task=self.task, net=self.net, pop=self.pop, gens=self.gens, seed=self.seed,
                      workers=self.workers, comm=self.comm, transport=self.transport)
        if self.mode == "imitate":
            return AdversarialConfig(T=self.T, **common)
        return EvolutionConfig(**common)


_INT_FIELDS = {"pop", "gens", "seed", "workers", "T"}


def read_config_file(path) -> dict:
    """``key=value`` lines; blank lines and ``#`` comments are skipped."""
    known = set(RunConfig.__dataclass_fields__)
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep or key not in known:
            raise ConfigError(f"{path}:{n}: expected key=value with a known key, got {line!r}")
        values[key] = _coerce(key, val)
    return values


def _coerce(key, val):
    if key in _INT_FIELDS:
        try:
            return int(val, 0)
        except ValueError as e:
            raise ConfigError(f"{key} must be an integer, got {val!r}") from e
    return val


def build_run_config(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in RunConfig.__dataclass_fields__:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# ----------------------------------------------------------------------
# commands


def _probe_for(cfg: RunConfig, T: int):
    """Held-out expert states for the agreement probe, separate from the dataset."""
    seed = derive_stream(cfg.seed, PROBE_LABEL).seed64()
    return record_expert(cfg.task, math.ceil(PROBE_STATES / T), T, seed)


def cmd_evolve(args) -> int:
    cfg = build_run_config(args)
    out = Path(cfg.out)
    ecfg = cfg.evolution_config()
    progress = _progress(cfg.gens)
    if cfg.mode == "score":
        res = evolve_score(ecfg, on_generation=progress)
        header = SCORE_LOG_HEADER
        plot_header = ("generation", "mean", "max")
        plot_rows = [r[:3] for r in res.rows]
        series = {"mean": [r[1] for r in res.rows], "max": [r[2] for r in res.rows]}
    else:
        ds = read_dataset(cfg.dataset)
        probe = _probe_for(cfg, ds.T)
        res = evolve_adversarial(ecfg, ds, probe, on_generation=progress)
        header = ADV_LOG_HEADER
        plot_header = ("generation", "gen_mean", "gen_max", "disc_mean", "disc_max")
        plot_rows = [r[:5] for r in res.rows]
        series = {k: [r[i] for r in res.rows] for i, k in enumerate(plot_header[1:], 1)}
        genome_mod.write(out / "best_discriminator.genome", res.extra["best_discriminator"])
    write_csv(out / "log.csv", header, res.rows)
    write_csv(out / "plot.csv", plot_header, plot_rows)
    genome_mod.write(out / "best.genome", res.best_genome)
    plot_fitness(out / "plot.png", [r[0] for r in plot_rows], series,
                 title=f"{cfg.task} {cfg.mode} ({cfg.net}, pop {cfg.pop}, seed {cfg.seed})")
    summary = {
        "task": cfg.task, "mode": cfg.mode, "net": cfg.net, "pop": cfg.pop, "seed": cfg.seed,
        "comm": cfg.comm, "generations_run": res.rows[-1][0],
        "best_fitness": repr(float(res.best_fitness)), "episode_seed": res.best_episode_seed,
    }
    if cfg.mode == "imitate":
        summary["agreement_top_gen"] = repr(float(res.rows[-1][5]))
    atomic_write_text(out / "summary.txt", "".join(f"{k}={v}\n" for k, v in summary.items()))
    final = res.rows[-1]
    print(f"generation {final[0]}: mean {final[1]:.4g} max {final[2]:.4g}; wrote {out}")
    return 0


def _progress(gens):
    step = max(1, gens // 10)

    def report(row):
        if row[0] % step == 0:
            log.info("generation %d: %s", row[0], " ".join(f"{v:.4g}" for v in row[1:3]))
    return report


def cmd_record_expert(args) -> int:
    ds = record_expert(args.task, args.n, args.T, args.seed)
    write_dataset(args.out, ds)
    print(f"wrote {len(ds)} trajectories of {ds.T} steps to {args.out}")
    return 0


def network_summary(net) -> dict:
    nodes, conns = network_size(net)
    channels = 0
    if isinstance(net, CompositeNet):
        channels = sum(n.channels for n in net.dcn.nodes.values() if n.kind == CONV)
    return {"nodes": nodes, "connections": conns, "channels": channels}


def cmd_replay(args) -> int:
    g = genome_mod.read(args.genome)
    env = make_env(args.task)
    net = genome_mod.replay(g)
    total, _, _, trace = run_episode(net, env, args.episode_seed, args.T, record=True)
    print(f"score {total!r}")
    print("actions " + " ".join(str(a) for a in trace))
    s = network_summary(net)
    print(f"network {g.kind} genome_len {len(g)} nodes {s['nodes']} connections {s['connections']} "
          f"channels {s['channels']}")
    return 0


def cmd_bench_comm(args) -> int:
    from .distrib.protocol import BENCH_HEADER, bench_comm

    out = Path(args.out)
    rows = bench_comm(args.gens, workers=args.workers, seed=args.seed, transport=args.transport)
    write_csv(out / "bench.csv", BENCH_HEADER, rows)
    plot_bench(out / "bench.png", [dict(zip(BENCH_HEADER, r)) for r in rows])
    print(f"wrote {len(rows)} rows to {out / 'bench.csv'}")
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nevo", description="Neuroevolution of growing networks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("evolve", help="run score maximisation or adversarial imitation")
    ev.add_argument("--config", help="key=value file; flags override it")
    ev.add_argument("--task", choices=["cartpole", "dotchase"])
    ev.add_argument("--mode", choices=["score", "imitate"])
    ev.add_argument("--net", choices=["static", "dynamic"])
    ev.add_argument("--pop", type=int)
    ev.add_argument("--gens", type=int)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--workers", type=int)
    ev.add_argument("--comm", choices=["local", "rebuild", "p2p"])
    ev.add_argument("--T", type=int, help="trajectory length (imitate mode)")
    ev.add_argument("--out")
    ev.add_argument("--dataset", help="NEVO-TRAJ file (imitate mode)")
    ev.add_argument("--transport", choices=["sim", "socket"])
    ev.set_defaults(func=cmd_evolve)

    rec = sub.add_parser("record-expert", help="record scripted-expert trajectories")
    rec.add_argument("--task", choices=["cartpole", "dotchase"], default="cartpole")
    rec.add_argument("--n", type=int, default=100)
    rec.add_argument("--T", type=int, default=100)
    rec.add_argument("--seed", type=int, default=1)
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=cmd_record_expert)

    rp = sub.add_parser("replay", help="rebuild a genome and play one episode")
    rp.add_argument("genome")
    rp.add_argument("--task", choices=["cartpole", "dotchase"], default="cartpole")
    rp.add_argument("--episode-seed", type=int, default=0)
    rp.add_argument("--T", type=int, help="stop after this many steps")
    rp.set_defaults(func=cmd_replay)

    bc = sub.add_parser("bench-comm", help="time rebuild against p2p agent transfer")
    bc.add_argument("--gens", type=int, default=100)
    bc.add_argument("--workers", type=int, default=2)
    bc.add_argument("--seed", type=int, default=1)
    bc.add_argument("--transport", choices=["sim", "socket"], default="sim")
    bc.add_argument("--out", default="runs/bench")
    bc.set_defaults(func=cmd_bench_comm)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"nevo: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError) as e:
        print(f"nevo: {e}", file=sys.stderr)
        return 1
    except (DatasetError, NevoError, OSError) as e:
        print(f"nevo: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
