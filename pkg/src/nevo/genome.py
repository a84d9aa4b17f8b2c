"""Seed-chain genomes and their replay into networks.

A genome is an initial-network descriptor plus an ordered chain of 64-bit
seeds.  Replay builds the initial network, then applies one variation step per
seed.  Each seed drives its step through three labelled sub-streams: mutation
choice, structural sampling, and weight perturbation.

Initial networks are drawn from a fixed stream, so every agent of a given kind
starts from the same network and diversity comes from variation alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

from . import composite as composite_mod
from . import drn as drn_mod
from .composite import CompositeNet
from .drn import DrnGraph
from .errors import ConfigError, FormatError
from .rng import CHOICE, INIT, MASK64, PERTURB, STRUCTURE, derive_stream
from .static import StaticConvNet, StaticNet

KINDS = ("drn", "composite", "static")
HEADER = "NEVO-GENOME v1"
INIT_SEED = 0


def _parse_token(tok: str):
    tok = tok.strip()
    try:
        return int(tok)
    except ValueError:
        if tok in ("rec", "conv"):
            return tok
        raise ConfigError(f"bad descriptor token {tok!r}") from None


@dataclass(frozen=True)
class Genome:
    """Immutable agent identity.

    ``init`` is the descriptor of the starting network:

    * ``drn``: ``(n_in, n_out)``
    * ``composite``: ``(c, h, w, n_out)`` or ``(c, h, w, n_out, n_extra)``
    * ``static``: layer widths, optionally followed by ``"rec"``; or
      ``("conv", c, h, w, hidden, n_out[, n_extra][, "rec"])``
    """

    kind: str
    init: tuple
    seeds: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown genome kind {self.kind!r}")
        object.__setattr__(self, "init", tuple(self.init))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        for s in self.seeds:
            if not 0 <= s <= MASK64:
                raise ConfigError(f"seed out of range: {s}")

    def __len__(self):
        return len(self.seeds)

    def appended(self, seed: int) -> "Genome":
        return Genome(self.kind, self.init, self.seeds + (seed,))

    def prefix(self, k: int) -> "Genome":
        return Genome(self.kind, self.init, self.seeds[:k])


def build_initial(kind: str, init) -> DrnGraph | CompositeNet | StaticNet:
    """Construct the starting network for a descriptor."""
    rng = derive_stream(INIT_SEED, INIT)
    init = tuple(init)
    ints = [t for t in init if isinstance(t, int)]
    flags = {t for t in init if isinstance(t, str)}
    if any(i < 0 for i in ints):
        raise ConfigError(f"negative entry in descriptor {init}")
    if kind == "drn":
        if len(ints) != 2 or flags:
            raise ConfigError(f"drn descriptor is (n_in, n_out), got {init}")
        if ints[0] < 1:
            raise ConfigError("a standalone DRN needs at least one input")
        return DrnGraph.new(ints[0], ints[1], rng)
    if kind == "composite":
        if len(ints) not in (4, 5) or flags:
            raise ConfigError(f"composite descriptor is (c, h, w, n_out[, n_extra]), got {init}")
        c, h, w, n_out = ints[:4]
        extra = ints[4] if len(ints) == 5 else 0
        return CompositeNet.new(c, h, w, n_out, rng, n_extra=extra)
    if kind == "static":
        if flags - {"rec", "conv"}:
            raise ConfigError(f"bad static flags {flags}")
        rec = "rec" in flags
        if "conv" in flags:
            if len(ints) not in (5, 6):
                raise ConfigError(f"conv static descriptor is (conv, c, h, w, hidden, n_out[, n_extra]), got {init}")
            c, h, w, hidden, n_out = ints[:5]
            extra = ints[5] if len(ints) == 6 else 0
            return StaticConvNet((c, h, w), hidden, n_out, rng, recurrent=rec, n_extra=extra)
        return StaticNet(ints, rng, recurrent=rec)
    raise ConfigError(f"unknown genome kind {kind!r}")


def choose_mutation(net, names, rng) -> str:
    """Uniform draw over ``names``; an inapplicable draw is redrawn uniformly
    among the applicable ones."""
    first = names[rng.integers(len(names))]
    if net.applicable(first):
        return first
    ok = [n for n in names if net.applicable(n)]
    if not ok:
        raise ConfigError("no structural mutation applies to this network")
    return rng.choice(ok)


def mutation_names(net):
    if isinstance(net, CompositeNet):
        return composite_mod.MUTATIONS
    if isinstance(net, DrnGraph):
        return drn_mod.MUTATIONS
    return ()


def vary(net, seed: int) -> str | None:
    """One variation step driven by ``seed``: at most one structural mutation,
    then weight perturbation.  Returns the mutation applied, if any."""
    name = None
    names = mutation_names(net)
    if names:
        name = choose_mutation(net, names, derive_stream(seed, CHOICE))
        net.mutate(name, derive_stream(seed, STRUCTURE))
    net.perturb(derive_stream(seed, PERTURB))
    return name


def replay(genome: Genome, on_step: Callable | None = None):
    """Rebuild the network a genome encodes.

    ``on_step(k, net)`` is called after the k-th seed is applied (k from 1).
    """
    net = build_initial(genome.kind, genome.init)
    for k, seed in enumerate(genome.seeds, 1):
        vary(net, seed)
        if on_step is not None:
            on_step(k, net)
    return net


# ----------------------------------------------------------------------
# text format

def dumps(genome: Genome) -> str:
    lines = [HEADER, f"kind={genome.kind}", "init=" + ",".join(str(t) for t in genome.init)]
    lines += [str(s) for s in genome.seeds]
    return "\n".join(lines) + "\n"


def loads(text: str) -> Genome:
    lines = text.splitlines()
    if len(lines) < 3 or lines[0].strip() != HEADER:
        raise FormatError("not a NEVO-GENOME v1 file")
    if not lines[1].startswith("kind=") or not lines[2].startswith("init="):
        raise FormatError("missing kind= or init= line")
    kind = lines[1][5:].strip()
    try:
        init = tuple(_parse_token(t) for t in lines[2][5:].split(",") if t.strip())
        seeds = []
        for ln in lines[3:]:
            if not ln.strip():
                continue
            if not ln.strip().isdigit():
                raise FormatError(f"bad seed line {ln!r}")
            seeds.append(int(ln))
        return Genome(kind, init, tuple(seeds))
    except ConfigError as e:
        raise FormatError(str(e)) from e


def write(path, genome: Genome):
    from .report import atomic_write_text
    atomic_write_text(path, dumps(genome))


def read(path) -> Genome:
    with open(os.fspath(path)) as fh:
        return loads(fh.read())
