"""Dynamic convolutional network: a tree of 3x3 convolution and average-pooling nodes.

The root holds the input image.  Hidden nodes emit multi-valued feature maps;
output nodes (leaves) emit a single value, i.e. a 1x1x1 map.  Convolutions are
unit-stride cross-correlations followed by tanh, with zero padding only when a
spatial dimension is smaller than the kernel.  Pooling is linear averaging with
kernel = stride = pool factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ContractError

INPUT = "input"
CONV = "conv"
POOL = "pool"

MUTATIONS = ("grow_branch", "prune_branch", "expand_node", "contract_node")

PERTURB_STD = 0.1
OUTPUT_SHAPE = (1, 1, 1)


def conv_shape(parent_shape, out_channels: int):
    _, h, w = parent_shape
    return (out_channels, max(h - 2, 1), max(w - 2, 1))


def pool_shape(parent_shape, factor: int):
    c, h, w = parent_shape
    return (c, h // factor, w // factor)


def conv3x3(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid 3x3 cross-correlation after pad-to-3, plus bias, then tanh."""
    _, h, w = x.shape
    ph, pw = max(0, 3 - h), max(0, 3 - w)
    if ph or pw:
        # odd padding goes bottom/right first
        x = np.pad(x, ((0, 0), (ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)))
    win = sliding_window_view(x, (3, 3), axis=(1, 2))
    out = np.tensordot(kernel, win, axes=([1, 2, 3], [0, 3, 4]))
    return np.tanh(out + bias[:, None, None])


def avg_pool(x: np.ndarray, factor: int) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4))


@dataclass
class DcnNode:
    id: int
    kind: str
    parent: int | None
    out_shape: tuple[int, int, int]
    children: list[int] = field(default_factory=list)
    pool_factor: int = 0
    kernel: np.ndarray | None = None  # (out_channels, in_channels, 3, 3)
    bias: np.ndarray | None = None  # (out_channels,)

    @property
    def is_output(self) -> bool:
        return self.kind != INPUT and self.out_shape == OUTPUT_SHAPE

    @property
    def channels(self) -> int:
        return self.out_shape[0]


class DcnTree:
    """Rooted tree of conv/pool nodes.

    ``branches`` records every grown branch as ``(base, first node)``; the
    branching-node multiset is the list of bases of branches still alive, so
    a node appears once per branch grown from it (a branch's own continuation
    child does not count).
    """

    def __init__(self, shape):
        shape = tuple(int(s) for s in shape)
        if len(shape) != 3 or min(shape) < 1:
            raise ConfigError(f"bad DCN input shape {shape}")
        if shape == OUTPUT_SHAPE:
            raise ConfigError("a 1x1x1 input leaves nothing to convolve")
        self.nodes: dict[int, DcnNode] = {0: DcnNode(0, INPUT, None, shape)}
        self.root = 0
        self.next_id = 1
        self.branches: list[tuple[int, int]] = []

    @property
    def input_shape(self):
        return self.nodes[self.root].out_shape

    def __len__(self):
        return len(self.nodes)

    # ------------------------------------------------------------------
    # views

    def leaves(self) -> list[int]:
        return [n.id for n in self.nodes.values() if n.is_output]

    def hidden_nodes(self) -> list[int]:
        return [n.id for n in self.nodes.values() if n.kind != INPUT and not n.is_output]

    def branching_nodes(self) -> list[int]:
        return [base for base, _ in self.branches]

    def expanded_nodes(self) -> list[int]:
        return [n.id for n in self.nodes.values() if n.kind == CONV for _ in range(n.channels - 1)]

    def expand_candidates(self) -> list[int]:
        out = []
        for n in self.nodes.values():
            if n.kind != CONV or n.is_output:
                continue
            if any(self.nodes[c].kind == POOL and self.nodes[c].is_output for c in n.children):
                continue
            out.append(n.id)
        return out

    def contract_pool(self) -> list[int]:
        """Expanded-nodes multiset minus nodes whose contraction would turn a
        hidden 1x1 pooling child into a 1x1x1 node that still has children."""
        out = []
        for nid in self.expanded_nodes():
            n = self.nodes[nid]
            if n.channels == 2 and any(self.nodes[c].kind == POOL and self.nodes[c].out_shape[1:] == (1, 1)
                                       for c in n.children):
                continue
            out.append(nid)
        return out

    def subtree(self, nid: int) -> list[int]:
        out, stack = [], [nid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(reversed(self.nodes[cur].children))
        return sorted(out)

    def depth(self) -> int:
        def d(nid):
            return 1 + max((d(c) for c in self.nodes[nid].children), default=0)
        return d(self.root)

    # ------------------------------------------------------------------
    # growth

    def next_pool_factor(self, parent: int) -> int | None:
        p = self.nodes[parent]
        if p.kind == POOL:
            raise ContractError("pool factors are only assigned below input/conv nodes")
        _, h, w = p.out_shape
        used = {self.nodes[c].pool_factor for c in p.children if self.nodes[c].kind == POOL}
        for f in range(min(h, w), 1, -1):
            if h % f == 0 and w % f == 0 and f not in used:
                return f
        return None

    def _add(self, node: DcnNode) -> int:
        self.nodes[node.id] = node
        self.nodes[node.parent].children.append(node.id)
        self.next_id += 1
        return node.id

    def grow_node(self, parent: int, rng) -> int:
        """Create one child of ``parent``: pooling while an unused factor remains, else convolution."""
        p = self.nodes[parent]
        if p.is_output:
            raise ContractError("cannot grow below an output node")
        factor = None if p.kind == POOL else self.next_pool_factor(parent)
        nid = self.next_id
        if factor is not None:
            return self._add(DcnNode(nid, POOL, parent, pool_shape(p.out_shape, factor), pool_factor=factor))
        kernel = rng.normal((1, p.channels, 3, 3))
        bias = rng.normal(1)
        return self._add(DcnNode(nid, CONV, parent, conv_shape(p.out_shape, 1), kernel=kernel, bias=bias))

    def sample_branch_base(self, rng) -> int:
        return rng.choice([self.root] + self.hidden_nodes())

    def grow_branch(self, rng) -> list[int]:
        """Grow from a uniformly chosen base until an output node appears; returns created ids."""
        base = self.sample_branch_base(rng)
        created = [self.grow_node(base, rng)]
        self.branches.append((base, created[0]))
        while not self.nodes[created[-1]].is_output:
            created.append(self.grow_node(created[-1], rng))
        return created

    # ------------------------------------------------------------------
    # pruning

    def can_prune_branch(self) -> bool:
        return bool(self.branches)

    def sample_prune_branch(self, rng) -> tuple[int, int]:
        node = rng.choice(self.branching_nodes())
        return node, rng.choice(self.nodes[node].children)

    def remove_subtree(self, nid: int) -> list[int]:
        """Delete ``nid`` and its subtree, then any ancestor left childless;
        returns the removed output node ids in creation order."""
        dead = self.subtree(nid)
        leaves = [d for d in dead if self.nodes[d].is_output]
        parent = self.nodes[nid].parent
        self.nodes[parent].children.remove(nid)
        while parent != self.root and not self.nodes[parent].children:
            dead.append(parent)
            grand = self.nodes[parent].parent
            self.nodes[grand].children.remove(parent)
            parent = grand
        gone = set(dead)
        for d in gone:
            del self.nodes[d]
        self.branches = [(b, c) for b, c in self.branches if b not in gone and c not in gone]
        return leaves

    def prune_branch(self, rng) -> list[int] | None:
        if not self.can_prune_branch():
            return None
        _, child = self.sample_prune_branch(rng)
        return self.remove_subtree(child)

    # ------------------------------------------------------------------
    # channel edits

    def _consumers(self, nid: int) -> list[DcnNode]:
        """Conv nodes reading ``nid``'s feature maps, looking through pool nodes."""
        out = []
        for c in self.nodes[nid].children:
            child = self.nodes[c]
            if child.kind == CONV:
                out.append(child)
            else:
                out.extend(self._consumers(c))
        return out

    def _pool_descendants(self, nid: int) -> list[DcnNode]:
        out = []
        for c in self.nodes[nid].children:
            child = self.nodes[c]
            if child.kind == POOL:
                out.append(child)
                out.extend(self._pool_descendants(c))
        return out

    def expand(self, nid: int, rng):
        n = self.nodes[nid]
        c_in = n.kernel.shape[1]
        n.kernel = np.concatenate([n.kernel, rng.normal((1, c_in, 3, 3))])
        n.bias = np.concatenate([n.bias, rng.normal(1)])
        n.out_shape = (n.channels + 1,) + n.out_shape[1:]
        for p in self._pool_descendants(nid):
            p.out_shape = (p.channels + 1,) + p.out_shape[1:]
        for c in self._consumers(nid):
            c.kernel = np.concatenate([c.kernel, rng.normal((c.kernel.shape[0], 1, 3, 3))], axis=1)

    def expand_node(self, rng) -> int | None:
        cands = self.expand_candidates()
        if not cands:
            return None
        nid = rng.choice(cands)
        self.expand(nid, rng)
        return nid

    def contract(self, nid: int, channel: int):
        n = self.nodes[nid]
        n.kernel = np.delete(n.kernel, channel, axis=0)
        n.bias = np.delete(n.bias, channel)
        n.out_shape = (n.channels - 1,) + n.out_shape[1:]
        for p in self._pool_descendants(nid):
            p.out_shape = (p.channels - 1,) + p.out_shape[1:]
        for c in self._consumers(nid):
            c.kernel = np.delete(c.kernel, channel, axis=1)

    def contract_node(self, rng) -> int | None:
        pool = self.contract_pool()
        if not pool:
            return None
        nid = rng.choice(pool)
        self.contract(nid, rng.integers(self.nodes[nid].channels))
        return nid

    # ------------------------------------------------------------------
    # weights and forward pass

    def conv_nodes(self) -> list[DcnNode]:
        return [n for n in self.nodes.values() if n.kind == CONV]

    def n_params(self) -> int:
        return sum(n.kernel.size + n.bias.size for n in self.conv_nodes())

    def perturb(self, rng, std: float = PERTURB_STD):
        convs = self.conv_nodes()
        total = sum(n.kernel.size + n.bias.size for n in convs)
        if not total:
            return
        deltas = rng.normal(total) * std
        i = 0
        for n in convs:
            k = n.kernel.size
            n.kernel = n.kernel + deltas[i:i + k].reshape(n.kernel.shape)
            i += k
            b = n.bias.size
            n.bias = n.bias + deltas[i:i + b]
            i += b

    def forward(self, image) -> dict[int, float]:
        """Scalar output of every leaf, keyed by leaf id."""
        x = np.asarray(image, dtype=float)
        if x.shape != self.input_shape:
            raise ContractError(f"image shape {x.shape} != {self.input_shape}")
        values: dict[int, float] = {}
        stack = [(self.root, x)]
        while stack:
            nid, fmap = stack.pop()
            for c in self.nodes[nid].children:
                child = self.nodes[c]
                if child.kind == CONV:
                    y = conv3x3(fmap, child.kernel, child.bias)
                else:
                    y = avg_pool(fmap, child.pool_factor)
                if child.is_output:
                    values[c] = float(y[0, 0, 0])
                else:
                    stack.append((c, y))
        return values

    def __repr__(self):
        return f"DcnTree(input={self.input_shape}, nodes={len(self.nodes)}, leaves={len(self.leaves())})"
