"""Versioned binary frames for agents.

A frame is six length-prefixed sections (u32 big-endian length each)::

    header | DCN topology | DCN weights | DRN topology | DRN weights | genome

Weights are raw IEEE-754 float64, so a decoded network is bit-identical to
the encoded one.  Sections that do not apply to a network kind are empty.
Static nets reuse the DRN sections for their widths and flat parameters.
"""

from __future__ import annotations

import struct

import numpy as np

from . import genome as genome_mod
from .composite import CompositeNet
from .dcn import CONV, DcnNode, DcnTree, INPUT, POOL
from .drn import Connection, DrnGraph
from .errors import FormatError
from .static import StaticConvNet, StaticNet

MAGIC = b"NEVA"
VERSION = 1
KIND_DRN, KIND_COMPOSITE, KIND_STATIC, KIND_STATIC_CONV = range(4)
_DCN_KINDS = {INPUT: 0, CONV: 1, POOL: 2}
_DCN_KIND_NAMES = {v: k for k, v in _DCN_KINDS.items()}


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def ints(self, values):
        values = list(values)
        self.parts.append(struct.pack(f">I{len(values)}q", len(values), *values))

    def floats(self, arr):
        arr = np.ascontiguousarray(arr, dtype=">f8").ravel()
        self.parts.append(struct.pack(">I", arr.size) + arr.tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("truncated section")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def ints(self) -> list[int]:
        (n,) = struct.unpack(">I", self._take(4))
        return list(struct.unpack(f">{n}q", self._take(8 * n)))

    def floats(self) -> np.ndarray:
        (n,) = struct.unpack(">I", self._take(4))
        return np.frombuffer(self._take(8 * n), dtype=">f8").astype(float)


def _drn_sections(g: DrnGraph):
    top = _Writer()
    top.ints([g.next_id])
    top.ints(g.inputs)
    top.ints(g.hidden)
    top.ints(g.outputs)
    top.ints(v for c in g.connections for v in (c.src, c.dst, int(c.same_pass)))
    wts = _Writer()
    wts.floats([g.bias[n] for n in g.targets()])
    wts.floats([c.weight for c in g.connections])
    return top.getvalue(), wts.getvalue()


def _drn_from(top: bytes, wts: bytes) -> DrnGraph:
    t, w = _Reader(top), _Reader(wts)
    g = DrnGraph()
    (g.next_id,) = t.ints()
    g.inputs, g.hidden, g.outputs = t.ints(), t.ints(), t.ints()
    flat = t.ints()
    biases, weights = w.floats().tolist(), w.floats().tolist()
    g.bias = dict(zip(g.targets(), biases))
    g.connections = [Connection(flat[i], flat[i + 1], weights[i // 3], bool(flat[i + 2]))
                     for i in range(0, len(flat), 3)]
    if len(g.bias) != len(g.targets()) or len(g.connections) != len(weights):
        raise FormatError("DRN weight count mismatch")
    return g


def _dcn_sections(net: CompositeNet):
    tree = net.dcn
    top = _Writer()
    top.ints([tree.root, tree.next_id, net.n_extra])
    top.ints(v for b in tree.branches for v in b)
    top.ints(v for pair in net.leaf_map for v in pair)
    top.ints([len(tree.nodes)])
    wts = _Writer()
    for n in tree.nodes.values():
        kshape = n.kernel.shape if n.kind == CONV else ()
        top.ints([n.id, _DCN_KINDS[n.kind], -1 if n.parent is None else n.parent, n.pool_factor,
                  *n.out_shape, *kshape])
        top.ints(n.children)
        if n.kind == CONV:
            wts.floats(n.kernel)
            wts.floats(n.bias)
    return top.getvalue(), wts.getvalue()


def _dcn_from(top: bytes, wts: bytes):
    t, w = _Reader(top), _Reader(wts)
    root, next_id, n_extra = t.ints()
    br = t.ints()
    lm = t.ints()
    (count,) = t.ints()
    nodes = {}
    for _ in range(count):
        head = t.ints()
        children = t.ints()
        nid, kind, parent, factor = head[:4]
        shape = tuple(head[4:7])
        node = DcnNode(nid, _DCN_KIND_NAMES[kind], None if parent < 0 else parent, shape, children, factor)
        if node.kind == CONV:
            node.kernel = w.floats().reshape(head[7:11])
            node.bias = w.floats()
        nodes[nid] = node
    tree = DcnTree.__new__(DcnTree)
    tree.nodes, tree.root, tree.next_id = nodes, root, next_id
    tree.branches = [(br[i], br[i + 1]) for i in range(0, len(br), 2)]
    leaf_map = [(lm[i], lm[i + 1]) for i in range(0, len(lm), 2)]
    return tree, leaf_map, n_extra


def _static_sections(net: StaticNet):
    top = _Writer()
    if isinstance(net, StaticConvNet):
        top.ints([*net.shape, net.widths[1], net.widths[2], net.channels, net.n_extra, int(net.recurrent)])
    else:
        top.ints([int(net.recurrent), *net.widths])
    wts = _Writer()
    for p in net.params():
        wts.ints(p.shape)
        wts.floats(p)
    return top.getvalue(), wts.getvalue()


class _ZeroRng:
    def normal(self, size=None):
        return 0.0 if size is None else np.zeros(size)


def _static_from(kind: int, top: bytes, wts: bytes):
    t, w = _Reader(top), _Reader(wts)
    head = t.ints()
    if kind == KIND_STATIC_CONV:
        c, h, wd, hidden, n_out, ch, extra, rec = head
        net = StaticConvNet((c, h, wd), hidden, n_out, _ZeroRng(), channels=ch, recurrent=bool(rec), n_extra=extra)
    else:
        net = StaticNet(head[1:], _ZeroRng(), recurrent=bool(head[0]))
    arrays = []
    for _ in net.params():
        shape = w.ints()
        arrays.append(w.floats().reshape(shape))
    net.set_params(arrays)
    return net


def encode(net, genome: "genome_mod.Genome | None" = None) -> bytes:
    empty = b""
    if isinstance(net, CompositeNet):
        kind = KIND_COMPOSITE
        dcn_t, dcn_w = _dcn_sections(net)
        drn_t, drn_w = _drn_sections(net.drn)
    elif isinstance(net, DrnGraph):
        kind = KIND_DRN
        dcn_t = dcn_w = empty
        drn_t, drn_w = _drn_sections(net)
    elif isinstance(net, StaticNet):
        kind = KIND_STATIC_CONV if isinstance(net, StaticConvNet) else KIND_STATIC
        dcn_t = dcn_w = empty
        drn_t, drn_w = _static_sections(net)
    else:
        raise TypeError(f"cannot encode {type(net).__name__}")
    header = MAGIC + struct.pack(">HB", VERSION, kind)
    gen = genome_mod.dumps(genome).encode() if genome is not None else empty
    return b"".join(struct.pack(">I", len(s)) + s for s in (header, dcn_t, dcn_w, drn_t, drn_w, gen))


def decode(data: bytes):
    """Inverse of :func:`encode`; returns ``(network, genome_or_None)``."""
    sections, pos = [], 0
    for _ in range(6):
        if pos + 4 > len(data):
            raise FormatError("truncated agent frame")
        (n,) = struct.unpack(">I", data[pos:pos + 4])
        sections.append(data[pos + 4:pos + 4 + n])
        if len(sections[-1]) != n:
            raise FormatError("truncated agent frame")
        pos += 4 + n
    if pos != len(data):
        raise FormatError("trailing bytes after agent frame")
    header, dcn_t, dcn_w, drn_t, drn_w, gen = sections
    if header[:4] != MAGIC or len(header) != 7:
        raise FormatError("bad agent frame header")
    version, kind = struct.unpack(">HB", header[4:])
    if version != VERSION:
        raise FormatError(f"unsupported agent frame version {version}")
    if kind == KIND_DRN:
        net = _drn_from(drn_t, drn_w)
    elif kind == KIND_COMPOSITE:
        tree, leaf_map, n_extra = _dcn_from(dcn_t, dcn_w)
        net = CompositeNet(tree, _drn_from(drn_t, drn_w), leaf_map, n_extra)
    elif kind in (KIND_STATIC, KIND_STATIC_CONV):
        net = _static_from(kind, drn_t, drn_w)
    else:
        raise FormatError(f"unknown network kind {kind}")
    genome = genome_mod.loads(gen.decode()) if gen else None
    return net, genome


def networks_equal(a, b) -> bool:
    """Exact structural and bitwise-weight equality."""
    return encode(a) == encode(b)
