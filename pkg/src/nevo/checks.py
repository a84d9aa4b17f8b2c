"""Structural invariant checks, recomputed from scratch.

Each checker returns a list of human-readable violations (empty when the
structure is sound).  They deliberately avoid the cached views the mutation
code relies on.
"""

from __future__ import annotations

from .composite import CompositeNet
from .dcn import CONV, INPUT, OUTPUT_SHAPE, POOL, DcnTree
from .drn import DrnGraph


def check_drn(g: DrnGraph) -> list[str]:
    bad = []
    order = g.inputs + g.hidden + g.outputs
    if len(set(order)) != len(order):
        bad.append("duplicate node ids")
    if any(i >= g.next_id for i in order):
        bad.append("node id beyond allocation counter")
    pos = {n: i for i, n in enumerate(order)}
    if set(g.bias) != set(g.hidden) | set(g.outputs):
        bad.append("bias keys != hidden + output nodes")
    if not g.outputs:
        bad.append("no output nodes")
    has_in, has_out = set(), set()
    inputs = set(g.inputs)
    for c in g.connections:
        if c.src not in pos or c.dst not in pos:
            bad.append(f"dangling connection {c.src}->{c.dst}")
            continue
        if c.dst in inputs:
            bad.append(f"connection into input node {c.dst}")
        if c.same_pass != (pos[c.src] < pos[c.dst]):
            bad.append(f"phase of {c.src}->{c.dst} disagrees with evaluation order")
        has_out.add(c.src)
        has_in.add(c.dst)
    for h in g.hidden:
        if h not in has_in:
            bad.append(f"hidden node {h} receives nothing")
        if h not in has_out:
            bad.append(f"hidden node {h} emits nothing")
    return bad


def _expected_shape(tree: DcnTree, nid: int):
    n = tree.nodes[nid]
    if n.kind == INPUT:
        return n.out_shape
    pc, ph, pw = _expected_shape(tree, n.parent)
    if n.kind == POOL:
        return (pc, ph // n.pool_factor, pw // n.pool_factor)
    return (n.kernel.shape[0], max(ph - 2, 1), max(pw - 2, 1))


def check_dcn(tree: DcnTree) -> list[str]:
    bad = []
    nodes = tree.nodes
    roots = [n for n in nodes.values() if n.parent is None]
    if len(roots) != 1 or roots[0].id != tree.root or roots[0].kind != INPUT:
        bad.append("root is not the unique parentless input node")
        return bad
    seen, stack = set(), [tree.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            bad.append(f"node {nid} reached twice")
            continue
        seen.add(nid)
        for c in nodes[nid].children:
            if c not in nodes:
                bad.append(f"missing child {c}")
            elif nodes[c].parent != nid:
                bad.append(f"child {c} does not point back to {nid}")
            else:
                stack.append(c)
    if seen != set(nodes):
        bad.append("unreachable nodes")
    for n in nodes.values():
        if n.kind == INPUT and n.id != tree.root:
            bad.append(f"extra input node {n.id}")
        if n.kind != INPUT and _expected_shape(tree, n.id) != n.out_shape:
            bad.append(f"stored shape of {n.id} differs from recomputed shape")
        if n.kind == CONV:
            pch = nodes[n.parent].out_shape[0]
            if n.kernel.shape != (n.out_shape[0], pch, 3, 3) or n.bias.shape != (n.out_shape[0],):
                bad.append(f"kernel of {n.id} has shape {n.kernel.shape}")
            if n.out_shape == OUTPUT_SHAPE and n.kernel.shape[0] != 1:
                bad.append(f"output conv {n.id} has several channels")
        if n.kind == POOL:
            pc, ph, pw = nodes[n.parent].out_shape
            f = n.pool_factor
            if f < 2 or ph % f or pw % f:
                bad.append(f"pool factor {f} of {n.id} does not divide parent")
            if n.out_shape[0] != pc:
                bad.append(f"pool {n.id} changes channel count")
            if nodes[n.parent].kind == POOL:
                bad.append(f"pool {n.id} under a pool node")
        if not n.children and n.kind != INPUT and n.out_shape != OUTPUT_SHAPE:
            bad.append(f"leaf {n.id} is not an output node")
        if n.children and n.out_shape == OUTPUT_SHAPE and n.kind != INPUT:
            bad.append(f"output node {n.id} has children")
        factors = [nodes[c].pool_factor for c in n.children if c in nodes and nodes[c].kind == POOL]
        if len(factors) != len(set(factors)):
            bad.append(f"sibling pool factors repeat under {n.id}")
    for base, child in tree.branches:
        if base not in nodes or child not in nodes or nodes[child].parent != base:
            bad.append(f"stale branch record {base}->{child}")
    return bad


def check_composite(net: CompositeNet) -> list[str]:
    bad = ["drn: " + v for v in check_drn(net.drn)] + ["dcn: " + v for v in check_dcn(net.dcn)]
    leaves = [n.id for n in net.dcn.nodes.values() if n.kind != INPUT and not n.children]
    mapped_leaves = [l for l, _ in net.leaf_map]
    mapped_inputs = [i for _, i in net.leaf_map]
    if sorted(mapped_leaves) != sorted(leaves) or len(set(mapped_leaves)) != len(mapped_leaves):
        bad.append("leaf_map does not cover the DCN leaves exactly once")
    if mapped_leaves != sorted(mapped_leaves):
        bad.append("leaf_map not in leaf creation order")
    if net.drn.inputs[net.n_extra:] != mapped_inputs:
        bad.append("DRN inputs do not match leaf_map order")
    if len(net.drn.inputs) != net.n_extra + len(leaves):
        bad.append("DRN input count != leaves + extras")
    return bad
