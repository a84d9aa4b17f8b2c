"""Slow reference implementations used to cross-check the vectorised code."""

import math

import numpy as np


def conv_reference(x, kernel, bias):
    c, h, w = x.shape
    ph, pw = max(0, 3 - h), max(0, 3 - w)
    xp = np.zeros((c, h + ph, w + pw))
    xp[:, ph // 2:ph // 2 + h, pw // 2:pw // 2 + w] = x
    oh, ow = xp.shape[1] - 2, xp.shape[2] - 2
    out = np.zeros((kernel.shape[0], oh, ow))
    for o in range(kernel.shape[0]):
        for i in range(oh):
            for j in range(ow):
                s = bias[o]
                for ci in range(c):
                    for a in range(3):
                        for b in range(3):
                            s += kernel[o, ci, a, b] * xp[ci, i + a, j + b]
                out[o, i, j] = math.tanh(s)
    return out


def pool_reference(x, f):
    c, h, w = x.shape
    out = np.zeros((c, h // f, w // f))
    for ci in range(c):
        for i in range(h // f):
            for j in range(w // f):
                out[ci, i, j] = sum(x[ci, i * f + a, j * f + b] for a in range(f) for b in range(f)) / (f * f)
    return out


def dcn_reference(tree, image):
    """Recursive forward pass with explicit loops; returns {leaf: value}."""
    values = {}

    def visit(nid, fmap):
        for cid in tree.nodes[nid].children:
            node = tree.nodes[cid]
            if node.kind == "conv":
                y = conv_reference(fmap, node.kernel, node.bias)
            else:
                y = pool_reference(fmap, node.pool_factor)
            assert y.shape == node.out_shape
            if node.is_output:
                values[cid] = float(y[0, 0, 0])
            else:
                visit(cid, y)

    visit(tree.root, np.asarray(image, dtype=float))
    return values


def drn_reference(graph, input_seq):
    """Outputs for a sequence of input vectors, starting from all-zero state.

    Evaluates node by node in input, hidden, output order.  A connection whose
    source comes earlier in that order reads the source's value from this
    pass, otherwise the value left by the previous pass.
    """
    order = graph.inputs + graph.hidden + graph.outputs
    pos = {n: i for i, n in enumerate(order)}
    prev = {n: 0.0 for n in order}
    outs = []
    for x in input_seq:
        cur = dict(zip(graph.inputs, (float(v) for v in x)))
        for n in graph.hidden + graph.outputs:
            s = graph.bias[n]
            for c in graph.connections:
                if c.dst == n:
                    s += c.weight * (cur[c.src] if pos[c.src] < pos[n] else prev[c.src])
            cur[n] = math.tanh(s)
        outs.append([cur[o] for o in graph.outputs])
        prev = cur
    return outs


def composite_reference(net, images, extras=None):
    """DCN leaves via :func:`dcn_reference`, then the DRN sequence reference."""
    inputs = []
    for k, img in enumerate(images):
        leaves = dcn_reference(net.dcn, img)
        extra = list(extras[k]) if extras is not None else []
        inputs.append(extra + [leaves[leaf] for leaf, _ in net.leaf_map])
    return drn_reference(net.drn, inputs)
