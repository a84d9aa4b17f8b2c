import math

import numpy as np
import pytest

from nevo.checks import check_drn
from nevo.drn import DrnGraph
from nevo.errors import ConfigError, ContractError
from nevo.rng import derive_stream

from conftest import ScriptedRng


def fresh(n_in=3, n_out=2):
    return DrnGraph.new(n_in, n_out, ScriptedRng(normal_value=0.0))


def chain_state():
    """Three inputs, two outputs, after four connection growths."""
    g = fresh()
    i1, i2, i3 = g.inputs
    o1, o2 = g.outputs
    g.add_connection(i3, o2, 1.0)
    g.add_connection(i1, o1, 1.0)
    g.add_connection(i1, o2, 1.0)
    g.add_connection(o1, o2, 1.0)
    return g


def test_new_graph_has_no_connections():
    g = DrnGraph.new(3, 2, derive_stream(1, 0))
    assert g.n_nodes() == 5
    assert g.connections == [] and g.hidden == []
    assert check_drn(g) == []


def test_new_composite_mode_graph():
    g = fresh(0, 2)
    assert len(g.outputs) == 2
    assert g.receiving_nodes() == []
    assert not g.can_grow_connection()
    assert g.grow_connection(ScriptedRng()) is False


def test_needs_an_output():
    with pytest.raises(ConfigError):
        DrnGraph.new(3, 0, ScriptedRng())


def test_single_node_forward_is_tanh_bias():
    g = DrnGraph.new(1, 1, ScriptedRng(normal_value=0.3))
    assert g.forward([0.0]) == [pytest.approx(math.tanh(0.3), abs=1e-15)]


def test_grow_connection_on_fresh_graph():
    g = fresh()
    # third input, second output
    assert g.grow_connection(ScriptedRng([2, 1]))
    (c,) = g.connections
    assert (c.src, c.dst) == (g.inputs[2], g.outputs[1])
    assert c.same_pass


def test_parallel_connections_are_kept():
    g = fresh(1, 1)
    g.grow_connection(ScriptedRng([0, 0]))
    # the output now receives, so it joins the source pool; pick the input again
    g.grow_connection(ScriptedRng([0, 0]))
    assert len(g.connections) == 2
    assert g.emitting_nodes() == [g.inputs[0]] * 2


def test_prune_connection_cascades_hidden():
    g = chain_state()
    i1, _, i3 = g.inputs
    o1, o2 = g.outputs
    assert g.emitting_nodes() == [i1, i1, i3, o1]
    assert g.out_nodes(i1) == [o1, o2]
    g.prune_connection(ScriptedRng([0, 1]))
    assert [(c.src, c.dst) for c in g.connections] == [(i3, o2), (i1, o1), (o1, o2)]


def test_prune_cascades_through_chain():
    g = fresh(1, 1)
    (i,), (o,) = g.inputs, g.outputs
    h = g.add_hidden(0.0)
    g.add_connection(i, h, 1.0)
    g.add_connection(h, o, 1.0)
    g.prune_connection(ScriptedRng([0, 0]))  # emitting [i, h] -> i, then its only out-node h
    assert g.hidden == [] and g.connections == []


def test_prune_last_connection():
    g = fresh(1, 1)
    g.add_connection(g.inputs[0], g.outputs[0], 1.0)
    g.prune_connection(ScriptedRng([0, 0]))
    assert g.connections == []


def test_grow_node_splits_a_path():
    g = chain_state()
    g.prune_connection(ScriptedRng([0, 1]))
    i1, i2, i3 = g.inputs
    o1, o2 = g.outputs
    assert g.receiving_nodes() == [i1, i2, i3, o1, o2]
    # second input; second output (index 3 once i2 is removed); first output
    g.grow_node(ScriptedRng([1, 3, 0]))
    (h,) = g.hidden
    new = {(c.src, c.dst): c.same_pass for c in g.connections[-3:]}
    assert new == {(i2, h): True, (o2, h): False, (h, o1): True}
    assert h in g.receiving_nodes()
    assert g.emitting_nodes().count(h) == 1
    assert check_drn(g) == []


def test_grow_node_two_receiving_forces_distinct():
    g = fresh(2, 1)
    a, b, _ = g.sample_grow_node(ScriptedRng([0, 0, 0]))
    assert a != b
    assert not fresh(1, 1).can_grow_node()


def test_prune_node_removes_its_connections():
    g = fresh(1, 2)
    (i,), (o1, o2) = g.inputs, g.outputs
    h1 = g.add_hidden(0.0)
    h2 = g.add_hidden(0.0)
    g.add_connection(i, h2, 1.0)
    g.add_connection(h2, h1, 1.0)
    g.add_connection(h1, o1, 1.0)
    g.add_connection(i, o2, 1.0)
    g.prune_node(ScriptedRng([1]))
    assert g.hidden == []
    assert [(c.src, c.dst) for c in g.connections] == [(i, o2)]
    assert g.n_nodes() == 3


def test_prune_self_looping_node():
    g = fresh(1, 1)
    (i,), (o,) = g.inputs, g.outputs
    h = g.add_hidden(0.0)
    g.add_connection(i, h, 1.0)
    loop = g.add_connection(h, h, 1.0)
    assert not loop.same_pass
    g.add_connection(h, o, 1.0)
    g.prune_node(ScriptedRng([0]))
    assert g.hidden == [] and g.connections == []


def test_cascade_never_touches_inputs_or_outputs():
    g = fresh(2, 2)
    g.add_connection(g.inputs[0], g.outputs[0], 1.0)
    g.cascade()
    assert len(g.inputs) == 2 and len(g.outputs) == 2
    assert not g.can_prune_node() and g.prune_node(ScriptedRng()) is False


def test_forward_zero_net():
    g = fresh(3, 2)
    assert g.forward([1.0, -2.0, 3.0]) == [0.0, 0.0]


def test_forward_recurrence_hand_evaluation():
    g = fresh(1, 1)
    (i,), (o,) = g.inputs, g.outputs
    h = g.add_hidden(0.0)
    g.add_connection(i, h, 0.5)
    g.add_connection(h, h, 1.0)
    g.add_connection(h, o, 2.0)
    h0 = math.tanh(0.5)
    (out0,) = g.forward([1.0])
    assert out0 == pytest.approx(math.tanh(2 * h0), abs=1e-12)
    assert out0 == pytest.approx(0.727894, abs=1e-6)
    h1 = math.tanh(h0)
    (out1,) = g.forward([0.0])
    assert out1 == pytest.approx(math.tanh(2 * h1), abs=1e-12)
    assert out1 == pytest.approx(0.698116, abs=1e-6)
    g.reset()
    assert g.forward([1.0]) == [pytest.approx(out0, abs=1e-15)]


def test_forward_without_in_connections_is_tanh_bias():
    g = DrnGraph.new(2, 2, ScriptedRng(normal_value=-0.7))
    assert g.forward([5.0, 5.0]) == [pytest.approx(math.tanh(-0.7))] * 2


def test_forward_arity_checked():
    with pytest.raises(ContractError):
        fresh(3, 2).forward([1.0])


def test_same_pass_only_is_state_independent():
    rng = derive_stream(3, 1)
    g = DrnGraph.new(3, 2, rng)
    for _ in range(12):
        g.grow_connection(rng)
    g.connections = [c for c in g.connections if c.same_pass]
    g._touch()
    first = g.forward([0.1, 0.2, 0.3])
    g.forward([9.0, -9.0, 4.0])
    assert g.forward([0.1, 0.2, 0.3]) == first


def test_perturb_counts():
    g = fresh(1, 1)
    assert DrnGraph().n_params() == 0
    DrnGraph().perturb(derive_stream(0, 2))  # no-op on an empty graph
    g.add_connection(g.inputs[0], g.outputs[0], 1.0)
    before_w, before_b = g.connections[0].weight, dict(g.bias)
    g.perturb(derive_stream(9, 2))
    assert g.connections[0].weight != before_w
    assert all(g.bias[k] != v for k, v in before_b.items())


def test_perturb_variance():
    g = fresh(1, 1)
    for _ in range(99):
        g.add_connection(g.inputs[0], g.outputs[0], 0.0)
    rng = derive_stream(11, 2)
    deltas = []
    for _ in range(100):
        before = [c.weight for c in g.connections]
        g.perturb(rng)
        deltas += [c.weight - b for c, b in zip(g.connections, before)]
    assert 0.009 <= np.var(deltas) <= 0.011


def test_add_input_node_wires_one_target():
    g = fresh(0, 2)
    nid = g.add_input_node(ScriptedRng([0]))
    assert g.inputs == [nid]
    (c,) = g.connections
    assert (c.src, c.dst) == (nid, g.outputs[0]) and c.same_pass


def test_add_then_remove_input_restores_structure():
    rng = derive_stream(5, 1)
    g = DrnGraph.new(2, 2, rng)
    for _ in range(6):
        g.grow_node(rng) if g.can_grow_node() else g.grow_connection(rng)
    snapshot = ([(c.src, c.dst, c.weight, c.same_pass) for c in g.connections], list(g.hidden))
    nid = g.add_input_node(rng)
    g.remove_input_node(nid)
    assert ([(c.src, c.dst, c.weight, c.same_pass) for c in g.connections], list(g.hidden)) == snapshot


def _orphans_oracle(g, removed_input):
    """Fixpoint by brute force: repeatedly drop hidden nodes without in/out edges."""
    edges = [(c.src, c.dst) for c in g.connections if c.src != removed_input]
    hidden = set(g.hidden)
    changed = True
    while changed:
        changed = False
        for h in sorted(hidden):
            if not any(d == h for _, d in edges) or not any(s == h for s, _ in edges):
                hidden.discard(h)
                edges = [(s, d) for s, d in edges if h not in (s, d)]
                changed = True
    return hidden, sorted(edges)


def test_remove_input_cascades_chain():
    g = fresh(2, 1)
    i1, i2 = g.inputs
    (o,) = g.outputs
    h1 = g.add_hidden(0.0)
    h2 = g.add_hidden(0.0)
    g.add_connection(i1, h1, 1.0)
    g.add_connection(h1, h2, 1.0)
    g.add_connection(h2, o, 1.0)
    g.add_connection(i2, o, 1.0)
    hidden, edges = _orphans_oracle(g, i1)
    g.remove_input_node(i1)
    assert set(g.hidden) == hidden == set()
    assert sorted((c.src, c.dst) for c in g.connections) == edges == [(i2, o)]


@pytest.mark.parametrize("seed", range(20))
def test_remove_input_matches_fixpoint_oracle(seed):
    rng = derive_stream(seed, 1)
    g = DrnGraph.new(3, 2, rng)
    for _ in range(15):
        name = ["grow_connection", "grow_node", "grow_node", "prune_connection"][rng.integers(4)]
        g.mutate(name, rng)
    victim = g.inputs[rng.integers(3)]
    hidden, edges = _orphans_oracle(g, victim)
    g.remove_input_node(victim)
    assert set(g.hidden) == hidden
    assert sorted((c.src, c.dst) for c in g.connections) == edges
    assert check_drn(g) == []


def test_remove_non_input_rejected():
    g = fresh()
    with pytest.raises(ContractError):
        g.remove_input_node(g.outputs[0])


def test_grow_connection_source_frequencies():
    g = chain_state()
    pool = g.receiving_nodes()
    rng = derive_stream(21, 1)
    n = 20000
    counts = {p: 0 for p in pool}
    for _ in range(n):
        counts[g.sample_grow_connection(rng)[0]] += 1
    p = 1 / len(pool)
    sd = math.sqrt(n * p * (1 - p))
    assert all(abs(c - n * p) < 3 * sd for c in counts.values())


def test_prune_connection_source_follows_out_degree():
    g = chain_state()
    rng = derive_stream(22, 1)
    n = 20000
    counts = {}
    for _ in range(n):
        src = g.sample_prune_connection(rng)[0]
        counts[src] = counts.get(src, 0) + 1
    i1, _, i3 = g.inputs
    o1 = g.outputs[0]
    for node, share in ((i1, 0.5), (i3, 0.25), (o1, 0.25)):
        sd = math.sqrt(n * share * (1 - share))
        assert abs(counts[node] - n * share) < 3 * sd
