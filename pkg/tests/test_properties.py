"""Randomised invariant checks over mutation sequences and replay."""

import numpy as np
from hypothesis import given, settings, strategies as st

from nevo import codec
from nevo import genome as genome_mod
from nevo.checks import check_composite, check_drn
from nevo.genome import Genome

from oracles import composite_reference, drn_reference

seeds = st.lists(st.integers(0, 2**64 - 1), max_size=60)
shapes = st.sampled_from([(1, 4, 4), (1, 4, 6), (3, 8, 8), (2, 5, 7), (1, 3, 3)])
FAST = settings(max_examples=60, deadline=None)


def _inputs(rng, n, steps=4):
    return [rng.normal(size=n) for _ in range(steps)]


@FAST
@given(st.integers(1, 6), st.integers(1, 4), seeds)
def test_drn_invariants_hold_after_every_step(n_in, n_out, chain):
    g = genome_mod.replay(Genome("drn", (n_in, n_out)))
    for s in chain:
        genome_mod.vary(g, s)
        assert check_drn(g) == []


@FAST
@given(st.integers(1, 5), st.integers(1, 3), seeds, st.integers(0, 2**32 - 1))
def test_drn_forward_matches_reference(n_in, n_out, chain, data_seed):
    g = genome_mod.replay(Genome("drn", (n_in, n_out), tuple(chain)))
    xs = _inputs(np.random.default_rng(data_seed), n_in)
    want = drn_reference(g, xs)
    g.reset()
    for x, w in zip(xs, want):
        assert np.max(np.abs(np.subtract(g.forward(x), w))) < 1e-9


@FAST
@given(shapes, st.integers(1, 3), st.integers(0, 2), seeds)
def test_composite_invariants_hold_after_every_step(shape, n_out, n_extra, chain):
    net = genome_mod.replay(Genome("composite", shape + (n_out, n_extra)))
    for s in chain:
        genome_mod.vary(net, s)
        assert check_composite(net) == []


@FAST
@given(shapes, st.integers(0, 2), seeds, st.integers(0, 2**32 - 1))
def test_composite_forward_matches_reference(shape, n_extra, chain, data_seed):
    net = genome_mod.replay(Genome("composite", shape + (2, n_extra), tuple(chain)))
    rng = np.random.default_rng(data_seed)
    imgs = [rng.normal(size=shape) for _ in range(3)]
    extras = [rng.normal(size=n_extra) for _ in range(3)]
    want = composite_reference(net, imgs, extras)
    net.reset()
    for img, ex, w in zip(imgs, extras, want):
        assert np.max(np.abs(np.subtract(net.forward(img, list(ex)), w))) < 1e-9


genomes = st.one_of(
    st.builds(lambda a, b, s: Genome("drn", (a, b), tuple(s)), st.integers(1, 5), st.integers(1, 3), seeds),
    st.builds(lambda sh, s: Genome("composite", sh + (2,), tuple(s)), shapes, seeds),
    st.builds(lambda s: Genome("static", (4, 6, 2), tuple(s)), seeds),
    st.builds(lambda s: Genome("static", (3, 5, 1, "rec"), tuple(s)), seeds),
)


@FAST
@given(genomes)
def test_replay_is_exact_and_prefix_closed(g):
    a, b = genome_mod.replay(g), genome_mod.replay(g)
    assert codec.networks_equal(a, b)
    k = len(g) // 2
    net = genome_mod.replay(g.prefix(k))
    for s in g.seeds[k:]:
        genome_mod.vary(net, s)
    assert codec.networks_equal(net, a)


@FAST
@given(genomes)
def test_codec_and_text_round_trip(g):
    net = genome_mod.replay(g)
    back, g2 = codec.decode(codec.encode(net, g))
    assert g2 == g and codec.networks_equal(back, net)
    assert genome_mod.loads(genome_mod.dumps(g)) == g
