from collections import Counter

import pytest

from nevo.codec import networks_equal
from nevo.errors import ConfigError
from nevo.evolution import (Agent, EvolutionConfig, SeedSchedule, action_select, actor_genome,
                            apply_selection, evolve_score, truncation_select, variation_step)
from nevo.genome import Genome, replay


def test_truncation_example():
    sel = truncation_select([3, 1, 2, 0])
    assert sel.selected == [0, 2]
    assert sel.pairs == [(0, 1), (2, 3)]


def test_truncation_ties_by_index():
    sel = truncation_select([1.0] * 6)
    assert sel.selected == [0, 1, 2]
    assert sel.pairs == [(0, 3), (1, 4), (2, 5)]


@pytest.mark.parametrize("bad", [[1, 2, 3], [], [1, None]])
def test_truncation_rejects(bad):
    with pytest.raises(ConfigError):
        truncation_select(bad)


def test_selection_duplicates_each_survivor_once():
    agents = [Agent.from_genome(Genome("drn", (4, 2), (i,))) for i in range(6)]
    fits = [5, 9, 1, 7, 3, 2]
    sel = truncation_select(fits)
    apply_selection(agents, sel)
    counts = Counter(a.genome for a in agents)
    assert sorted(counts.values()) == [2, 2, 2]
    assert {g.seeds for g in counts} == {(1,), (3,), (0,)}
    # copies are independent objects
    assert agents[1].network is not agents[sel.pairs[0][1]].network


@pytest.mark.parametrize("outs,want", [([0.1, 0.9], 1), ([0.5, 0.5], 0), ([-3.0], 0)])
def test_action_select(outs, want):
    assert action_select(outs) == want


def test_variation_step_grows_genome_and_matches_replay():
    agent = Agent.from_genome(actor_genome("dotchase", "dynamic"))
    for s in range(10):
        variation_step(agent, 1000 + s)
    assert len(agent.genome) == 10
    assert networks_equal(agent.network, replay(agent.genome))


def test_static_variation_keeps_shapes():
    agent = Agent.from_genome(actor_genome("cartpole", "static"))
    shapes = [p.shape for p in agent.network.params()]
    assert variation_step(agent, 3) is None
    assert [p.shape for p in agent.network.params()] == shapes


def test_actor_genomes():
    assert actor_genome("cartpole", "dynamic") == Genome("drn", (4, 2))
    assert actor_genome("cartpole", "static") == Genome("static", (4, 32, 32, 2))
    assert actor_genome("dotchase", "dynamic") == Genome("composite", (1, 8, 8, 5))
    with pytest.raises(ConfigError):
        actor_genome("cartpole", "lstm")


def test_zero_generations_logs_initial_only():
    res = evolve_score(EvolutionConfig(pop=2, gens=0))
    assert len(res.rows) == 1 and res.rows[0][0] == 0


@pytest.mark.parametrize("bad", [dict(pop=3), dict(pop=0), dict(task="lander"), dict(comm="udp"),
                                 dict(gens=-1), dict(net="lstm"), dict(workers=0)])
def test_bad_configs(bad):
    with pytest.raises(ConfigError):
        evolve_score(EvolutionConfig(**bad))


def test_run_is_deterministic():
    cfg = EvolutionConfig(pop=10, gens=8, seed=4)
    a, b = evolve_score(cfg), evolve_score(cfg)
    assert a.rows == b.rows
    assert [x.genome for x in a.agents] == [x.genome for x in b.agents]


def test_parallel_evaluation_matches_serial():
    base = dict(pop=6, gens=4, seed=2)
    a = evolve_score(EvolutionConfig(**base))
    b = evolve_score(EvolutionConfig(workers=2, **base))
    assert a.rows == b.rows


def test_lineage_length_equals_generation():
    res = evolve_score(EvolutionConfig(task="dotchase", pop=4, gens=5, seed=3))
    assert all(len(a.genome) == 5 for a in res.agents)
    for a in res.agents:
        assert networks_equal(a.network, replay(a.genome))


def test_after_selection_genomes_come_in_pairs():
    res = evolve_score(EvolutionConfig(pop=8, gens=3, seed=5))
    assert sorted(Counter(a.genome for a in res.agents).values()) == [2, 2, 2, 2]


def test_log_columns():
    res = evolve_score(EvolutionConfig(pop=4, gens=2, seed=1))
    g, mean, mx, glen, nodes, conns = res.rows[-1]
    assert g == 2 and mx >= mean and glen == 2 and nodes >= 6 and conns >= 0


def test_seed_schedule_layout():
    s = SeedSchedule(1, 3)
    first = s.initial()
    seeds, ep = s.generation()
    t = SeedSchedule(1, 3)
    assert t.initial() == first and t.generation() == (seeds, ep)
    assert len(seeds) == 3 and len(set(seeds + [ep, first])) == 5
