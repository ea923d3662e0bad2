import numpy as np
import pytest

from latprofit.diffusion import (
    ProfitSimulator, build_constructed_graph, diffuse_once, estimate_mu_mc, estimate_profit_mc,
    estimate_profit_two_stage, estimate_sigma, required_mc_samples, simulate_counts, spread,
)
from latprofit.graph import Graph, ModelKind, TriggeringModel, assign_weighted_cascade, random_digraph
from latprofit.oracle import exact_sigma
from latprofit.strategy import Bounds, CostModel, StrategyParams

from conftest import path_graph, single_arc


def test_diffuse_once_edge_cases(rng):
    g = random_digraph(25, 3, rng)
    m = assign_weighted_cascade(g)
    assert diffuse_once(m, [], rng) == 0
    assert diffuse_once(m, range(25), rng) == 25


def test_path_all_live(rng):
    m = TriggeringModel.ic(path_graph(3), [1.0, 1.0])
    assert diffuse_once(m, [0], rng) == 3


def test_all_live_matches_reachability(rng):
    g = random_digraph(40, 2, rng)
    m = TriggeringModel.ic(g, np.ones(g.m))
    est = estimate_sigma(m, [0, 5], 50, rng)
    assert est.std_error == 0
    assert est.mean == exact_reach(g, {0, 5})


def exact_reach(g, seeds):
    seen, stack = set(seeds), list(seeds)
    while stack:
        u = stack.pop()
        for v in g.out_neighbors(u).tolist():
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen)


def test_single_arc_sigma():
    est = estimate_sigma(single_arc(0.3), [0], 100_000, np.random.default_rng(1))
    assert abs(est.mean - 1.3) <= 4 * est.std_error
    assert estimate_sigma(single_arc(0.3), [], 10, np.random.default_rng(1)).mean == 0


def test_counts_bounded_by_seed_count_and_n(rng):
    g = random_digraph(60, 3, rng)
    for kind in ModelKind:
        c = simulate_counts(assign_weighted_cascade(g, kind), [1, 2, 3], 500, rng)
        assert c.min() >= 3 and c.max() <= 60


def test_reverse_spread_finds_ancestors():
    g = path_graph(4)
    live = np.ones((1, g.m), dtype=bool)
    active = np.zeros((1, 4), dtype=bool)
    active[0, 2] = True
    assert spread(g, live, active, reverse=True)[0].tolist() == [True, True, True, False]


def test_constructed_graph_shape():
    g = Graph.from_arcs(3, [0, 1, 0], [1, 2, 2])
    model = TriggeringModel.ic(g, [0.5, 0.5, 0.5])
    p = StrategyParams(np.full((3, 1), 0.4), 0.8)
    cg = build_constructed_graph(model, p, (0,))
    assert (cg.graph.n, cg.graph.m) == (6, 6)
    assert np.all(cg.model.weight[3:] == 0)
    assert estimate_mu_mc(model, p, (0,), 100, np.random.default_rng(0)).mean == 0


def test_lt_pseudo_arcs_are_independent():
    g = Graph.from_arcs(2, [0], [1])
    model = TriggeringModel.lt(g, [1.0])  # full LT budget at node 1
    p = StrategyParams(np.array([[0.5], [0.5]]), 0.8)
    cg = build_constructed_graph(model, p, (1,))
    assert cg.model.independent[1:].all() and not cg.model.independent[0]


@pytest.mark.parametrize("name", ["ic_fixture", "lt_fixture"])
def test_mc_profit_matches_oracle(name, request):
    inst = request.getfixturevalue(name)
    rng = np.random.default_rng(99)
    for x in [(1, 1), (2, 0), (0, 2)]:
        exact = inst.profit(x)
        mc = estimate_profit_mc(inst.model, inst.params, inst.cost, x, 100_000, rng)
        assert abs(mc.mean - exact) <= 4 * mc.std_error
        two = estimate_profit_two_stage(inst.model, inst.params, inst.cost, x, 100_000, rng)
        assert abs(two.mean - exact) <= 4 * two.std_error


def test_profit_zero_at_origin_and_negative_under_huge_cost(ic_fixture, rng):
    inst = ic_fixture
    assert estimate_profit_mc(inst.model, inst.params, inst.cost, (0, 0), 50, rng).mean == 0.0
    huge = CostModel.from_lambda(1e6, inst.n, inst.bounds)
    assert estimate_profit_mc(inst.model, inst.params, huge, inst.bounds.values, 200, rng).mean < 0


def test_mu_monotone_within_noise(ic_fixture):
    inst = ic_fixture
    rng = np.random.default_rng(4)
    a = estimate_mu_mc(inst.model, inst.params, (1, 1), 50_000, rng)
    b = estimate_mu_mc(inst.model, inst.params, (2, 3), 50_000, rng)
    assert a.mean <= b.mean + 4 * np.hypot(a.std_error, b.std_error)


def test_simulator_reproduces_fresh_estimate():
    rng = np.random.default_rng(5)
    g = random_digraph(80, 3, rng)
    b = Bounds((3, 3))
    p = StrategyParams(rng.uniform(0, 0.2, (80, 2)), 0.8)
    cm = CostModel.from_lambda(1.0, 80, b)
    for kind in ModelKind:
        model = assign_weighted_cascade(g, kind)
        sim = ProfitSimulator(model, p, cm, 700, seed=42)
        for x in [(0, 0), (1, 2), (3, 3)]:
            fresh = estimate_profit_mc(model, p, cm, x, 700, np.random.default_rng(42), keep_values=True)
            assert np.array_equal(sim.estimate(x, keep_values=True).values, fresh.values)


def test_sample_count_rule():
    with pytest.raises(ValueError, match="undefined at x=0"):
        required_mc_samples(10, 0.0, 0.1, 0.05)
    r = required_mc_samples(10, 2.0, 0.1, 0.05)
    assert r == int(np.ceil(100 * np.log(40) / (2 * 0.04)))


def test_exact_sigma_agrees_with_simulation(lt_fixture):
    rng = np.random.default_rng(8)
    est = estimate_sigma(lt_fixture.model, [0], 100_000, rng)
    assert abs(est.mean - exact_sigma(lt_fixture.model, [0])) <= 4 * est.std_error
