import itertools

import numpy as np
import pytest

from latprofit.graph import Graph, ModelKind, TriggeringModel
from latprofit.objective import modular
from latprofit.oracle import (
    OracleCapExceeded, OracleInstance, check_dr_submodular, enumerate_realizations, exact_opt, exact_profit,
    exact_sigma, random_oracle_instance, read_instance, seed_set_probabilities, write_instance,
)
from latprofit.strategy import Bounds, CostModel, StrategyParams

from conftest import path_graph, single_arc


def test_exact_sigma_examples():
    m = single_arc(0.3)
    assert exact_sigma(m, []) == 0.0
    assert exact_sigma(m, [0]) == pytest.approx(1.3, abs=1e-15)
    full = TriggeringModel.ic(path_graph(4), [1.0, 1.0, 1.0])
    assert exact_sigma(full, [1]) == 3.0


def test_exact_profit_single_node():
    g = Graph.from_arcs(1, [], [])
    inst = OracleInstance(TriggeringModel.ic(g, []), StrategyParams(np.array([[0.5]]), 0.8), Bounds((1,)),
                          CostModel((0.1,)))
    assert exact_profit(inst, (0,)) == 0.0
    assert exact_profit(inst, (1,)) == pytest.approx(0.4)


def test_two_node_closed_form():
    p = 0.35
    m = single_arc(p)
    params = StrategyParams(np.array([[0.3], [0.6]]), 0.8)
    inst = OracleInstance(m, params, Bounds((2,)), CostModel.zero(1))
    for x in [(1,), (2,)]:
        h1, h2 = params.probabilities(x)
        # node 0 seeds itself; node 1 is reached by its own seed or through the arc
        closed = h1 + h2 + h1 * (1 - h2) * p
        assert inst.mu(x) == pytest.approx(closed, rel=1e-12)


def test_fixture_opt_frozen(ic_fixture, lt_fixture):
    best, val = exact_opt(ic_fixture)
    assert best == [(1, 1)] and val == pytest.approx(1.0044588929999998, rel=1e-12)
    best, val = exact_opt(lt_fixture)
    assert best == [(1, 0)] and val == pytest.approx(0.5065571875000003, rel=1e-12)


def test_ic_fixture_by_plain_enumeration(ic_fixture):
    """Recompute f at (1, 1) with nested loops over arcs and seed sets only."""
    inst = ic_fixture
    g, w = inst.model.graph, inst.model.weight
    h = inst.params.probabilities((1, 1))
    total = 0.0
    for live in itertools.product((0, 1), repeat=g.m):
        pg = np.prod([w[a] if live[a] else 1 - w[a] for a in range(g.m)])
        for seeds in itertools.product((0, 1), repeat=g.n):
            ps = np.prod([h[u] if seeds[u] else 1 - h[u] for u in range(g.n)])
            reached = {u for u in range(g.n) if seeds[u]}
            changed = True
            while changed:
                changed = False
                for a in range(g.m):
                    if live[a] and g.src[a] in reached and g.dst[a] not in reached:
                        reached.add(int(g.dst[a]))
                        changed = True
            total += pg * ps * len(reached)
    assert inst.profit((1, 1)) == pytest.approx(total - inst.cost((1, 1)), rel=1e-12)


def test_opt_extremes():
    rng = np.random.default_rng(2)
    inst = random_oracle_instance(rng, ModelKind.IC, lam=0.0)
    best, _ = exact_opt(inst)
    assert inst.bounds.values in best
    expensive = inst.with_cost(CostModel.from_lambda(1e6, inst.n, inst.bounds))
    assert exact_opt(expensive) == ([(0, 0)], 0.0)


def test_d1_argmax_by_direct_comparison():
    inst = OracleInstance(single_arc(0.5), StrategyParams(np.array([[0.4], [0.2]]), 0.8), Bounds((2,)),
                          CostModel((0.35,)))
    vals = [inst.profit((k,)) for k in range(3)]
    best, v = exact_opt(inst)
    assert best == [(int(np.argmax(vals)),)] and v == max(vals)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_probabilities_normalised(kind):
    rng = np.random.default_rng(5)
    for _ in range(10):
        inst = random_oracle_instance(rng, kind)
        assert sum(p for _, p in enumerate_realizations(inst.model)) == pytest.approx(1.0, abs=1e-9)
        h = inst.params.probabilities((1, 2))
        assert seed_set_probabilities(h).sum() == pytest.approx(1.0, abs=1e-9)


def test_caps_enforced():
    g = path_graph(8)
    with pytest.raises(OracleCapExceeded):
        exact_sigma(TriggeringModel.ic(g, np.full(7, 0.5)), [0])
    with pytest.raises(OracleCapExceeded):
        OracleInstance(single_arc(0.5), StrategyParams(np.zeros((2, 2)), 0.8), Bounds((20, 20)), CostModel.zero(2))


def test_dr_checker_on_modular_and_exact(rng):
    b = Bounds((3, 3))
    rep = check_dr_submodular(modular([1.0, -2.0], b), b, 300, rng)
    assert rep.violations == 0 and rep.worst_gap == 0.0 and rep.negative_marginal
    for kind in ModelKind:
        inst = random_oracle_instance(rng, kind, lam=2.0)
        rep = check_dr_submodular(inst.objective(), inst.bounds, 300, rng)
        assert rep.violations == 0 and rep.negative_marginal


def test_dr_checker_detects_violation(rng):
    b = Bounds((3, 3))
    from latprofit.objective import FunctionObjective
    convex = FunctionObjective(lambda x: float(x[0] ** 2 + x[1] ** 2), b)
    assert check_dr_submodular(convex, b, 200, rng).violations > 0


def test_instance_roundtrip(tmp_path, rng):
    inst = random_oracle_instance(rng, ModelKind.LT)
    write_instance(inst, tmp_path / "inst")
    back = read_instance(tmp_path / "inst")
    for x in inst.bounds.points():
        assert back.profit(x) == pytest.approx(inst.profit(x), rel=1e-12)
