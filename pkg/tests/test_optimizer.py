import math

import numpy as np
import pytest

from latprofit.graph import ModelKind
from latprofit.objective import FunctionObjective, RISObjective, modular
from latprofit.optimizer import (
    Box, OptLowerBoundError, RunReport, SamplingPlan, baseline, choose_eps_split, compute_sample_sizes,
    dg_ip_ris, double_greedy, iterative_pruning, opt_estimation, telescoping_steps, telescoping_sum, theta1,
    _theta23,
)
from latprofit.oracle import exact_opt, random_oracle_instance
from latprofit.rrset import generate_collection
from latprofit.strategy import Bounds, CostModel, leq


def test_double_greedy_modular_increasing(rng):
    b = Bounds((3, 2, 4))
    assert double_greedy(modular([1, 2, 0.5], b), Box.full(b), rng) == (3, 2, 4)


def test_double_greedy_pure_cost_returns_lower(rng):
    b = Bounds((3, 3))
    box = Box((1, 0), (3, 2))
    assert double_greedy(modular([-1, -0.5], b), box, rng) == (1, 0)


def test_double_greedy_output_in_box(rng):
    inst = random_oracle_instance(rng, ModelKind.IC, bounds=(3, 2))
    obj = inst.objective()
    box = Box((1, 0), (3, 2))
    for _ in range(1000):
        x = double_greedy(obj, box, rng)
        assert box.contains(x)


def test_invalid_box():
    with pytest.raises(ValueError):
        Box((2, 0), (1, 1))


def test_pruning_modular_cases():
    b = Bounds((3, 2))
    up = iterative_pruning(modular([1, 1], b), b)
    assert (up.lower, up.upper) == ((3, 2), (3, 2))
    down = iterative_pruning(modular([-1, -1], b), b)
    assert (down.lower, down.upper) == ((0, 0), (0, 0))


def test_pruning_binary_search_matches_linear(rng):
    for kind in ModelKind:
        for _ in range(15):
            inst = random_oracle_instance(rng, kind, bounds=(3, 2))
            a = iterative_pruning(inst.objective(), inst.bounds)
            b = iterative_pruning(inst.objective(), inst.bounds, binary_search=True)
            assert (a.lower, a.upper) == (b.lower, b.upper)


def test_pruning_contains_optima_and_is_nested(rng):
    for k in range(30):
        inst = random_oracle_instance(rng, ModelKind.IC if k % 2 else ModelKind.LT, bounds=(3, 2))
        obj = inst.objective()
        box = iterative_pruning(obj, inst.bounds)
        best, _ = exact_opt(inst)
        assert all(box.contains(x) for x in best)
        for (g0, h0), (g1, h1) in zip(box.trace, box.trace[1:]):
            assert leq(g0, g1) and leq(g1, h1) and leq(h1, h0)
            assert obj.value(g1) >= obj.value(g0) - 1e-12 and obj.value(h1) >= obj.value(h0) - 1e-12


def test_telescoping_example(ic_fixture):
    assert telescoping_steps((1, 1), (2, 3)) == [0, 1, 1]
    obj = ic_fixture.objective()
    assert telescoping_sum(obj, (1, 1), (2, 3)) == pytest.approx(obj.value((2, 3)), rel=1e-12)
    with pytest.raises(ValueError):
        telescoping_steps((2, 0), (1, 1))


def test_theta1_example():
    assert theta1(100, Bounds((2, 2)), 10, 0.1) == 1674


def test_theta23_decrease_with_opt():
    b = Bounds((2, 2))
    prev = None
    for opt in (0.5, 1.0, 2.0, 4.0):
        t = compute_sample_sizes((0.1, 0.1, 0.1), 10, b, 50, opt)
        if prev:
            assert t[1] < prev[1] and t[2] < prev[2]
        prev = t
    with pytest.raises(ValueError):
        compute_sample_sizes((0.1, 0.1, 0.1), 10, b, 50, 0.0)


def test_eps_split():
    b = Bounds((2, 2))
    e2, e3 = choose_eps_split(0.15, 0.1, 10, b, 50, 2.0)
    assert e2 + e3 / 2 == pytest.approx(0.15, abs=1e-15)
    best = max(_theta23(50, b, 10, e2, e3, 2.0))
    naive = max(_theta23(50, b, 10, 0.075, 0.15, 2.0))
    assert best <= naive
    grid = min(max(_theta23(50, b, 10, 0.15 * k / 1000, 2 * (0.15 - 0.15 * k / 1000), 2.0)) for k in range(1, 1000))
    assert best <= grid * 1.01
    with pytest.raises(ValueError):
        SamplingPlan(0.1, 0.1, 0.2, 0.15, 10, 1, 1, 1, 1.0)


def test_opt_estimation_errors_when_no_gain(ic_fixture, rng):
    inst = ic_fixture.with_cost(CostModel.from_lambda(50.0, 4, ic_fixture.bounds))
    coll = generate_collection(inst.model, 200, rng)
    with pytest.raises(OptLowerBoundError, match="nonpositive"):
        opt_estimation(coll, inst.params, inst.cost, inst.bounds, 0.1)


def test_opt_estimation_modular_like(ic_fixture, rng):
    inst = ic_fixture.with_cost(CostModel.zero(2))
    coll = generate_collection(inst.model, 2000, rng)
    obj = RISObjective(coll, inst.params, inst.cost, inst.bounds)
    assert opt_estimation(coll, inst.params, inst.cost, inst.bounds, 0.1) == pytest.approx(
        obj.value(inst.bounds.values) - 0.2)


def test_opt_lower_bound_is_below_optimum(ic_fixture):
    inst = ic_fixture
    _, fstar = exact_opt(inst)
    t1 = theta1(inst.n, inst.bounds, 10, 0.1)
    rng = np.random.default_rng(21)
    below = sum(opt_estimation(generate_collection(inst.model, t1, rng), inst.params, inst.cost, inst.bounds, 0.1)
                <= fstar for _ in range(200))
    assert below / 200 >= 1 - 1 / 30


def test_dg_ip_ris_deterministic_and_reported(ic_fixture):
    inst = ic_fixture
    a = dg_ip_ris(inst.model, inst.params, inst.cost, inst.bounds, seed=5)
    b = dg_ip_ris(inst.model, inst.params, inst.cost, inst.bounds, seed=5)
    assert a.chosen_x == b.chosen_x and a.objective_estimate == b.objective_estimate
    assert a.condition_B >= a.condition_A
    assert a.theta_used == a.theta_required and not a.capped
    row = a.row()
    assert row["rng_seed"] == 5 and isinstance(row["chosen_x"], str)
    assert "condition_B=" in a.format()


def test_dg_ip_ris_cap_voids_guarantee(ic_fixture):
    inst = ic_fixture
    rep = dg_ip_ris(inst.model, inst.params, inst.cost, inst.bounds, seed=1, theta_cap=300)
    assert rep.capped and rep.theta_used == 300 and not rep.guarantee_holds
    heur = dg_ip_ris(inst.model, inst.params, inst.cost, inst.bounds, seed=1, theta_cap=300, heuristic=True)
    assert heur.guarantee_holds == (heur.condition_B >= 0)


def test_dg_ip_ris_monotone_case_returns_b(rng):
    inst = random_oracle_instance(np.random.default_rng(8), ModelKind.IC, lam=0.0)
    best, _ = exact_opt(inst)
    assert inst.bounds.values in best
    rep = dg_ip_ris(inst.model, inst.params, inst.cost, inst.bounds, seed=3)
    assert rep.chosen_x == inst.bounds.values


def test_baselines(rng):
    b = Bounds((2, 3))
    up = modular([1, 2], b)
    assert baseline("greedy", up, b) == (2, 3)
    assert baseline("random", up, b, rng) == (2, 3)
    down = modular([-1, -2], b)
    assert baseline("greedy", down, b) == (0, 0)
    assert baseline("random", down, b, rng) == (0, 0)
    with pytest.raises(ValueError):
        baseline("random", up, b)


def test_greedy_ties_lowest_index():
    b = Bounds((1, 1))
    assert baseline("greedy", modular([1, 1], b), b) == (1, 1)
    capped = FunctionObjective(lambda x: min(sum(x), 1), b)
    assert baseline("greedy", capped, b) == (1, 0)


def test_greedy_within_bracket(rng):
    for _ in range(20):
        inst = random_oracle_instance(rng, ModelKind.LT)
        _, fstar = exact_opt(inst)
        v = inst.profit(baseline("greedy", inst.objective(), inst.bounds))
        assert 0 <= v <= fstar + 1e-12


def test_lemma7_bound_statistically(rng):
    """E f(DG on [g, h]) >= (f((x* v g) ^ h) + (f(g) + f(h)) / 2) / 2 on random instances."""
    for k in range(8):
        inst = random_oracle_instance(rng, ModelKind.IC if k % 2 else ModelKind.LT, bounds=(3, 2))
        obj = inst.objective()
        box = iterative_pruning(obj, inst.bounds)
        best, _ = exact_opt(inst)
        xs = tuple(min(max(a, g), h) for a, g, h in zip(best[0], box.lower, box.upper))
        rhs = (obj.value(xs) + 0.5 * (obj.value(box.lower) + obj.value(box.upper))) / 2
        vals = np.array([obj.value(double_greedy(obj, box, rng)) for _ in range(500)])
        assert vals.mean() >= rhs - 3 * vals.std(ddof=1) / math.sqrt(500) - 1e-12
