import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latprofit.graph import Graph, ModelKind, TriggeringModel, assign_weighted_cascade, random_digraph
from latprofit.objective import RISObjective
from latprofit.oracle import check_dr_submodular
from latprofit.rrset import (
    CoverageState, RRCollection, RRSet, coverage_probability, estimate_f_hat, generate_collection,
    generate_rr_set, marginal_gain,
)
from latprofit.strategy import Bounds, CostModel, StrategyParams


def test_isolated_root():
    g = Graph.from_arcs(3, [0], [1])
    m = TriggeringModel.ic(g, [1.0])
    s = generate_rr_set(m, np.random.default_rng(0), root=2)
    assert s.nodes.tolist() == [2]


def test_all_live_dag_gives_ancestors():
    # 0->1->3, 2->3, 3->4
    g = Graph.from_arcs(5, [0, 1, 2, 3], [1, 3, 3, 4])
    m = TriggeringModel.ic(g, np.ones(4))
    assert generate_rr_set(m, np.random.default_rng(0), root=3).nodes.tolist() == [0, 1, 2, 3]
    for method in ("lazy", "frontier", "batch"):
        c = generate_collection(m, 50, np.random.default_rng(1), method)
        for s in c:
            assert len(s) == {0: 1, 1: 2, 2: 1, 3: 4, 4: 5}[s.root]


def test_lt_sets_are_reverse_paths(rng):
    # root 4 <- {2, 3}, 2 <- {0, 1}: an LT set picks at most one parent per step
    g = Graph.from_arcs(5, [2, 3, 0, 1], [4, 4, 2, 2])
    lt = TriggeringModel.lt(g, [0.5, 0.5, 0.5, 0.5])
    sizes = {len(generate_rr_set(lt, rng, root=4)) for _ in range(10_000)}
    assert sizes == {2, 3}
    ic = TriggeringModel.ic(g, [0.9, 0.9, 0.9, 0.9])
    assert max(len(generate_rr_set(ic, rng, root=4)) for _ in range(200)) == 5
    c = generate_collection(lt, 10_000, rng, "frontier")
    for s in c:
        nodes = s.nodes.tolist()
        assert len(nodes) == {0: 1, 1: 1, 2: 2, 3: 1, 4: len(nodes)}[s.root]
        assert not (2 in nodes and 3 in nodes) and not (0 in nodes and 1 in nodes)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_generation_methods_agree_in_distribution(kind):
    rng = np.random.default_rng(3)
    g = random_digraph(150, 3, rng)
    m = assign_weighted_cascade(g, kind)
    means = {}
    for method in ("lazy", "frontier", "batch"):
        c = generate_collection(m, 8000, np.random.default_rng(11), method)
        sizes = np.diff(c.ptr)
        means[method] = (sizes.mean(), sizes.std() / np.sqrt(len(sizes)))
    base, se = means["lazy"]
    for method in ("frontier", "batch"):
        mean, se2 = means[method]
        assert abs(mean - base) <= 4 * np.hypot(se, se2)


def test_coverage_probability_examples():
    p = StrategyParams(np.array([[0.257], [0.257], [0.5]]), 0.8)
    both = RRSet(0, np.array([0, 1]))
    assert coverage_probability(both, p, (1,)) == pytest.approx(0.447951, abs=1e-6)
    assert coverage_probability(RRSet(2, np.array([2])), p, (1,)) == pytest.approx(0.5)
    assert coverage_probability(both, p, (0,)) == 0.0


def test_f_hat_hand_example():
    # p(R1) = 0.5, p(R2) = 1 - 0.75 = 0.25, c(x) = 0.3
    p = StrategyParams(np.array([[0.5], [0.25], [0.0], [0.0]]), 0.8)
    coll = RRCollection.from_sets(4, [RRSet(0, np.array([0, 2])), RRSet(1, np.array([1, 3]))])
    assert estimate_f_hat(coll, p, CostModel((0.3,)), (1,)) == pytest.approx(1.2)
    assert estimate_f_hat(coll, p, CostModel((0.3,)), (0,)) == 0.0


def test_collection_io_roundtrip(tmp_path, rng):
    m = assign_weighted_cascade(random_digraph(30, 3, rng))
    c = generate_collection(m, 200, rng)
    c.write(tmp_path / "rr.txt")
    back = RRCollection.read(tmp_path / "rr.txt")
    assert back.n == 30 and np.array_equal(back.roots, c.roots)
    assert np.array_equal(back.members, c.members) and np.array_equal(back.ptr, c.ptr)


def test_split_and_concat(rng):
    m = assign_weighted_cascade(random_digraph(30, 3, rng))
    c = generate_collection(m, 120, rng)
    parts = c.split(4)
    assert [p.theta for p in parts] == [30] * 4
    joined = RRCollection.concat(parts)
    assert np.array_equal(joined.members, c.members)


def test_membership_index(rng):
    m = assign_weighted_cascade(random_digraph(20, 3, rng))
    c = generate_collection(m, 300, rng)
    for u in range(20):
        expected = [k for k in range(c.theta) if u in c[k]]
        assert sorted(c.sets_containing(u).tolist()) == expected


def small_state(rng, zero_prob=0.0):
    g = random_digraph(40, 3, rng)
    m = assign_weighted_cascade(g)
    r = rng.uniform(0, 0.4, (40, 2))
    r[rng.random((40, 2)) < zero_prob] = 1.0
    p = StrategyParams(r, 0.7)
    b = Bounds((3, 3))
    cm = CostModel.from_lambda(0.8, 40, b)
    coll = generate_collection(m, 400, rng)
    return coll, p, cm, b


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.0, 0.2]))
def test_incremental_matches_scratch(seed, zero_prob):
    rng = np.random.default_rng(seed)
    coll, p, cm, b = small_state(rng, zero_prob)
    x = tuple(int(v) for v in rng.integers(0, 4, 2))
    state = CoverageState(coll, p, cm, x, b)
    for _ in range(30):
        i = int(rng.integers(2))
        d = 1 if x[i] == 0 else (-1 if x[i] == 3 else int(rng.choice([-1, 1])))
        y = x[:i] + (x[i] + d,) + x[i + 1:]
        want = estimate_f_hat(coll, p, cm, y) - estimate_f_hat(coll, p, cm, x)
        assert marginal_gain(state, i, d) == pytest.approx(want, rel=1e-9, abs=1e-9)
        state.commit(i, d)
        x = y
        assert state.value == pytest.approx(estimate_f_hat(coll, p, cm, x), rel=1e-9, abs=1e-9)
    scratch = CoverageState(coll, p, cm, x, b)
    assert np.allclose(state.set_survival, scratch.set_survival, rtol=1e-9, atol=1e-12)


def test_out_of_box_move_raises(rng):
    coll, p, cm, b = small_state(rng)
    state = CoverageState(coll, p, cm, (3, 0), b)
    with pytest.raises(IndexError):
        state.marginal_gain(0, 1)
    with pytest.raises(IndexError):
        state.marginal_gain(1, -1)


def test_query_does_not_mutate(rng):
    coll, p, cm, b = small_state(rng, 0.2)
    state = CoverageState(coll, p, cm, (1, 1), b)
    before = state.value
    state.marginal_gain(0, 1)
    state.marginal_gain(1, -1)
    assert state.value == before and state.x == (1, 1)


def test_fixed_collection_is_dr_submodular(rng):
    coll, p, cm, b = small_state(rng, 0.1)
    report = check_dr_submodular(RISObjective(coll, p, cm, b), b, 1000, rng)
    assert report.violations == 0
