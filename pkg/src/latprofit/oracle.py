"""Exhaustive ground truth for tiny instances.

Spread is averaged over every realization, profit over every seed set,
and the optimum over every lattice point.  Sizes are capped so that a
full enumeration stays cheap.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .graph import Graph, ModelKind, TriggeringModel, assign_weighted_cascade, load_edge_list
from .objective import LatticeObjective
from .strategy import (
    Bounds, CostModel, StrategyFunction, StrategyParams, Vector, add_unit, cost, read_strategy_csv,
    write_strategy_csv,
)

MAX_NODES = 6
MAX_ARCS = 8
MAX_ACTIONS = 3
MAX_LATTICE = 200
MAX_REALIZATIONS = 1 << MAX_ARCS


class OracleCapExceeded(ValueError):
    pass


def _check_model(model: TriggeringModel) -> None:
    g = model.graph
    if g.n > MAX_NODES or g.m > MAX_ARCS:
        raise OracleCapExceeded(f"graph too large for enumeration (n={g.n}, m={g.m})")


def _choice_groups(model: TriggeringModel) -> list[list[tuple[int, float]]]:
    """Independent sampling groups: (live arc or -1, probability) options."""
    g = model.graph
    groups = []
    for a in np.flatnonzero(model.independent):
        p = float(model.weight[a])
        groups.append([(int(a), p), (-1, 1.0 - p)])
    if model.kind is ModelKind.LT:
        for v in range(g.n):
            arcs = [int(a) for a in g.in_arcs(v) if not model.independent[a]]
            if arcs:
                w = [float(model.weight[a]) for a in arcs]
                groups.append([(-1, max(0.0, 1.0 - sum(w)))] + list(zip(arcs, w)))
    return groups


def enumerate_realizations(model: TriggeringModel) -> Iterator[tuple[np.ndarray, float]]:
    """Yield every realization (live-arc mask) with its probability."""
    _check_model(model)
    groups = _choice_groups(model)
    m = model.graph.m
    for combo in itertools.product(*groups):
        live = np.zeros(m, dtype=bool)
        p = 1.0
        for a, q in combo:
            p *= q
            if a >= 0:
                live[a] = True
        yield live, p


def _reach_masks(g: Graph, live: np.ndarray) -> list[int]:
    """Bitmask of nodes reachable from each node through live arcs."""
    out = [[] for _ in range(g.n)]
    for a in np.flatnonzero(live):
        out[g.src[a]].append(int(g.dst[a]))
    masks = []
    for u in range(g.n):
        seen = 1 << u
        stack = [u]
        while stack:
            v = stack.pop()
            for w in out[v]:
                if not seen >> w & 1:
                    seen |= 1 << w
                    stack.append(w)
        masks.append(seen)
    return masks


def sigma_table(model: TriggeringModel) -> np.ndarray:
    """Exact expected spread for every seed set, indexed by node bitmask."""
    n = model.graph.n
    table = np.zeros(1 << n)
    for live, p in enumerate_realizations(model):
        if p == 0:
            continue
        reach = _reach_masks(model.graph, live)
        covered = [0] * (1 << n)
        for s in range(1, 1 << n):
            low = s & -s
            covered[s] = covered[s ^ low] | reach[low.bit_length() - 1]
        table += p * np.array([c.bit_count() for c in covered], dtype=float)
    return table


def exact_sigma(model: TriggeringModel, seeds) -> float:
    mask = 0
    for u in seeds:
        mask |= 1 << int(u)
    return float(sigma_table(model)[mask])


def subset_bits(n: int) -> np.ndarray:
    """``(2^n, n)`` membership matrix: row ``s`` is the bitmask ``s``."""
    return (np.arange(1 << n)[:, None] >> np.arange(n)) & 1 == 1


def seed_set_probabilities(h: np.ndarray) -> np.ndarray:
    """Probability of drawing exactly each seed set (bitmask-indexed)."""
    bits = subset_bits(len(h))
    return np.prod(np.where(bits, h, 1.0 - h), axis=1)


@dataclass(eq=False)
class OracleInstance:
    model: TriggeringModel
    params: StrategyFunction
    bounds: Bounds
    cost: CostModel
    _sigma: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        _check_model(self.model)
        if self.params.d > MAX_ACTIONS or self.bounds.d != self.params.d:
            raise OracleCapExceeded("too many actions or dimension mismatch")
        if self.bounds.lattice_size > MAX_LATTICE:
            raise OracleCapExceeded(f"lattice has {self.bounds.lattice_size} points (> {MAX_LATTICE})")
        if self.params.n != self.model.n:
            raise ValueError("strategy and graph disagree on the node count")

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def sigma(self) -> np.ndarray:
        if self._sigma is None:
            self._sigma = sigma_table(self.model)
        return self._sigma

    def mu(self, x: Sequence[int]) -> float:
        h = self.params.probabilities(x)
        return float(seed_set_probabilities(h) @ self.sigma)

    def profit(self, x: Sequence[int]) -> float:
        return self.mu(x) - cost(self.cost, x)

    def objective(self) -> "ExactProfit":
        return ExactProfit(self)

    def with_cost(self, cost_model: CostModel) -> "OracleInstance":
        return OracleInstance(self.model, self.params, self.bounds, cost_model, self._sigma)


def exact_profit(instance: OracleInstance, x: Sequence[int]) -> float:
    return instance.profit(x)


def exact_opt(instance: OracleInstance, rtol: float = 1e-12) -> tuple[list[Vector], float]:
    """All maximisers over the lattice (ties within ``rtol``) and the optimum."""
    pts = list(instance.bounds.points())
    vals = np.array([instance.profit(x) for x in pts])
    best = float(vals.max())
    tol = rtol * max(1.0, abs(best))
    return [x for x, v in zip(pts, vals) if v >= best - tol], best


class ExactProfit(LatticeObjective):
    def __init__(self, instance: OracleInstance):
        super().__init__(instance.bounds)
        self.instance = instance
        self._cache: dict[Vector, float] = {}

    def _value(self, x):
        v = self._cache.get(x)
        if v is None:
            v = self._cache[x] = self.instance.profit(x)
        return v


@dataclass
class DRReport:
    trials: int
    violations: int
    worst_gap: float
    negative_marginal: bool
    witness: tuple | None = None


def check_dr_submodular(
    objective: LatticeObjective, bounds: Bounds, trials: int, rng: np.random.Generator, tol: float = 1e-9
) -> DRReport:
    """Sample ``x <= y`` and ``i`` with ``y(i) < b(i)``; count ``f(e_i|x) < f(e_i|y) - tol``.

    Also looks for a negative unit marginal (a witness that the
    objective is not monotone) at the sampled points and at ``b - e_i``.
    """
    b = np.array(bounds.values)
    violations, worst, done = 0, -np.inf, 0
    witness = None
    while done < trials:
        y = rng.integers(0, b + 1)
        free = np.flatnonzero(y < b)
        if free.size == 0:
            continue
        x = rng.integers(0, y + 1)
        i = int(free[rng.integers(free.size)])
        xt, yt = tuple(int(v) for v in x), tuple(int(v) for v in y)
        gx = objective.marginal(xt, i, 1)
        gy = objective.marginal(yt, i, 1)
        gap = gy - gx
        worst = max(worst, gap)
        if gap > tol:
            violations += 1
        if witness is None:
            for pt, gain in ((xt, gx), (yt, gy)):
                if gain < 0:
                    witness = (pt, i, gain)
                    break
        done += 1
    if witness is None:
        for i in range(bounds.d):
            top = add_unit(bounds.values, i, -1)
            gain = objective.marginal(top, i, 1)
            if gain < 0:
                witness = (top, i, gain)
                break
    return DRReport(trials, violations, float(worst), witness is not None, witness)


def random_oracle_instance(
    rng: np.random.Generator,
    kind: ModelKind | str = ModelKind.IC,
    n_nodes: tuple[int, int] = (2, 5),
    max_arcs: int = 8,
    bounds: Sequence[int] = (2, 2),
    lam: float | None = None,
    r_max: float = 0.6,
) -> OracleInstance:
    """Random digraph with random IC probabilities or LT weights and random ``r``."""
    kind = ModelKind(kind)
    n = int(rng.integers(n_nodes[0], n_nodes[1] + 1))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    m = int(rng.integers(1, min(max_arcs, len(pairs)) + 1))
    chosen = rng.choice(len(pairs), size=m, replace=False)
    src = [pairs[k][0] for k in chosen]
    dst = [pairs[k][1] for k in chosen]
    g = Graph.from_arcs(n, src, dst)
    if kind is ModelKind.IC:
        model = TriggeringModel.ic(g, rng.uniform(0.1, 1.0, g.m))
    else:
        raw = rng.uniform(0.1, 1.0, g.m)
        total = np.bincount(g.dst, weights=raw, minlength=n)
        # scale each head's weights to a random budget in (0.3, 1]
        budget = rng.uniform(0.3, 1.0, n)
        model = TriggeringModel.lt(g, raw / total[g.dst] * budget[g.dst])
    b = Bounds(bounds)
    params = StrategyParams(rng.uniform(0.0, r_max, (n, b.d)), float(rng.uniform(0.5, 0.95)))
    if lam is None:
        lam = float(rng.uniform(0.0, 1.5))
    return OracleInstance(model, params, b, CostModel.from_lambda(lam, n, b))


def write_instance(instance: OracleInstance, directory: str | os.PathLike) -> None:
    """Store an instance as ``edges.txt``, ``params.csv`` and ``config.txt``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = instance.model.graph
    with open(d / "edges.txt", "w") as fh:
        for u, v in g.arcs():
            fh.write(f"{u} {v}\n")
    if not isinstance(instance.params, StrategyParams):
        raise TypeError("only StrategyParams can be serialised")
    write_strategy_csv(instance.params, d / "params.csv")
    lines = {
        "n": g.n,
        "model": instance.model.kind.value,
        "weights": ",".join(repr(float(w)) for w in instance.model.weight),
        "eta": repr(instance.params.eta),
        "b": ",".join(map(str, instance.bounds.values)),
        "costs": ",".join(repr(c) for c in instance.cost.unit_costs),
    }
    (d / "config.txt").write_text("".join(f"{k}={v}\n" for k, v in lines.items()))


def read_instance(directory: str | os.PathLike) -> OracleInstance:
    from .config import read_kv

    d = Path(directory)
    cfg = read_kv(d / "config.txt")
    n = int(cfg["n"])
    g0 = load_edge_list(d / "edges.txt")
    # fixture ids are already dense; keep the file's numbering
    g = Graph.from_arcs(n, g0.labels[g0.src], g0.labels[g0.dst])
    kind = ModelKind(cfg.get("model", "IC"))
    weights = cfg.get("weights", "wc")
    if weights == "wc":
        model = assign_weighted_cascade(g, kind)
    else:
        w = [float(t) for t in weights.split(",")]
        model = TriggeringModel.ic(g, w) if kind is ModelKind.IC else TriggeringModel.lt(g, w)
    b = Bounds(tuple(int(t) for t in cfg["b"].split(",")))
    params = read_strategy_csv(d / "params.csv", n, b.d, float(cfg["eta"]))
    if "costs" in cfg:
        cm = CostModel(tuple(float(t) for t in cfg["costs"].split(",")))
    else:
        cm = CostModel.from_lambda(float(cfg.get("lambda", 0.0)), n, b)
    return OracleInstance(model, params, b, cm)
