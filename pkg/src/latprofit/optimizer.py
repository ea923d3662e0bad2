"""Lattice double greedy, iterative pruning, sample-size planning and DG-IP-RIS."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .graph import TriggeringModel
from .objective import LatticeObjective, RISObjective
from .rrset import RRCollection, generate_collection
from .strategy import Bounds, CostModel, StrategyFunction, Vector, add_unit, as_vector, leq

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Box:
    """The sub-lattice ``[lower, upper]``; ``trace`` holds pruning iterates."""

    lower: Vector
    upper: Vector
    trace: tuple[tuple[Vector, Vector], ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lower", as_vector(self.lower))
        object.__setattr__(self, "upper", as_vector(self.upper))
        if len(self.lower) != len(self.upper) or not leq(self.lower, self.upper):
            raise ValueError(f"invalid box [{self.lower}, {self.upper}]")

    @classmethod
    def full(cls, bounds: Bounds) -> "Box":
        return cls(bounds.zero(), bounds.values)

    def contains(self, x: Sequence[int]) -> bool:
        return leq(self.lower, x) and leq(x, self.upper)


def double_greedy(objective: LatticeObjective, box: Box, rng: np.random.Generator) -> Vector:
    """Randomised lattice double greedy started from ``x = lower``, ``y = upper``.

    Each unit of component ``i`` is either added to ``x`` (probability
    ``a' / (a' + b')``, taken as 1 when both are zero) or removed from ``y``,
    where ``a' = max(f(e_i | x), 0)`` and ``b' = max(f(-e_i | y), 0)``.
    """
    if not objective.bounds.contains(box.upper):
        raise ValueError("box exceeds the objective's bounds")
    x, y = list(box.lower), list(box.upper)
    for i in range(len(x)):
        while x[i] < y[i]:
            a = max(objective.marginal(x, i, 1), 0.0)
            b = max(objective.marginal(y, i, -1), 0.0)
            p = 1.0 if a + b == 0 else a / (a + b)
            if rng.random() <= p:
                x[i] += 1
            else:
                y[i] -= 1
            assert leq(box.lower, x) and leq(x, y) and leq(y, box.upper)
    return tuple(x)


def _run_length(pred, length: int, binary: bool) -> int:
    """Largest ``K <= length`` with ``pred(k)`` true for every ``k <= K``."""
    if not binary:
        k = 0
        while k < length and pred(k + 1):
            k += 1
        return k
    lo, hi = 0, length
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if pred(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _with(v: Sequence[int], i: int, value: int) -> Vector:
    return tuple(v[:i]) + (value,) + tuple(v[i + 1:])


def iterative_pruning(objective: LatticeObjective, bounds: Bounds, binary_search: bool = False) -> Box:
    """Shrink ``[0, b]`` to a box ``[g, h]`` that contains every maximiser.

    Per round and component: ``g(i)`` rises while the unit marginal taken
    on top of ``h`` (with its ``i``-th entry lowered to the candidate) is
    positive; ``h(i)`` falls to ``g(i)`` plus the number of non-negative
    marginals taken on top of ``g``.  Rounds repeat until neither vector
    moves.  For exactly dr-submodular objectives the iterates are nested;
    for noisy ones they are clamped to stay nested.
    """
    g, h = bounds.zero(), bounds.values
    trace = [(g, h)]
    while True:
        g_next, h_next = list(g), list(h)
        for i in range(bounds.d):
            span = h[i] - g[i]
            if span == 0:
                continue
            g_next[i] = g[i] + _run_length(
                lambda k: objective.marginal(_with(h, i, g[i] + k - 1), i, 1) > 0, span, binary_search)
            h_next[i] = g[i] + _run_length(
                lambda k: objective.marginal(_with(g, i, g[i] + k - 1), i, 1) >= 0, span, binary_search)
        g_next, h_next = tuple(g_next), tuple(h_next)
        nested = leq(g, g_next) and leq(g_next, h_next) and leq(h_next, h)
        if not nested:
            if objective.dr_exact:
                raise AssertionError(f"pruning iterates not nested: {g}->{g_next}, {h}->{h_next}")
            g_next = tuple(max(a, b) for a, b in zip(g, g_next))
            h_next = tuple(min(max(a, c), b) for a, b, c in zip(h_next, h, g_next))
        if g_next == g and h_next == h:
            return Box(g, h, tuple(trace))
        g, h = g_next, h_next
        trace.append((g, h))


def telescoping_steps(x: Sequence[int], y: Sequence[int]) -> list[int]:
    """Components of the unit steps from ``x`` to ``y``: all of ``z(1)``, then ``z(2)``, ..."""
    if not leq(x, y):
        raise ValueError("telescoping needs x <= y")
    return [i for i, (a, b) in enumerate(zip(x, y)) for _ in range(b - a)]


def telescoping_sum(objective: LatticeObjective, x: Sequence[int], y: Sequence[int]) -> float:
    """``f(x)`` plus the ordered unit marginals along the path to ``y``; equals ``f(y)``."""
    cur = as_vector(x)
    total = objective.value(cur)
    for i in telescoping_steps(x, y):
        total += objective.marginal(cur, i, 1)
        cur = add_unit(cur, i)
    return total


def greedy_climb(objective: LatticeObjective, bounds: Bounds) -> Vector:
    """Add the unit with the largest positive marginal until none is positive.

    Ties go to the lowest component index.
    """
    x = bounds.zero()
    for _ in range(bounds.l1):
        best, best_gain = -1, -math.inf
        for i in range(bounds.d):
            if x[i] < bounds[i]:
                gain = objective.marginal(x, i, 1)
                if gain > best_gain:
                    best, best_gain = i, gain
        if best < 0 or best_gain <= 0:
            break
        x = add_unit(x, best)
    return x


def random_climb(objective: LatticeObjective, bounds: Bounds, rng: np.random.Generator) -> Vector:
    """Add units of uniformly drawn components until a draw has non-positive gain."""
    x = bounds.zero()
    while True:
        open_ = [i for i in range(bounds.d) if x[i] < bounds[i]]
        if not open_:
            return x
        i = open_[int(rng.integers(len(open_)))]
        if objective.marginal(x, i, 1) <= 0:
            return x
        x = add_unit(x, i)


def baseline(kind: str, objective: LatticeObjective, bounds: Bounds, rng: np.random.Generator | None = None) -> Vector:
    if kind == "greedy":
        return greedy_climb(objective, bounds)
    if kind == "random":
        if rng is None:
            raise ValueError("the random baseline needs a random generator")
        return random_climb(objective, bounds, rng)
    raise ValueError(f"unknown baseline {kind!r}")


class OptLowerBoundError(ValueError):
    pass


def opt_estimation(
    collection: RRCollection,
    params: StrategyFunction,
    cost_model: CostModel,
    bounds: Bounds,
    eps1: float,
) -> float:
    """Lower bound on the optimal profit: greedy value on ``f_hat`` minus ``2 * eps1``."""
    obj = RISObjective(collection, params, cost_model, bounds)
    x = greedy_climb(obj, bounds)
    opt = obj.value(x) - 2 * eps1
    if opt <= 0:
        raise OptLowerBoundError(
            f"OPT lower bound nonpositive ({opt:.6g}); theta2/theta3 undefined")
    return opt


def _log_union(delta: float, bounds: Bounds) -> float:
    v = math.log(3 * delta * bounds.lattice_size)
    if v <= 0:
        raise ValueError("3 * delta * prod(b + 1) must exceed 1")
    return v


def theta1(n: int, bounds: Bounds, delta: float, eps1: float) -> int:
    if eps1 <= 0:
        raise ValueError("eps1 must be positive")
    return math.ceil(math.sqrt(n * n * _log_union(delta, bounds) / (2 * eps1 ** 2)))


def _theta23(n, bounds, delta, eps2, eps3, opt_lower) -> tuple[float, float]:
    if opt_lower <= 0:
        raise ValueError("opt_lower must be positive")
    if eps2 <= 0 or eps3 <= 0:
        raise ValueError("eps2 and eps3 must be positive")
    if 3 * delta <= 1:
        raise ValueError("3 * delta must exceed 1")
    t2 = n * (2 * n + eps2 ** 2 * opt_lower) * _log_union(delta, bounds) / (eps2 ** 2 * opt_lower ** 2)
    t3 = 2 * n * n * math.log(3 * delta) / (eps3 ** 2 * opt_lower ** 2)
    return t2, t3


def compute_sample_sizes(
    eps_split: tuple[float, float, float], delta: float, bounds: Bounds, n: int, opt_lower: float
) -> tuple[int, int, int]:
    """RR-set counts ``(theta1, theta2, theta3)``, each rounded up."""
    eps1, eps2, eps3 = eps_split
    t2, t3 = _theta23(n, bounds, delta, eps2, eps3, opt_lower)
    return theta1(n, bounds, delta, eps1), math.ceil(t2), math.ceil(t3)


def choose_eps_split(
    eps: float, eps1: float, delta: float, bounds: Bounds, n: int, opt_lower: float, points: int = 1000
) -> tuple[float, float]:
    """Pick ``eps2 = eps * k / points`` minimising ``max(theta2, theta3)``.

    ``eps3 = 2 * (eps - eps2)``; the endpoint ``eps2 = eps`` is excluded.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    best = None
    for k in range(1, points):
        e2 = eps * k / points
        e3 = 2 * (eps - e2)
        worst = max(_theta23(n, bounds, delta, e2, e3, opt_lower))
        if best is None or worst < best[0]:
            best = (worst, e2, e3)
    return best[1], best[2]


@dataclass(frozen=True)
class SamplingPlan:
    eps1: float
    eps2: float
    eps3: float
    eps: float
    delta: float
    theta1: int
    theta2: int
    theta3: int
    opt_lower: float

    def __post_init__(self):
        if min(self.eps1, self.eps2, self.eps3) <= 0:
            raise ValueError("all eps parameters must be positive")
        if abs(self.eps2 + 0.5 * self.eps3 - self.eps) > 1e-12:
            raise ValueError(f"eps2 + eps3/2 = {self.eps2 + 0.5 * self.eps3} differs from eps = {self.eps}")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @classmethod
    def build(cls, eps1, eps2, eps3, eps, delta, bounds: Bounds, n: int, opt_lower: float) -> "SamplingPlan":
        t1, t2, t3 = compute_sample_sizes((eps1, eps2, eps3), delta, bounds, n, opt_lower)
        return cls(eps1, eps2, eps3, eps, delta, t1, t2, t3, opt_lower)

    @property
    def theta(self) -> int:
        return max(self.theta1, self.theta2, self.theta3)


@dataclass
class RunReport:
    chosen_x: Vector
    objective_estimate: float
    condition_A: float
    condition_B: float
    guarantee_holds: bool
    wall_time: float
    theta_used: int
    rng_seed: int
    theta_required: int = 0
    capped: bool = False
    opt_lower: float = math.nan
    lower: Vector = ()
    upper: Vector = ()
    eps2: float = math.nan
    eps3: float = math.nan

    def row(self) -> dict:
        d = asdict(self)
        for k in ("chosen_x", "lower", "upper"):
            d[k] = " ".join(map(str, d[k]))
        return d

    def format(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.row().items())


def run_double_greedy(
    objective: LatticeObjective,
    rng: np.random.Generator,
    prune: bool = True,
) -> tuple[Vector, Box, float, float]:
    """Optionally prune, then run double greedy on the resulting box.

    Returns the solution, the box used and the conditions
    ``A = f(0) + f(b)`` and ``B = f(lower) + f(upper)``.
    """
    bounds = objective.bounds
    box = iterative_pruning(objective, bounds) if prune else Box.full(bounds)
    cond_a = objective.value(bounds.zero()) + objective.value(bounds.values)
    cond_b = objective.value(box.lower) + objective.value(box.upper)
    return double_greedy(objective, box, rng), box, cond_a, cond_b


@dataclass
class PlannedCollection:
    """The RR-sets sized by the sampling plan, plus how they were sized."""

    collection: RRCollection
    theta_required: int
    capped: bool
    opt_lower: float
    eps2: float
    eps3: float


def plan_collection(
    model: TriggeringModel,
    params: StrategyFunction,
    cost_model: CostModel,
    bounds: Bounds,
    rngs: tuple[np.random.Generator, np.random.Generator],
    eps: float = 0.15,
    eps1: float = 0.1,
    delta: float = 10.0,
    theta_cap: int | None = None,
    eps_split: tuple[float, float] | None = None,
    method: str = "auto",
) -> PlannedCollection:
    """Estimate the OPT lower bound on ``theta1`` sets, then draw ``max(theta1, theta2, theta3)``.

    ``eps_split`` fixes ``(eps2, eps3)``; otherwise the split minimising
    ``max(theta2, theta3)`` is used.  A cap applies to both draws.
    """
    n = model.n
    t1 = theta1(n, bounds, delta, eps1)
    t1_capped = theta_cap is not None and t1 > theta_cap
    if t1_capped:
        t1 = theta_cap
    first = generate_collection(model, t1, rngs[0], method)
    opt_lower = opt_estimation(first, params, cost_model, bounds, eps1)
    if eps_split is None:
        eps2, eps3 = choose_eps_split(eps, eps1, delta, bounds, n, opt_lower)
    else:
        eps2, eps3 = eps_split
    plan = SamplingPlan.build(eps1, eps2, eps3, eps, delta, bounds, n, opt_lower)
    theta = plan.theta
    if theta_cap is not None and theta > theta_cap:
        log.warning("theta=%d exceeds cap %d; theoretical guarantee void", theta, theta_cap)
        theta = theta_cap
    coll = generate_collection(model, theta, rngs[1], method)
    capped = t1_capped or theta < plan.theta
    return PlannedCollection(coll, plan.theta, capped, opt_lower, eps2, eps3)


def dg_ip_ris(
    model: TriggeringModel,
    params: StrategyFunction,
    cost_model: CostModel,
    bounds: Bounds,
    eps: float = 0.15,
    eps1: float = 0.1,
    delta: float = 10.0,
    seed: int = 0,
    theta_cap: int | None = None,
    eps_split: tuple[float, float] | None = None,
    heuristic: bool = False,
    prune: bool = True,
    method: str = "auto",
) -> RunReport:
    """Double greedy with iterative pruning on the RR-set estimator.

    The collection comes from :func:`plan_collection`; the estimator on it
    is pruned (unless ``prune`` is off) and then optimised.  With a cap in
    force the guarantee flag is only kept in ``heuristic`` mode.
    """
    start = time.perf_counter()
    s_opt, s_main, s_dg = np.random.SeedSequence(seed).spawn(3)
    pc = plan_collection(
        model, params, cost_model, bounds, (np.random.default_rng(s_opt), np.random.default_rng(s_main)),
        eps, eps1, delta, theta_cap, eps_split, method)
    obj = RISObjective(pc.collection, params, cost_model, bounds)
    x, box, cond_a, cond_b = run_double_greedy(obj, np.random.default_rng(s_dg), prune)
    cond = cond_b if prune else cond_a
    holds = cond >= 0 and (not pc.capped or heuristic)
    return RunReport(
        chosen_x=x,
        objective_estimate=obj.value(x),
        condition_A=cond_a,
        condition_B=cond_b,
        guarantee_holds=holds,
        wall_time=time.perf_counter() - start,
        theta_used=pc.collection.theta,
        rng_seed=seed,
        theta_required=pc.theta_required,
        capped=pc.capped,
        opt_lower=pc.opt_lower,
        lower=box.lower,
        upper=box.upper,
        eps2=pc.eps2,
        eps3=pc.eps3,
    )
