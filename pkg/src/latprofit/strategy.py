"""Marketing vectors, seed-activation strategies and the linear cost model."""

from __future__ import annotations

import csv
import itertools
import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

Vector = tuple[int, ...]


def as_vector(x: Sequence[int]) -> Vector:
    v = tuple(int(t) for t in x)
    if any(t < 0 for t in v):
        raise ValueError(f"marketing vector has a negative component: {v}")
    return v


def unit(d: int, i: int, k: int = 1) -> Vector:
    return tuple(k if j == i else 0 for j in range(d))


def add_unit(x: Vector, i: int, k: int = 1) -> Vector:
    return x[:i] + (x[i] + k,) + x[i + 1:]


def leq(x: Sequence[int], y: Sequence[int]) -> bool:
    return all(a <= b for a, b in zip(x, y))


@dataclass(frozen=True)
class Bounds:
    """Upper corner ``b`` of the search lattice ``{x : 0 <= x <= b}``."""

    values: Vector

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if not self.values or any(v < 1 for v in self.values):
            raise ValueError(f"bounds must be positive integers, got {self.values}")

    @classmethod
    def uniform(cls, d: int, b: int) -> "Bounds":
        return cls((b,) * d)

    @property
    def d(self) -> int:
        return len(self.values)

    @property
    def l1(self) -> int:
        return sum(self.values)

    @property
    def lattice_size(self) -> int:
        return math.prod(v + 1 for v in self.values)

    def zero(self) -> Vector:
        return (0,) * self.d

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and all(0 <= a <= b for a, b in zip(x, self.values))

    def points(self) -> Iterator[Vector]:
        return itertools.product(*(range(v + 1) for v in self.values))

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return self.d

    def __getitem__(self, i):
        return self.values[i]


class StrategyFunction:
    """Maps a marketing vector to per-node seeding probabilities.

    Subclasses must keep every ``h_u`` monotone and dr-submodular in ``x``.
    Implementations whose survival ``1 - h_u(x)`` factorises into one term
    per invested unit may also provide :meth:`unit_factors`, which enables
    O(1) multiplicative updates in the RR-set estimator.
    """

    n: int
    d: int

    def probabilities(self, x: Sequence[int]) -> np.ndarray:
        raise NotImplementedError

    def unit_factors(self, i: int, j: int) -> np.ndarray | None:
        return None


@dataclass(frozen=True, eq=False)
class StrategyParams(StrategyFunction):
    """Geometric-attenuation strategy.

    Unit ``j`` (1-based) of action ``i`` independently seeds node ``u``
    with probability ``eta**(j-1) * r[u, i]``, so

        h_u(x) = 1 - prod_i prod_{j=1..x(i)} (1 - eta**(j-1) * r[u, i]).
    """

    r: np.ndarray
    eta: float

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        if r.ndim != 2:
            raise ValueError("r must be an n x d matrix")
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("r values must lie in [0, 1]")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return self.r.shape[0]

    @property
    def d(self) -> int:
        return self.r.shape[1]

    def unit_factors(self, i: int, j: int) -> np.ndarray:
        """Survival factor contributed by the ``j``-th unit of action ``i``."""
        return 1.0 - self.eta ** (j - 1) * self.r[:, i]

    def survival(self, x: Sequence[int]) -> np.ndarray:
        s = np.ones(self.n)
        for i, k in enumerate(x):
            for j in range(1, k + 1):
                s *= self.unit_factors(i, j)
        return s

    def probabilities(self, x: Sequence[int]) -> np.ndarray:
        if len(x) != self.d:
            raise ValueError(f"expected a {self.d}-dimensional vector")
        return 1.0 - self.survival(x)


def seed_probability(params: StrategyFunction, u: int, x: Sequence[int]) -> float:
    return float(params.probabilities(x)[u])


def seed_probabilities(params: StrategyFunction, x: Sequence[int]) -> np.ndarray:
    return params.probabilities(x)


def sample_seed_set(params: StrategyFunction, x: Sequence[int], rng: np.random.Generator) -> np.ndarray:
    """Select every node independently with probability ``h_u(x)``."""
    h = params.probabilities(x)
    return np.flatnonzero(rng.random(len(h)) < h)


PAPER_RANGES = ((0.0, 0.1), (0.0, 0.05), (0.0, 0.1), (0.0, 0.05), (0.0, 0.05))


def sample_random_strategy_params(
    n: int,
    d: int,
    ranges: Sequence[tuple[float, float]] = PAPER_RANGES,
    eta: float = 0.8,
    rng: np.random.Generator | None = None,
) -> StrategyParams:
    """Draw ``r[u, i]`` uniformly from ``ranges[i]`` for every node and action."""
    if len(ranges) != d:
        raise ValueError(f"need one range per action ({d}), got {len(ranges)}")
    for lo, hi in ranges:
        if not 0 <= lo <= hi <= 1:
            raise ValueError(f"invalid range [{lo}, {hi}]")
    rng = np.random.default_rng() if rng is None else rng
    lo = np.array([a for a, _ in ranges])
    hi = np.array([b for _, b in ranges])
    r = lo + (hi - lo) * rng.random((n, d))
    return StrategyParams(r, eta)


def write_strategy_csv(params: StrategyParams, path: str | os.PathLike) -> None:
    """Persist the nonzero entries of ``r`` as ``node,action,r`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "action", "r"])
        for u, i in zip(*np.nonzero(params.r)):
            w.writerow([int(u), int(i), repr(float(params.r[u, i]))])


def read_strategy_csv(path: str | os.PathLike, n: int, d: int, eta: float) -> StrategyParams:
    """Load ``r`` from CSV; pairs that are not listed default to 0."""
    r = np.zeros((n, d))
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        if rows.fieldnames != ["node", "action", "r"]:
            raise ValueError(f"{path}: expected header node,action,r")
        for lineno, row in enumerate(rows, 2):
            try:
                u, i, val = int(row["node"]), int(row["action"]), float(row["r"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: malformed row {row}") from None
            if not (0 <= u < n and 0 <= i < d):
                raise ValueError(f"{path}:{lineno}: node/action out of range")
            r[u, i] = val
    return StrategyParams(r, eta)


@dataclass(frozen=True)
class CostModel:
    """Linear cost ``c(x) = sum_i unit_costs[i] * x(i)``."""

    unit_costs: tuple[float, ...]

    def __post_init__(self):
        costs = tuple(float(c) for c in self.unit_costs)
        if any(c < 0 for c in costs):
            raise ValueError("unit costs must be non-negative")
        object.__setattr__(self, "unit_costs", costs)

    @classmethod
    def from_lambda(cls, lam: float, n: int, bounds: Bounds | Sequence[int]) -> "CostModel":
        """Uniform unit cost ``lam * n / ||b||_1`` for every action."""
        b = tuple(bounds)
        return cls((lam * n / sum(b),) * len(b))

    @classmethod
    def zero(cls, d: int) -> "CostModel":
        return cls((0.0,) * d)

    def __call__(self, x: Sequence[int]) -> float:
        return cost(self, x)


def cost(model: CostModel, x: Sequence[int]) -> float:
    if len(x) != len(model.unit_costs):
        raise ValueError("dimension mismatch between cost model and vector")
    return float(sum(c * k for c, k in zip(model.unit_costs, x)))
