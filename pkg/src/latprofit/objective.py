"""Lattice objective handles shared by the optimizers.

Every handle exposes ``value(x)`` and ``marginal(x, i, direction)`` with
``marginal(x, i, +1) = f(x + e_i) - f(x)`` and
``marginal(x, i, -1) = f(x - e_i) - f(x)``.  Repeated queries at the same
point return identical values for the lifetime of the handle.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Callable, Sequence

import numpy as np

from .diffusion import ProfitSimulator
from .graph import TriggeringModel
from .rrset import CoverageState, RRCollection
from .strategy import Bounds, CostModel, StrategyFunction, Vector, add_unit, as_vector


class LatticeObjective:
    #: True when the handle is exactly dr-submodular (no sampling noise)
    dr_exact = True

    def __init__(self, bounds: Bounds):
        self.bounds = bounds
        self.calls = 0

    @property
    def d(self) -> int:
        return self.bounds.d

    def _value(self, x: Vector) -> float:
        raise NotImplementedError

    def value(self, x: Sequence[int]) -> float:
        x = as_vector(x)
        if not self.bounds.contains(x):
            raise IndexError(f"{x} lies outside the box [0, {self.bounds.values}]")
        self.calls += 1
        return self._value(x)

    __call__ = value

    def marginal(self, x: Sequence[int], i: int, direction: int = 1) -> float:
        x = as_vector(x)
        return self.value(add_unit(x, i, direction)) - self.value(x)


class FunctionObjective(LatticeObjective):
    """Wrap a plain callable; values are memoised per point."""

    def __init__(self, fn: Callable[[Vector], float], bounds: Bounds, dr_exact: bool = True):
        super().__init__(bounds)
        self.fn = fn
        self.dr_exact = dr_exact
        self._cache: dict[Vector, float] = {}

    def _value(self, x):
        v = self._cache.get(x)
        if v is None:
            v = self._cache[x] = float(self.fn(x))
        return v


def modular(weights: Sequence[float], bounds: Bounds) -> FunctionObjective:
    w = tuple(float(v) for v in weights)
    return FunctionObjective(lambda x: sum(a * b for a, b in zip(w, x)), bounds)


class MonteCarloObjective(LatticeObjective):
    """Profit estimated by forward simulation on the constructed graph.

    Every point is simulated with the same seed (common random numbers),
    which makes the estimate a deterministic function of ``x`` and keeps
    differences between neighbouring points low-variance.
    """

    dr_exact = False

    def __init__(
        self,
        model: TriggeringModel,
        params: StrategyFunction,
        cost_model: CostModel,
        bounds: Bounds,
        samples: int = 2000,
        seed: int = 0,
    ):
        super().__init__(bounds)
        self.model, self.params, self.cost_model = model, params, cost_model
        self.samples, self.seed = samples, seed
        self._cache: dict[Vector, float] = {}
        self._sim: ProfitSimulator | None = None

    @property
    def simulator(self) -> ProfitSimulator:
        if self._sim is None:
            self._sim = ProfitSimulator(self.model, self.params, self.cost_model, self.samples, self.seed)
        return self._sim

    def estimate(self, x: Sequence[int], keep_values: bool = False):
        return self.simulator.estimate(x, keep_values)

    def _value(self, x):
        v = self._cache.get(x)
        if v is None:
            v = self._cache[x] = self.estimate(x).mean
        return v


class RISObjective(LatticeObjective):
    """The RR-set estimator ``f_hat(R, .)`` for a fixed collection ``R``.

    Coverage states for recently queried points are kept; a query one
    unit away from a cached point is answered by copying that state and
    committing one move.
    """

    def __init__(
        self,
        collection: RRCollection,
        params: StrategyFunction,
        cost_model: CostModel,
        bounds: Bounds,
        cache_size: int = 8,
    ):
        super().__init__(bounds)
        self.collection, self.params, self.cost_model = collection, params, cost_model
        self.cache_size = cache_size
        self._states: OrderedDict[Vector, CoverageState] = OrderedDict()

    def state(self, x: Sequence[int]) -> CoverageState:
        x = as_vector(x)
        st = self._states.get(x)
        if st is not None:
            self._states.move_to_end(x)
            return st
        for y, near in reversed(self._states.items()):
            diff = [a - b for a, b in zip(x, y)]
            if sum(map(abs, diff)) == 1:
                i = next(k for k, v in enumerate(diff) if v)
                st = near.copy()
                st.commit(i, diff[i])
                break
        else:
            st = CoverageState(self.collection, self.params, self.cost_model, x, self.bounds)
        self._states[x] = st
        if len(self._states) > self.cache_size:
            self._states.popitem(last=False)
        return st

    def _value(self, x):
        return self.state(x).value

    def marginal(self, x, i, direction=1):
        self.calls += 1
        return self.state(x).marginal_gain(i, direction)
