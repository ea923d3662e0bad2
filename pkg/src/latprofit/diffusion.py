"""Forward diffusion and Monte-Carlo estimation of spread and profit.

Simulations are batched: a block of realizations is drawn as a boolean
``(samples, m)`` live-arc mask and activation is pushed through all of
them at once, one BFS layer per step, until every frontier is empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import Graph, ModelKind, TriggeringModel, draw_uniforms, live_from_uniforms, sample_live_arcs
from .strategy import CostModel, StrategyFunction, cost

# cap on samples * arcs per simulated block (bool entries)
BLOCK_CELLS = 1 << 22


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    samples: int
    std_error: float
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("an estimate needs at least one sample")

    @classmethod
    def from_values(cls, values: np.ndarray, keep: bool = False) -> "SpreadEstimate":
        values = np.asarray(values, dtype=float)
        r = len(values)
        se = float(values.std(ddof=1) / math.sqrt(r)) if r > 1 else 0.0
        return cls(float(values.mean()), r, se, values if keep else None)


def _block_size(graph: Graph) -> int:
    return max(1, BLOCK_CELLS // max(graph.m, graph.n, 1))


def gather_csr(ptr: np.ndarray, entries: np.ndarray, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate the CSR rows ``keys``; also return each row's length."""
    starts = ptr[keys]
    lens = ptr[keys + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=entries.dtype), lens
    offs = np.repeat(starts - (np.cumsum(lens) - lens), lens)
    return entries[np.arange(total) + offs], lens


def spread(graph: Graph, live: np.ndarray, active: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Close ``active`` (``(samples, n)`` bool, updated in place) under live arcs.

    Works one BFS layer at a time over all samples: the frontier's
    (sample, node) pairs are expanded along their arcs and only live arcs
    to inactive nodes survive.  With ``reverse`` arcs are followed head to
    tail, collecting the nodes that can reach the initial set.
    """
    if graph.m == 0:
        return active
    if reverse:
        ptr, arcs, nxt = graph.in_ptr, graph.in_arc, graph.src
    else:
        ptr, arcs, nxt = graph.out_ptr, graph.out_arc, graph.dst
    n = graph.n
    rows, nodes = np.nonzero(active)
    while rows.size:
        arc_ids, lens = gather_csr(ptr, arcs, nodes)
        rows = np.repeat(rows, lens)
        ok = live[rows, arc_ids]
        rows, nodes = rows[ok], nxt[arc_ids[ok]]
        fresh = ~active[rows, nodes]
        key = np.unique(rows[fresh] * n + nodes[fresh])
        rows, nodes = key // n, key % n
        active[rows, nodes] = True
    return active


def _seed_mask(n: int, seeds) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    seeds = np.asarray(list(seeds) if not isinstance(seeds, np.ndarray) else seeds, dtype=np.int64)
    if seeds.size and (seeds.min() < 0 or seeds.max() >= n):
        raise ValueError("seed outside the node range")
    mask[seeds] = True
    return mask


def simulate_counts(model: TriggeringModel, seeds, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Spread sizes ``I_g(S)`` for ``samples`` fresh realizations."""
    g = model.graph
    mask = _seed_mask(g.n, seeds)
    out = np.empty(samples, dtype=np.int64)
    block = _block_size(g)
    for lo in range(0, samples, block):
        k = min(block, samples - lo)
        live = sample_live_arcs(model, k, rng)
        active = np.broadcast_to(mask, (k, g.n)).copy()
        out[lo:lo + k] = spread(g, live, active).sum(axis=1)
    return out


def diffuse_once(model: TriggeringModel, seeds, rng: np.random.Generator) -> int:
    """Number of nodes reached from ``seeds`` in one sampled realization."""
    return int(simulate_counts(model, seeds, 1, rng)[0])


def estimate_sigma(
    model: TriggeringModel, seeds, samples: int, rng: np.random.Generator, keep_values: bool = False
) -> SpreadEstimate:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return SpreadEstimate.from_values(simulate_counts(model, seeds, samples, rng), keep_values)


@dataclass(frozen=True, eq=False)
class ConstructedGraph:
    """Base graph plus one pseudo node ``u + n`` per node and an arc ``(u + n, u)``.

    The pseudo arc of ``u`` is live with probability ``h_u(x)``; seeding
    every pseudo node reproduces random seed selection inside an ordinary
    diffusion.
    """

    graph: Graph
    model: TriggeringModel
    pseudo_seeds: np.ndarray
    base_n: int


def build_constructed_graph(
    model: TriggeringModel, params: StrategyFunction, x: Sequence[int]
) -> ConstructedGraph:
    g = model.graph
    n = g.n
    h = params.probabilities(x)
    if len(h) != n:
        raise ValueError("strategy and graph disagree on the node count")
    pseudo = np.arange(n, 2 * n)
    src = np.concatenate([g.src, pseudo])
    dst = np.concatenate([g.dst, np.arange(n)])
    labels = np.concatenate([g.labels, -1 - g.labels])
    big = Graph.from_arcs(2 * n, src, dst, labels)
    weight = np.concatenate([model.weight, h])
    independent = np.concatenate([model.independent, np.ones(n, dtype=bool)])
    if model.kind is ModelKind.IC:
        tm = TriggeringModel.ic(big, weight)
    else:
        tm = TriggeringModel.lt(big, weight, independent)
    return ConstructedGraph(big, tm, pseudo, n)


def estimate_mu_mc(
    model: TriggeringModel,
    params: StrategyFunction,
    x: Sequence[int],
    samples: int,
    rng: np.random.Generator,
    keep_values: bool = False,
) -> SpreadEstimate:
    """Expected spread of ``x`` via the constructed graph: sigma(pseudo seeds) - n."""
    cg = build_constructed_graph(model, params, x)
    counts = simulate_counts(cg.model, cg.pseudo_seeds, samples, rng)
    return SpreadEstimate.from_values(counts - cg.base_n, keep_values)


def estimate_profit_mc(
    model: TriggeringModel,
    params: StrategyFunction,
    cost_model: CostModel,
    x: Sequence[int],
    samples: int,
    rng: np.random.Generator,
    keep_values: bool = False,
) -> SpreadEstimate:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    mu = estimate_mu_mc(model, params, x, samples, rng, keep_values=True)
    return SpreadEstimate.from_values(mu.values - cost(cost_model, x), keep_values)


class ProfitSimulator:
    """Constructed-graph profit estimates that reuse one set of random draws.

    The uniforms behind ``samples`` realizations of the constructed graph
    are drawn once from ``seed``.  Base-arc liveness does not depend on
    ``x``, so only the pseudo arcs are re-thresholded per query.  Results
    equal ``estimate_profit_mc(..., rng=np.random.default_rng(seed))``.
    """

    def __init__(self, model: TriggeringModel, params: StrategyFunction, cost_model: CostModel,
                 samples: int, seed: int):
        if samples < 1:
            raise ValueError("samples must be >= 1")
        self.params, self.cost_model, self.samples, self.seed = params, cost_model, samples, seed
        self.cg = build_constructed_graph(model, params, (0,) * params.d)
        rng = np.random.default_rng(seed)
        m = model.graph.m
        self._blocks = []
        block = _block_size(self.cg.graph)
        for lo in range(0, samples, block):
            k = min(block, samples - lo)
            u, t = draw_uniforms(self.cg.model, k, rng)
            live = live_from_uniforms(self.cg.model, u, t)
            self._blocks.append((live, u[:, m:].copy()))

    def estimate(self, x: Sequence[int], keep_values: bool = False) -> SpreadEstimate:
        cg = self.cg
        n, m = cg.base_n, cg.graph.m - cg.base_n
        h = self.params.probabilities(x)
        counts = []
        for live0, v in self._blocks:
            live = live0.copy()
            live[:, m:] = v < h
            active = np.zeros((len(v), cg.graph.n), dtype=bool)
            active[:, cg.pseudo_seeds] = True
            counts.append(spread(cg.graph, live, active).sum(axis=1) - n)
        values = np.concatenate(counts) - cost(self.cost_model, x)
        return SpreadEstimate.from_values(values, keep_values)


def estimate_profit_two_stage(
    model: TriggeringModel,
    params: StrategyFunction,
    cost_model: CostModel,
    x: Sequence[int],
    samples: int,
    rng: np.random.Generator,
) -> SpreadEstimate:
    """Profit estimate that draws a seed set first and then diffuses from it."""
    g = model.graph
    h = params.probabilities(x)
    values = np.empty(samples)
    block = _block_size(g)
    for lo in range(0, samples, block):
        k = min(block, samples - lo)
        seeds = rng.random((k, g.n)) < h
        live = sample_live_arcs(model, k, rng)
        values[lo:lo + k] = spread(g, live, seeds).sum(axis=1)
    return SpreadEstimate.from_values(values - cost(cost_model, x))


def required_mc_samples(n: int, h_sum: float, gamma: float, delta: float) -> int:
    """Simulations needed for a (gamma, delta) estimate of the expected spread.

    Uses ``r >= n^2 ln(2/delta) / (2 (gamma * sum_u h_u(x))^2)``.
    """
    if h_sum <= 0:
        raise ValueError("sample-count rule undefined at x=0 (sum of h_u is zero)")
    if gamma <= 0 or not 0 < delta < 1:
        raise ValueError("need gamma > 0 and delta in (0, 1)")
    return math.ceil(n * n * math.log(2.0 / delta) / (2.0 * (gamma * h_sum) ** 2))
