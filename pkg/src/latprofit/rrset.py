"""Reverse-reachable sets and the lattice profit estimator built on them.

For a collection of ``theta`` RR-sets the estimator is

    f_hat(x) = n / theta * sum_R (1 - prod_{u in R} (1 - h_u(x))) - c(x)

:class:`CoverageState` keeps the per-node and per-set survival products
for one ``x`` so that moving a single component by one unit costs time
proportional to the RR-set memberships of the nodes whose ``h_u`` moves.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diffusion import BLOCK_CELLS, gather_csr, spread
from .graph import ModelKind, TriggeringModel, sample_live_arcs
from .strategy import Bounds, CostModel, StrategyFunction, Vector, add_unit, as_vector, cost

@dataclass(frozen=True, eq=False)
class RRSet:
    root: int
    nodes: np.ndarray

    def __post_init__(self):
        if self.root not in set(self.nodes.tolist()):
            raise ValueError("an RR-set must contain its root")

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, u):
        return u in set(self.nodes.tolist())


def generate_rr_set(model: TriggeringModel, rng: np.random.Generator, root: int | None = None) -> RRSet:
    """Reverse BFS from a uniform root, deciding arc liveness lazily.

    Each visited node draws its incoming live arcs exactly once: IC arcs
    by independent coins, LT arcs by one uniform matched against the
    cumulative in-weights (at most one live arc).
    """
    g = model.graph
    if root is None:
        root = int(rng.integers(g.n))
    lo = hi = None
    if model.kind is ModelKind.LT:
        lo, hi = model.lt_intervals()
    return RRSet(root, np.array(sorted(_reverse_bfs(model, root, rng, lo, hi)), dtype=np.int64))


def _reverse_bfs(model, root, rng, lo, hi) -> set[int]:
    g = model.graph
    src, w, ind = g.src, model.weight, model.independent
    in_ptr, in_arc = g.in_ptr, g.in_arc
    lt = lo is not None
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        a, b = in_ptr[v], in_ptr[v + 1]
        if a == b:
            continue
        arcs = in_arc[a:b]
        if lt:
            t = rng.random()
            live = np.where(ind[arcs], rng.random(b - a) < w[arcs], (lo[arcs] <= t) & (t < hi[arcs]))
        else:
            live = rng.random(b - a) < w[arcs]
        for u in src[arcs[live]].tolist():
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


class RRCollection:
    """A multiset of RR-sets stored as CSR arrays.

    ``members[ptr[k]:ptr[k+1]]`` are the (sorted) nodes of set ``k``.
    The node-to-set membership index is built on first use.
    """

    def __init__(self, n: int, roots, ptr, members):
        self.n = int(n)
        self.roots = np.asarray(roots, dtype=np.int64)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.members = np.asarray(members, dtype=np.int64)
        if len(self.ptr) != len(self.roots) + 1 or self.ptr[0] != 0 or self.ptr[-1] != len(self.members):
            raise ValueError("inconsistent RR collection layout")
        if np.any(np.diff(self.ptr) < 1):
            raise ValueError("RR-sets cannot be empty")
        self._membership: tuple[np.ndarray, np.ndarray] | None = None
        self._member_set: np.ndarray | None = None

    @property
    def theta(self) -> int:
        return len(self.roots)

    def __len__(self):
        return self.theta

    def __getitem__(self, k: int) -> RRSet:
        return RRSet(int(self.roots[k]), self.members[self.ptr[k]:self.ptr[k + 1]])

    def __iter__(self):
        return (self[k] for k in range(self.theta))

    @property
    def member_set(self) -> np.ndarray:
        """Set index of every entry of ``members``."""
        if self._member_set is None:
            self._member_set = np.repeat(np.arange(self.theta), np.diff(self.ptr))
        return self._member_set

    @property
    def node_membership(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR ``(node_ptr, entry_index)``: entries of ``members`` per node."""
        if self._membership is None:
            order = np.argsort(self.members, kind="stable")
            node_ptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.members, minlength=self.n), out=node_ptr[1:])
            self._membership = (node_ptr, order)
        return self._membership

    def sets_containing(self, u: int) -> np.ndarray:
        node_ptr, entries = self.node_membership
        return self.member_set[entries[node_ptr[u]:node_ptr[u + 1]]]

    @classmethod
    def from_sets(cls, n: int, sets: Sequence[RRSet]) -> "RRCollection":
        roots = [s.root for s in sets]
        sizes = [len(s.nodes) for s in sets]
        ptr = np.zeros(len(sets) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        members = np.concatenate([np.sort(s.nodes) for s in sets]) if sets else np.zeros(0, dtype=np.int64)
        return cls(n, roots, ptr, members)

    @classmethod
    def concat(cls, parts: Sequence["RRCollection"]) -> "RRCollection":
        n = parts[0].n
        roots = np.concatenate([p.roots for p in parts])
        sizes = np.concatenate([np.diff(p.ptr) for p in parts])
        ptr = np.zeros(len(roots) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        return cls(n, roots, ptr, np.concatenate([p.members for p in parts]))

    def split(self, parts: int) -> list["RRCollection"]:
        """Cut into ``parts`` consecutive sub-collections of equal size."""
        if self.theta % parts:
            raise ValueError("theta must be divisible by the number of parts")
        k = self.theta // parts
        out = []
        for j in range(parts):
            p = self.ptr[j * k:(j + 1) * k + 1]
            out.append(RRCollection(self.n, self.roots[j * k:(j + 1) * k], p - p[0], self.members[p[0]:p[-1]]))
        return out

    def write(self, path: str | os.PathLike) -> None:
        """One set per line: the root, then the remaining members."""
        with open(path, "w") as fh:
            fh.write(f"# n={self.n} theta={self.theta}\n")
            for s in self:
                rest = [u for u in s.nodes.tolist() if u != s.root]
                fh.write(" ".join(map(str, [s.root, *rest])) + "\n")

    @classmethod
    def read(cls, path: str | os.PathLike, n: int | None = None) -> "RRCollection":
        sets = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("#"):
                    if n is None and "n=" in line:
                        n = int(line.split("n=")[1].split()[0])
                    continue
                if line:
                    ids = [int(t) for t in line.split()]
                    sets.append(RRSet(ids[0], np.array(sorted(set(ids)), dtype=np.int64)))
        if n is None:
            raise ValueError("node count missing from RR collection file")
        return cls.from_sets(n, sets)


def _batch_rr_sets(model: TriggeringModel, count: int, rng: np.random.Generator) -> RRCollection:
    g = model.graph
    roots = rng.integers(g.n, size=count)
    block = max(1, BLOCK_CELLS // max(g.m, g.n, 1))
    parts = []
    for lo in range(0, count, block):
        r = roots[lo:lo + block]
        k = len(r)
        live = sample_live_arcs(model, k, rng)
        active = np.zeros((k, g.n), dtype=bool)
        active[np.arange(k), r] = True
        spread(g, live, active, reverse=True)
        rows, cols = np.nonzero(active)
        ptr = np.zeros(k + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=k), out=ptr[1:])
        parts.append(RRCollection(g.n, r, ptr, cols))
    return RRCollection.concat(parts)


def _lazy_rr_sets(model: TriggeringModel, count: int, rng: np.random.Generator) -> RRCollection:
    g = model.graph
    roots = rng.integers(g.n, size=count)
    lo = hi = None
    if model.kind is ModelKind.LT:
        lo, hi = model.lt_intervals()
    members: list[int] = []
    sizes = np.empty(count, dtype=np.int64)
    for k, root in enumerate(roots.tolist()):
        s = sorted(_reverse_bfs(model, root, rng, lo, hi))
        sizes[k] = len(s)
        members.extend(s)
    ptr = np.zeros(count + 1, dtype=np.int64)
    np.cumsum(sizes, out=ptr[1:])
    return RRCollection(g.n, roots, ptr, np.array(members, dtype=np.int64))


def _frontier_rr_sets(model: TriggeringModel, count: int, rng: np.random.Generator) -> RRCollection:
    """Many lazy reverse BFS runs advanced together, one layer at a time.

    Every (set, node) pair is expanded once, drawing its in-arcs exactly
    as :func:`generate_rr_set` does, so the distribution is unchanged.
    """
    g = model.graph
    n = g.n
    roots = rng.integers(n, size=count)
    lt = model.kind is ModelKind.LT
    if lt:
        lo_w, hi_w = model.lt_intervals()
    w, ind = model.weight, model.independent
    block = max(1, BLOCK_CELLS // max(n, 1))
    parts = []
    for start in range(0, count, block):
        r = roots[start:start + block]
        k = len(r)
        seen = np.zeros((k, n), dtype=bool)
        rows, nodes = np.arange(k), r.copy()
        seen[rows, nodes] = True
        while rows.size:
            arcs, lens = gather_csr(g.in_ptr, g.in_arc, nodes)
            if arcs.size == 0:
                break
            if lt:
                t = np.repeat(rng.random(rows.size), lens)
                coin = rng.random(arcs.size)
                live = np.where(ind[arcs], coin < w[arcs], (lo_w[arcs] <= t) & (t < hi_w[arcs]))
            else:
                live = rng.random(arcs.size) < w[arcs]
            rows = np.repeat(rows, lens)[live]
            nodes = g.src[arcs[live]]
            fresh = ~seen[rows, nodes]
            key = np.unique(rows[fresh] * n + nodes[fresh])
            rows, nodes = key // n, key % n
            seen[rows, nodes] = True
        rows, cols = np.nonzero(seen)
        ptr = np.zeros(k + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=k), out=ptr[1:])
        parts.append(RRCollection(n, r, ptr, cols))
    return RRCollection.concat(parts)


def generate_collection(
    model: TriggeringModel, theta: int, rng: np.random.Generator, method: str = "auto"
) -> RRCollection:
    """Draw ``theta`` independent RR-sets.

    ``method`` is ``"lazy"`` (per-set reverse BFS), ``"frontier"`` (the
    same lazy search vectorised over a block of sets), ``"batch"`` (whole
    realizations sampled in blocks, reverse closure vectorised) or
    ``"auto"``.  All produce the same distribution.
    """
    if theta < 1:
        raise ValueError("theta must be >= 1")
    if method == "auto":
        method = "frontier"
    if method == "batch":
        return _batch_rr_sets(model, theta, rng)
    if method == "lazy":
        return _lazy_rr_sets(model, theta, rng)
    if method == "frontier":
        return _frontier_rr_sets(model, theta, rng)
    raise ValueError(f"unknown RR generation method {method!r}")


def coverage_probability(rr: RRSet, params: StrategyFunction, x: Sequence[int]) -> float:
    """``p(R, x) = 1 - prod_{u in R} (1 - h_u(x))``."""
    h = params.probabilities(x)
    return float(1.0 - np.prod(1.0 - h[rr.nodes]))


def set_survival(collection: RRCollection, h: np.ndarray) -> np.ndarray:
    return np.multiply.reduceat((1.0 - h)[collection.members], collection.ptr[:-1])


def estimate_f_hat(
    collection: RRCollection, params: StrategyFunction, cost_model: CostModel, x: Sequence[int]
) -> float:
    """Evaluate the RR-set profit estimator from scratch."""
    h = params.probabilities(x)
    covered = np.sum(1.0 - set_survival(collection, h))
    return collection.n / collection.theta * float(covered) - cost(cost_model, x)


class CoverageState:
    """Incremental form of :func:`estimate_f_hat` at a single point ``x``.

    Survival products are stored factored as (number of zero factors,
    product of nonzero factors) per node and per set, so removing a unit
    whose factor is zero (``r = 1``) never divides by zero.
    """

    def __init__(
        self,
        collection: RRCollection,
        params: StrategyFunction,
        cost_model: CostModel,
        x: Sequence[int],
        bounds: Bounds | None = None,
    ):
        self.collection = collection
        self.params = params
        self.cost_model = cost_model
        self.bounds = bounds
        self.x: Vector = as_vector(x)
        if len(self.x) != params.d:
            raise ValueError("dimension mismatch")
        if bounds is not None and not bounds.contains(self.x):
            raise ValueError(f"{self.x} lies outside the bounds {bounds.values}")
        self._factored = params.unit_factors(0, 1) is not None
        self.rebuild()

    def rebuild(self) -> None:
        p, n = self.params, self.collection.n
        if self._factored:
            zero = np.zeros(n, dtype=np.int64)
            prod = np.ones(n)
            for i, k in enumerate(self.x):
                for j in range(1, k + 1):
                    f = p.unit_factors(i, j)
                    z = f == 0
                    zero += z
                    prod *= np.where(z, 1.0, f)
        else:
            s = 1.0 - p.probabilities(self.x)
            zero = (s == 0).astype(np.int64)
            prod = np.where(s == 0, 1.0, s)
        self.node_zero, self.node_prod = zero, prod
        c = self.collection
        self.set_zero = np.add.reduceat(zero[c.members], c.ptr[:-1])
        self.set_prod = np.multiply.reduceat(prod[c.members], c.ptr[:-1])
        self.sum_coverage = float(np.sum(1.0 - self.set_survival))

    def copy(self) -> "CoverageState":
        new = object.__new__(CoverageState)
        new.__dict__.update(self.__dict__)
        for k in ("node_zero", "node_prod", "set_zero", "set_prod"):
            setattr(new, k, getattr(self, k).copy())
        return new

    @property
    def per_node_survival(self) -> np.ndarray:
        return np.where(self.node_zero > 0, 0.0, self.node_prod)

    @property
    def set_survival(self) -> np.ndarray:
        return np.where(self.set_zero > 0, 0.0, self.set_prod)

    @property
    def value(self) -> float:
        c = self.collection
        return c.n / c.theta * self.sum_coverage - cost(self.cost_model, self.x)

    def _check_move(self, i: int, direction: int) -> int:
        if direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        k = self.x[i] + direction
        if k < 0 or (self.bounds is not None and k > self.bounds[i]):
            raise IndexError(f"moving component {i} of {self.x} by {direction:+d} leaves the box")
        return k

    def _node_delta(self, i: int, direction: int):
        """Nodes whose survival changes, with zero-count and ratio deltas."""
        if self._factored:
            j = self.x[i] + 1 if direction > 0 else self.x[i]
            f = self.params.unit_factors(i, j)
            z = f == 0
            nodes = np.flatnonzero(z | (f != 1.0))
            fz = z[nodes]
            ratio = np.where(fz, 1.0, f[nodes])
            if direction < 0:
                ratio = 1.0 / ratio
            return nodes, direction * fz.astype(np.int64), ratio
        s_new = 1.0 - self.params.probabilities(add_unit(self.x, i, direction))
        z_new = (s_new == 0).astype(np.int64)
        p_new = np.where(s_new == 0, 1.0, s_new)
        nodes = np.flatnonzero((z_new != self.node_zero) | (p_new != self.node_prod))
        return nodes, z_new[nodes] - self.node_zero[nodes], p_new[nodes] / self.node_prod[nodes]

    def _set_delta(self, nodes, dz, ratio):
        """Touched set indices with their zero-count deltas and ratios."""
        c = self.collection
        if len(nodes) * 4 >= c.n:
            zfull = np.zeros(c.n, dtype=np.int64)
            rfull = np.ones(c.n)
            zfull[nodes] = dz
            rfull[nodes] = ratio
            sets = np.arange(c.theta)
            return (sets, np.add.reduceat(zfull[c.members], c.ptr[:-1]),
                    np.multiply.reduceat(rfull[c.members], c.ptr[:-1]))
        node_ptr, entries = c.node_membership
        ent, _ = gather_csr(node_ptr, entries, nodes)
        owner = np.repeat(np.arange(len(nodes)), node_ptr[nodes + 1] - node_ptr[nodes])
        sets, inv = np.unique(c.member_set[ent], return_inverse=True)
        sz = np.zeros(len(sets), dtype=np.int64)
        np.add.at(sz, inv, dz[owner])
        sr = np.ones(len(sets))
        np.multiply.at(sr, inv, ratio[owner])
        return sets, sz, sr

    def _evaluate(self, i: int, direction: int):
        nodes, dz, ratio = self._node_delta(i, direction)
        sets, sz, sr = self._set_delta(nodes, dz, ratio)
        old_z, old_p = self.set_zero[sets], self.set_prod[sets]
        new_z, new_p = old_z + sz, old_p * sr
        old_s = np.where(old_z > 0, 0.0, old_p)
        new_s = np.where(new_z > 0, 0.0, new_p)
        d_cov = float(np.sum(old_s - new_s))
        return (nodes, dz, ratio, sets, new_z, new_p), d_cov

    def marginal_gain(self, i: int, direction: int = 1) -> float:
        """``f_hat(x + direction * e_i) - f_hat(x)`` without changing the state."""
        self._check_move(i, direction)
        _, d_cov = self._evaluate(i, direction)
        c = self.collection
        return c.n / c.theta * d_cov - direction * self.cost_model.unit_costs[i]

    def commit(self, i: int, direction: int = 1) -> None:
        """Apply the move ``x <- x + direction * e_i``."""
        self._check_move(i, direction)
        (nodes, dz, ratio, sets, new_z, new_p), d_cov = self._evaluate(i, direction)
        self.node_zero[nodes] += dz
        self.node_prod[nodes] *= ratio
        self.set_zero[sets] = new_z
        self.set_prod[sets] = new_p
        self.sum_coverage += d_cov
        self.x = add_unit(self.x, i, direction)


def marginal_gain(state: CoverageState, i: int, direction: int = 1) -> float:
    return state.marginal_gain(i, direction)
