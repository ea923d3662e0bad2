"""Directed graphs, triggering models and realizations.

Arcs are stored in construction order and addressed by integer arc id.
Two CSR views group the arc ids by tail (out-arcs) and by head (in-arcs),
so per-arc parameters live in flat numpy arrays indexed by arc id.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

LT_TOL = 1e-9


class EdgeListError(ValueError):
    """Raised for unreadable or empty edge-list files."""


class InvalidRealization(ValueError):
    pass


def _csr(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return ptr, order


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph on dense node ids ``0..n-1``.

    ``labels[u]`` is the original identifier of node ``u`` (identity for
    graphs not read from a file).
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    labels: np.ndarray
    out_ptr: np.ndarray = field(repr=False)
    out_arc: np.ndarray = field(repr=False)
    in_ptr: np.ndarray = field(repr=False)
    in_arc: np.ndarray = field(repr=False)

    @classmethod
    def from_arcs(cls, n: int, src, dst, labels=None) -> "Graph":
        src = np.asarray(src, dtype=np.int64).reshape(-1)
        dst = np.asarray(dst, dtype=np.int64).reshape(-1)
        if src.shape != dst.shape:
            raise ValueError("src and dst must have the same length")
        if n < 0:
            raise ValueError("node count must be non-negative")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("arc endpoint outside [0, n)")
        if np.any(src == dst):
            raise ValueError("self-loops are not allowed")
        if len(np.unique(src * n + dst)) != len(src):
            raise ValueError("parallel arcs are not allowed")
        if labels is None:
            labels = np.arange(n, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError("labels must have one entry per node")
        out_ptr, out_arc = _csr(src, n)
        in_ptr, in_arc = _csr(dst, n)
        for a in (src, dst, labels, out_ptr, out_arc, in_ptr, in_arc):
            a.setflags(write=False)
        return cls(n, src, dst, labels, out_ptr, out_arc, in_ptr, in_arc)

    @property
    def m(self) -> int:
        return len(self.src)

    @property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_ptr)

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    def in_arcs(self, v: int) -> np.ndarray:
        return self.in_arc[self.in_ptr[v]:self.in_ptr[v + 1]]

    def out_arcs(self, u: int) -> np.ndarray:
        return self.out_arc[self.out_ptr[u]:self.out_ptr[u + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.src[self.in_arcs(v)]

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.dst[self.out_arcs(u)]

    def arcs(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def labelled_arcs(self) -> set[tuple[int, int]]:
        return set(zip(self.labels[self.src].tolist(), self.labels[self.dst].tolist()))


@dataclass(frozen=True)
class IngestReport:
    lines: int
    nodes: int
    arcs: int
    self_loops_dropped: int
    duplicates_collapsed: int
    undirected: bool

    def format(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.__dict__.items())


def ingest_edge_list(path: str | os.PathLike, undirected: bool = False) -> tuple[Graph, IngestReport]:
    """Read a whitespace separated edge list and remap ids to ``0..n-1``.

    Lines starting with ``#`` (or ``%``) and blank lines are skipped.
    Self-loops are dropped; repeated arcs keep the first occurrence.
    Node ids are assigned in order of first appearance.
    """
    ids: dict[int, int] = {}
    seen: set[tuple[int, int]] = set()
    src: list[int] = []
    dst: list[int] = []
    loops = dups = nlines = 0

    def node(label: int) -> int:
        u = ids.get(label)
        if u is None:
            u = ids[label] = len(ids)
        return u

    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s[0] in "#%":
                continue
            parts = s.split()
            try:
                a, b = int(parts[0]), int(parts[1])
            except (IndexError, ValueError):
                raise EdgeListError(f"{path}:{lineno}: expected two integer node ids, got {s!r}") from None
            if a < 0 or b < 0:
                raise EdgeListError(f"{path}:{lineno}: negative node id")
            nlines += 1
            if a == b:
                loops += 1
                continue
            u, v = node(a), node(b)
            for arc in ((u, v), (v, u)) if undirected else ((u, v),):
                if arc in seen:
                    dups += 1
                    continue
                seen.add(arc)
                src.append(arc[0])
                dst.append(arc[1])
    if not src:
        raise EdgeListError(f"{path}: no edges")
    labels = np.empty(len(ids), dtype=np.int64)
    for label, u in ids.items():
        labels[u] = label
    g = Graph.from_arcs(len(ids), src, dst, labels)
    report = IngestReport(nlines, g.n, g.m, loops, dups, undirected)
    return g, report


def load_edge_list(path: str | os.PathLike, undirected: bool = False) -> Graph:
    return ingest_edge_list(path, undirected)[0]


def write_edge_list(graph: Graph, path: str | os.PathLike) -> None:
    """Write one directed arc per line using the original node labels."""
    with open(path, "w") as fh:
        fh.write(f"# nodes={graph.n} arcs={graph.m}\n")
        for u, v in zip(graph.labels[graph.src], graph.labels[graph.dst]):
            fh.write(f"{u} {v}\n")


class ModelKind(str, enum.Enum):
    IC = "IC"
    LT = "LT"


@dataclass(frozen=True, eq=False)
class TriggeringModel:
    """Triggering-set distribution attached to every node of a graph.

    ``weight[a]`` is the IC probability or LT weight of arc ``a``.  Arcs
    flagged in ``independent`` are always sampled as separate Bernoulli
    trials, even in an LT model; for IC every arc is independent.  The
    flag exists for the constructed graph, whose seeding arcs must not
    share the LT budget of their head node.
    """

    graph: Graph
    kind: ModelKind
    weight: np.ndarray
    independent: np.ndarray

    def __post_init__(self):
        g = self.graph
        w = self.weight
        if w.shape != (g.m,) or self.independent.shape != (g.m,):
            raise ValueError("one weight per arc required")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("arc parameters must lie in [0, 1]")
        if self.kind is ModelKind.LT:
            budget = np.bincount(g.dst, weights=np.where(self.independent, 0.0, w), minlength=g.n)
            if np.any(budget > 1 + LT_TOL):
                v = int(np.argmax(budget))
                raise ValueError(f"LT weights into node {v} sum to {budget[v]:.12g} > 1")
        w.setflags(write=False)
        self.independent.setflags(write=False)

    @classmethod
    def ic(cls, graph: Graph, prob) -> "TriggeringModel":
        prob = np.array(prob, dtype=float).reshape(-1)
        return cls(graph, ModelKind.IC, prob, np.ones(graph.m, dtype=bool))

    @classmethod
    def lt(cls, graph: Graph, weight, independent=None) -> "TriggeringModel":
        weight = np.array(weight, dtype=float).reshape(-1)
        if independent is None:
            independent = np.zeros(graph.m, dtype=bool)
        return cls(graph, ModelKind.LT, weight, np.asarray(independent, dtype=bool).copy())

    @property
    def n(self) -> int:
        return self.graph.n

    def lt_intervals(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-arc ``[lo, hi)`` slices of the head node's unit threshold.

        Arc ``a`` is live iff a uniform draw for ``dst[a]`` lands in its
        slice; independent arcs get an empty slice.
        """
        g = self.graph
        w = np.where(self.independent, 0.0, self.weight)
        ordered = w[g.in_arc]
        cum = np.cumsum(ordered)
        # cumulative sum restarted at every head node
        offsets = np.zeros(g.n)
        has = g.in_ptr[:-1] > 0
        offsets[has] = cum[g.in_ptr[:-1][has] - 1]
        start = cum - ordered - np.repeat(offsets, g.in_degree)
        lo = np.empty(g.m)
        hi = np.empty(g.m)
        lo[g.in_arc] = start
        hi[g.in_arc] = start + ordered
        return lo, hi


def assign_weighted_cascade(graph: Graph, kind: ModelKind | str = ModelKind.IC) -> TriggeringModel:
    """Give every arc ``(u, v)`` the parameter ``1 / indeg(v)``."""
    if graph.n == 0:
        raise ValueError("graph is empty")
    kind = ModelKind(kind)
    w = 1.0 / graph.in_degree[graph.dst].astype(float)
    if kind is ModelKind.IC:
        return TriggeringModel.ic(graph, w)
    return TriggeringModel.lt(graph, w)


@dataclass(frozen=True, eq=False)
class Realization:
    """A sampled possible world, stored as the mask of live arcs."""

    graph: Graph
    live: np.ndarray

    def triggering_sets(self) -> list[set[int]]:
        g = self.graph
        sets: list[set[int]] = [set() for _ in range(g.n)]
        for a in np.flatnonzero(self.live):
            sets[g.dst[a]].add(int(g.src[a]))
        return sets

    @classmethod
    def from_triggering_sets(cls, graph: Graph, sets) -> "Realization":
        live = np.zeros(graph.m, dtype=bool)
        for v, tv in enumerate(sets):
            arcs = graph.in_arcs(v)
            tails = graph.src[arcs]
            for u in tv:
                hit = arcs[tails == u]
                if len(hit) == 0:
                    raise InvalidRealization(f"{u} is not an in-neighbor of {v}")
                live[hit[0]] = True
        return cls(graph, live)


def draw_uniforms(model: TriggeringModel, count: int, rng: np.random.Generator):
    """Raw uniforms behind ``count`` realizations: one per arc, plus one per
    node for LT models (``None`` for IC)."""
    g = model.graph
    u = rng.random((count, g.m))
    t = rng.random((count, g.n)) if model.kind is ModelKind.LT else None
    return u, t


def live_from_uniforms(model: TriggeringModel, u: np.ndarray, thresholds: np.ndarray | None) -> np.ndarray:
    g = model.graph
    live = u < model.weight
    if model.kind is ModelKind.LT:
        lo, hi = model.lt_intervals()
        lt = ~model.independent
        t = thresholds[:, g.dst[lt]]
        live[:, lt] = (t >= lo[lt]) & (t < hi[lt])
    return live


def sample_live_arcs(model: TriggeringModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Sample ``count`` independent realizations as a ``(count, m)`` bool mask.

    Independent arcs consume one uniform each.  LT heads consume one
    uniform each, matched against the cumulative weights of their in-arcs
    so at most one LT arc per head is live.  The draw layout depends only
    on the graph, so two models on the same graph sampled from equal
    seeds are coupled arc by arc.
    """
    return live_from_uniforms(model, *draw_uniforms(model, count, rng))


def sample_realization(model: TriggeringModel, rng: np.random.Generator) -> Realization:
    return Realization(model.graph, sample_live_arcs(model, 1, rng)[0])


def realization_probability(model: TriggeringModel, g: Realization) -> float:
    """Probability of a realization: product of per-node triggering-set factors."""
    graph = model.graph
    live = np.asarray(g.live, dtype=bool)
    if live.shape != (graph.m,):
        raise InvalidRealization("realization does not match the model's graph")
    w = model.weight
    ind = model.independent
    p = 1.0
    p *= float(np.prod(np.where(live[ind], w[ind], 1.0 - w[ind])))
    if model.kind is ModelKind.LT:
        lt = ~ind
        heads = graph.dst[lt]
        count = np.bincount(heads[live[lt]], minlength=graph.n)
        if np.any(count > 1):
            raise InvalidRealization("LT realization has a triggering set with more than one node")
        budget = np.bincount(heads, weights=w[lt], minlength=graph.n)
        p *= float(np.prod(w[lt][live[lt]]))
        p *= float(np.prod(np.clip(1.0 - budget[count == 0], 0.0, None)))
    return p


def random_digraph(n: int, avg_degree: float, rng: np.random.Generator, undirected: bool = False) -> Graph:
    """Uniform random simple digraph with about ``n * avg_degree`` arcs."""
    target = int(round(n * avg_degree / (2 if undirected else 1)))
    if target > n * (n - 1) // (2 if undirected else 1):
        raise ValueError("too many arcs requested")
    keys: set[int] = set()
    while len(keys) < target:
        u = rng.integers(n, size=2 * (target - len(keys)) + 8)
        v = rng.integers(n, size=len(u))
        for a, b in zip(u.tolist(), v.tolist()):
            if a == b:
                continue
            if undirected and a > b:
                a, b = b, a
            keys.add(a * n + b)
            if len(keys) == target:
                break
    arcs = sorted(keys)
    src = [k // n for k in arcs]
    dst = [k % n for k in arcs]
    if undirected:
        src, dst = src + dst, dst + src
    return Graph.from_arcs(n, src, dst)
