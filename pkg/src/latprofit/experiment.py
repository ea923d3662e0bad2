"""Experiment orchestration behind the CLI: instances, algorithm runs, sweeps."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .graph import Graph, IngestReport, TriggeringModel, assign_weighted_cascade, ingest_edge_list, random_digraph
from .objective import MonteCarloObjective, RISObjective
from .optimizer import (
    Box, dg_ip_ris, greedy_climb, iterative_pruning, plan_collection, random_climb,
    run_double_greedy,
)
from .strategy import Bounds, CostModel, StrategyParams, Vector, read_strategy_csv, sample_random_strategy_params

log = logging.getLogger(__name__)

ROW_FIELDS = (
    "dataset", "model", "lambda", "algo", "profit", "profit_se", "wall_time_s", "seed", "run_seed",
    "condition_A", "condition_B", "guarantee", "x", "theta", "error",
)

# stream tags under the master seed
_GRAPH, _PARAMS, _EVAL, _RUN = 1, 2, 3, 4


def derive_seed(master: int, *path: int) -> int:
    """A 63-bit seed that depends only on the master seed and ``path``."""
    state = np.random.SeedSequence([master, *path]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@dataclass
class Instance:
    dataset: str
    model: TriggeringModel
    params: StrategyParams
    bounds: Bounds
    ingest: IngestReport | None = None

    @property
    def n(self) -> int:
        return self.model.n

    def cost(self, lam: float) -> CostModel:
        return CostModel.from_lambda(lam, self.n, self.bounds)


def load_graph(cfg: RunConfig) -> tuple[Graph, IngestReport | None]:
    if cfg.dataset.startswith("synthetic:"):
        _, n, deg = cfg.dataset.split(":")
        rng = np.random.default_rng(derive_seed(cfg.seed, _GRAPH))
        return random_digraph(int(n), float(deg), rng, cfg.undirected), None
    return ingest_edge_list(cfg.dataset, cfg.undirected)


def build_instance(cfg: RunConfig) -> Instance:
    """Weighted-cascade parameters on the configured graph plus the strategy function."""
    cfg.validate()
    graph, report = load_graph(cfg)
    model = assign_weighted_cascade(graph, cfg.model)
    bounds = Bounds(cfg.bounds)
    if cfg.params_csv is not None:
        params = read_strategy_csv(cfg.params_csv, graph.n, cfg.d, cfg.eta)
    else:
        rng = np.random.default_rng(derive_seed(cfg.seed, _PARAMS))
        params = sample_random_strategy_params(graph.n, cfg.d, cfg.r_ranges, cfg.eta, rng)
    return Instance(cfg.dataset, model, params, bounds, report)


@dataclass
class AlgoResult:
    x: Vector
    wall_time: float
    condition_A: float = math.nan
    condition_B: float = math.nan
    guarantee: bool | None = None
    theta: int | None = None


def _mc(inst: Instance, cost: CostModel, cfg: RunConfig, seed: int) -> MonteCarloObjective:
    return MonteCarloObjective(inst.model, inst.params, cost, inst.bounds, cfg.mc_samples, seed)


def _ris(inst: Instance, cost: CostModel, cfg: RunConfig, seed: int) -> RISObjective:
    s_opt, s_main = np.random.SeedSequence(seed).spawn(2)
    pc = plan_collection(
        inst.model, inst.params, cost, inst.bounds, (np.random.default_rng(s_opt), np.random.default_rng(s_main)),
        cfg.eps, cfg.eps1, cfg.delta, cfg.theta_cap)
    return RISObjective(pc.collection, inst.params, cost, inst.bounds)


def run_algorithm(algo: str, inst: Instance, lam: float, cfg: RunConfig, seed: int) -> AlgoResult:
    """Run one algorithm on one instance; ``seed`` drives all of its randomness."""
    cost = inst.cost(lam)
    start = time.perf_counter()
    if algo in ("DGS", "DGITS"):
        rep = dg_ip_ris(
            inst.model, inst.params, cost, inst.bounds, cfg.eps, cfg.eps1, cfg.delta, seed,
            cfg.theta_cap, heuristic=cfg.heuristic, prune=algo == "DGITS")
        return AlgoResult(rep.chosen_x, time.perf_counter() - start, rep.condition_A, rep.condition_B,
                          rep.guarantee_holds, rep.theta_used)
    if algo in ("DG", "DGIT"):
        obj = _mc(inst, cost, cfg, derive_seed(seed, 0))
        x, box, a, b = run_double_greedy(obj, np.random.default_rng(derive_seed(seed, 1)), prune=algo == "DGIT")
        cond = b if algo == "DGIT" else a
        return AlgoResult(x, time.perf_counter() - start, a, b, cond >= 0)
    if algo == "Greedy":
        x = greedy_climb(_mc(inst, cost, cfg, derive_seed(seed, 0)), inst.bounds)
        return AlgoResult(x, time.perf_counter() - start)
    if algo == "GreedyS":
        obj = _ris(inst, cost, cfg, seed)
        x = greedy_climb(obj, inst.bounds)
        return AlgoResult(x, time.perf_counter() - start, theta=obj.collection.theta)
    if algo == "Random":
        x = random_climb(_mc(inst, cost, cfg, derive_seed(seed, 0)), inst.bounds,
                         np.random.default_rng(derive_seed(seed, 1)))
        return AlgoResult(x, time.perf_counter() - start)
    raise ValueError(f"unknown algorithm {algo!r}")


def evaluator(inst: Instance, lam: float, cfg: RunConfig) -> MonteCarloObjective:
    """The common scorer; its seed depends on the master seed only."""
    return MonteCarloObjective(inst.model, inst.params, inst.cost(lam), inst.bounds,
                               cfg.eval_samples, derive_seed(cfg.seed, _EVAL))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, tuple):
        return " ".join(map(str, v))
    return str(v)


def optimize_rows(cfg: RunConfig, inst: Instance | None = None) -> list[dict[str, str]]:
    """One row per (lambda, algorithm); failures become rows with ``error`` set."""
    inst = inst or build_instance(cfg)
    rows = []
    for li, lam in enumerate(cfg.lambdas):
        ev = evaluator(inst, lam, cfg)
        for ai, algo in enumerate(cfg.algorithms):
            run_seed = derive_seed(cfg.seed, _RUN, li, ai)
            row = dict.fromkeys(ROW_FIELDS, "")
            row.update(dataset=inst.dataset, model=inst.model.kind.value, algo=algo,
                       seed=str(cfg.seed), run_seed=str(run_seed))
            row["lambda"] = repr(float(lam))
            try:
                res = run_algorithm(algo, inst, lam, cfg, run_seed)
                est = ev.estimate(res.x)
                row.update(profit=_fmt(est.mean), profit_se=_fmt(est.std_error), wall_time_s=_fmt(res.wall_time),
                           condition_A=_fmt(res.condition_A), condition_B=_fmt(res.condition_B),
                           guarantee=_fmt(res.guarantee), x=_fmt(res.x), theta=_fmt(res.theta))
            except Exception as exc:  # recorded, the sweep goes on
                log.warning("%s at lambda=%s failed: %s", algo, lam, exc)
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            log.info("%s lambda=%s profit=%s", algo, lam, row["profit"])
    return rows


def prune_box(inst: Instance, lam: float, cfg: RunConfig, sampled: bool) -> Box:
    cost = inst.cost(lam)
    seed = derive_seed(cfg.seed, _RUN, 0, 0)
    obj = _ris(inst, cost, cfg, seed) if sampled else _mc(inst, cost, cfg, seed)
    return iterative_pruning(obj, inst.bounds)


def table_ab_rows(cfg: RunConfig, inst: Instance | None = None) -> list[dict[str, str]]:
    """``A = f_hat(0) + f_hat(b)`` and ``B = f_hat(g) + f_hat(h)`` per lambda on one collection."""
    inst = inst or build_instance(cfg)
    seed = derive_seed(cfg.seed, _RUN, 0, 0)
    rows = []
    coll = None
    for lam in cfg.lambdas:
        cost = inst.cost(lam)
        if coll is None:
            coll = _ris(inst, inst.cost(min(cfg.lambdas)), cfg, seed).collection
        obj = RISObjective(coll, inst.params, cost, inst.bounds)
        box = iterative_pruning(obj, inst.bounds)
        a = obj.value(inst.bounds.zero()) + obj.value(inst.bounds.values)
        b = obj.value(box.lower) + obj.value(box.upper)
        rows.append({"lambda": repr(float(lam)), "A": repr(a), "B": repr(b), "B_nonneg": str(b >= 0),
                     "lower": _fmt(box.lower), "upper": _fmt(box.upper)})
    return rows


def bench_rows(cfg: RunConfig, inst: Instance | None = None, lam: float | None = None) -> list[dict[str, str]]:
    """Time DG against DGS (and DGIT against DGITS when listed) on one instance."""
    inst = inst or build_instance(cfg)
    lam = cfg.lambdas[0] if lam is None else lam
    pairs = [("DG", "DGS"), ("DGIT", "DGITS")]
    rows = []
    for k, (slow, fast) in enumerate(pairs):
        if slow not in cfg.algorithms and fast not in cfg.algorithms and k:
            continue
        seed = derive_seed(cfg.seed, _RUN, 0, k)
        r_mc = run_algorithm(slow, inst, lam, cfg, seed)
        r_s = run_algorithm(fast, inst, lam, cfg, seed)
        speed = r_mc.wall_time / r_s.wall_time
        rows.append({"algo": slow, "backend": "mc", "wall_time_s": repr(r_mc.wall_time), "speedup": "",
                     "x": _fmt(r_mc.x)})
        rows.append({"algo": fast, "backend": "rr", "wall_time_s": repr(r_s.wall_time), "speedup": repr(speed),
                     "x": _fmt(r_s.x)})
    return rows
