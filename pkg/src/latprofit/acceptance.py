"""Acceptance checks shared by ``latprofit verify`` and the test-suite.

Each check returns a :class:`CriterionResult` carrying the measured
values; nothing here raises on a failed criterion.  Seeds are fixed, so
a fresh checkout gives the same numbers every time.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import tempfile
import time
from contextlib import redirect_stdout
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .config import RunConfig, read_kv
from .graph import (
    InvalidRealization, ModelKind, Realization, assign_weighted_cascade, random_digraph,
    realization_probability,
)
from .optimizer import (
    Box, double_greedy, dg_ip_ris, iterative_pruning, telescoping_sum,
)
from .oracle import (
    OracleInstance, check_dr_submodular, enumerate_realizations, exact_opt, random_oracle_instance,
    read_instance, seed_set_probabilities,
)
from .objective import RISObjective
from .rrset import CoverageState, RRCollection, estimate_f_hat, generate_collection
from .diffusion import estimate_profit_mc
from .strategy import Bounds, CostModel, StrategyParams, sample_random_strategy_params, seed_probability

FIXTURES = Path(__file__).parent / "fixtures"
SUITE_SEED = 20240611


@dataclass
class CriterionResult:
    cid: str
    name: str
    passed: bool
    measured: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.cid} {self.name}: {self.measured} ({self.seconds:.1f}s)"


def _vec(s: str) -> tuple:
    return tuple(int(t) for t in s.split(","))


def oracle_suite(fixture_dir: Path = FIXTURES, count: int = 24, seed: int = SUITE_SEED) -> list[OracleInstance]:
    """The two stored fixtures plus ``count`` random tiny instances (IC and LT alternating)."""
    insts = [read_instance(fixture_dir / "oracle_ic"), read_instance(fixture_dir / "oracle_lt")]
    rng = np.random.default_rng(seed)
    shapes = [(2, 2), (2, 1), (1, 2), (3, 2), (2, 2), (1, 3)]
    for k in range(count):
        kind = ModelKind.IC if k % 2 == 0 else ModelKind.LT
        insts.append(random_oracle_instance(rng, kind, bounds=shapes[k % len(shapes)]))
    return insts


def _fixture_check(fixture_dir: Path) -> list[str]:
    """Frozen optima in the stored instances; returns mismatch descriptions."""
    bad = []
    for name in ("oracle_ic", "oracle_lt"):
        cfg = read_kv(fixture_dir / name / "config.txt")
        best, value = exact_opt(read_instance(fixture_dir / name))
        if abs(value - float(cfg["expected_opt"])) > 1e-9 or _vec(cfg["expected_argmax"]) not in best:
            bad.append(f"{name}: opt {value:.6g} at {best}, frozen {cfg['expected_opt']} at {cfg['expected_argmax']}")
    return bad


# ---------------------------------------------------------------- criteria

def c1_strategy_golden(fixture_dir: Path = FIXTURES) -> tuple[bool, str]:
    cfg = read_kv(fixture_dir / "strategy_example.txt")
    r = np.array([[float(t) for t in cfg["r"].split(",")]])
    params = StrategyParams(r, float(cfg["eta"]))
    h = seed_probability(params, 0, _vec(cfg["x"]))
    expected, tol = float(cfg["expected"]), float(cfg["tol"])
    return abs(h - expected) <= tol, f"h={h:.6f} expected={expected}+-{tol}"


def c2_telescoping(fixture_dir: Path = FIXTURES) -> tuple[bool, str]:
    inst = read_instance(fixture_dir / "oracle_ic")
    obj = inst.objective()
    x, y = (1, 1), (2, 3)
    worst = abs(telescoping_sum(obj, x, y) - obj.value(y)) / max(1.0, abs(obj.value(y)))
    example = worst
    rng = np.random.default_rng(SUITE_SEED + 2)
    suite = oracle_suite(fixture_dir)
    for k in range(100):
        inst = suite[k % len(suite)]
        obj = inst.objective()
        b = np.array(inst.bounds.values)
        y = rng.integers(0, b + 1)
        x = rng.integers(0, y + 1)
        x, y = tuple(map(int, x)), tuple(map(int, y))
        err = abs(telescoping_sum(obj, x, y) - obj.value(y)) / max(1.0, abs(obj.value(y)))
        worst = max(worst, err)
    return worst <= 1e-9, f"example rel err={example:.2e}, worst over 100 pairs={worst:.2e}"


def c3_estimator_agreement(fixture_dir: Path = FIXTURES, mc_samples: int = 100_000,
                           collections: int = 200, theta: int = 500) -> tuple[bool, str]:
    suite = oracle_suite(fixture_dir)
    rng = np.random.default_rng(SUITE_SEED + 3)
    worst_mc = worst_ris = 0.0
    fails_mc = fails_ris = checks = 0
    for inst in suite:
        pooled = generate_collection(inst.model, collections * theta, rng)
        pts = list(inst.bounds.points())
        for j in rng.choice(len(pts), size=5, replace=len(pts) < 5):
            x = pts[int(j)]
            exact = inst.profit(x)
            mc = estimate_profit_mc(inst.model, inst.params, inst.cost, x, mc_samples, rng)
            z_mc = abs(mc.mean - exact) / mc.std_error if mc.std_error > 0 else (0.0 if mc.mean == exact else math.inf)
            h = inst.params.probabilities(x)
            cover = 1.0 - np.multiply.reduceat((1.0 - h)[pooled.members], pooled.ptr[:-1])
            per = inst.n * cover.reshape(collections, theta).mean(axis=1) - _cost(inst, x)
            se = per.std(ddof=1) / math.sqrt(collections)
            z_ris = abs(per.mean() - exact) / se if se > 0 else (0.0 if abs(per.mean() - exact) < 1e-12 else math.inf)
            worst_mc, worst_ris = max(worst_mc, z_mc), max(worst_ris, z_ris)
            fails_mc += z_mc > 4
            fails_ris += z_ris > 3
            checks += 1
    ok = fails_mc == 0 and fails_ris == 0
    return ok, (f"{len(suite)} instances x 5 points; MC worst |z|={worst_mc:.2f} (limit 4, {fails_mc} over); "
                f"f_hat worst |z|={worst_ris:.2f} (limit 3, {fails_ris} over)")


def _cost(inst: OracleInstance, x) -> float:
    return float(np.dot(inst.cost.unit_costs, x))


def c4_pruning_soundness(fixture_dir: Path = FIXTURES) -> tuple[bool, str]:
    suite = oracle_suite(fixture_dir)
    misses = []
    for k, inst in enumerate(suite):
        box = iterative_pruning(inst.objective(), inst.bounds)
        best, _ = exact_opt(inst)
        misses += [(k, x) for x in best if not box.contains(x)]
    stale = _fixture_check(fixture_dir)
    ok = not misses and not stale
    msg = f"{len(suite)} instances, maximisers outside [g, h]: {len(misses)}"
    if stale:
        msg += "; fixture mismatch: " + "; ".join(stale)
    return ok, msg


def _cli_rows(tmp: str) -> list[dict]:
    from .cli import main

    cfg = RunConfig(dataset="synthetic:150:4", d=3, b=(3,), r_ranges=((0.0, 0.1), (0.0, 0.05), (0.0, 0.1)),
                    lambdas=(0.8, 1.4, 2.0), mc_samples=400, eval_samples=2000, theta_cap=20000,
                    seed=7, output_dir=tmp)
    path = Path(tmp) / "run.cfg"
    path.write_text(cfg.serialize())
    with redirect_stdout(io.StringIO()):
        status = main(["optimize", "--config", str(path)])
    if status != 0:
        raise RuntimeError(f"optimize exited with {status}")
    with open(Path(tmp) / "optimize.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def c5_pruning_monotone(fixture_dir: Path = FIXTURES) -> tuple[bool, str]:
    suite = oracle_suite(fixture_dir)
    bad_trace = 0
    for inst in suite:
        obj = inst.objective()
        box = iterative_pruning(obj, inst.bounds)
        fg = [obj.value(g) for g, _ in box.trace]
        fh = [obj.value(h) for _, h in box.trace]
        tol = 1e-12 * max(1.0, *map(abs, fg + fh))
        if any(b < a - tol for a, b in itertools.pairwise(fg)) or any(b < a - tol for a, b in itertools.pairwise(fh)):
            bad_trace += 1
    with tempfile.TemporaryDirectory() as tmp:
        rows = _cli_rows(tmp)
    scored = [r for r in rows if r["condition_A"] and r["condition_B"]]
    bad_rows = [f"{r['algo']}@{r['lambda']}" for r in scored if float(r["condition_B"]) < float(r["condition_A"])]
    errors = [f"{r['algo']}@{r['lambda']}: {r['error']}" for r in rows if r["error"]]
    ok = bad_trace == 0 and not bad_rows and not errors
    msg = (f"{len(suite)} exact traces, {bad_trace} non-monotone; {len(scored)} CLI rows with A/B, "
           f"{len(bad_rows)} with B < A")
    if bad_rows:
        msg += " (" + ", ".join(bad_rows) + ")"
    if errors:
        msg += "; run errors: " + "; ".join(errors)
    return ok, msg


def c6_approximation(fixture_dir: Path = FIXTURES, dg_runs: int = 500, ris_trials: int = 100,
                     ris_instances: int = 3) -> tuple[bool, str]:
    suite = oracle_suite(fixture_dir)
    eps, delta = 0.15, 10.0
    dg_checked = dg_fail = 0
    worst_margin = math.inf
    for k, inst in enumerate(suite):
        obj = inst.objective()
        _, fstar = exact_opt(inst)
        b = inst.bounds
        pruned = iterative_pruning(obj, b)
        for box, cond in ((Box.full(b), obj.value(b.zero()) + obj.value(b.values)),
                          (pruned, obj.value(pruned.lower) + obj.value(pruned.upper))):
            if cond < 0:
                continue
            rng = np.random.default_rng([SUITE_SEED, 6, k, int(box.lower == b.zero())])
            vals = np.array([obj.value(double_greedy(obj, box, rng)) for _ in range(dg_runs)])
            sigma = vals.std(ddof=1) / math.sqrt(dg_runs)
            margin = vals.mean() - (0.5 * fstar - 3 * sigma)
            worst_margin = min(worst_margin, margin)
            dg_checked += 1
            dg_fail += margin < 0
    # DG-IP-RIS on the first instances whose optimum clears the OPT lower-bound slack comfortably
    picked = [(k, inst) for k, inst in enumerate(suite) if exact_opt(inst)[1] >= 1.0][:ris_instances]
    ris_fail = 0
    rates = []
    for k, inst in picked:
        _, fstar = exact_opt(inst)
        hits = 0
        for t in range(ris_trials):
            rep = dg_ip_ris(inst.model, inst.params, inst.cost, inst.bounds, eps=eps, eps1=0.1, delta=delta,
                            seed=SUITE_SEED + 1000 * k + t)
            hits += inst.profit(rep.chosen_x) >= (0.5 - eps) * fstar
        rate = hits / ris_trials
        rates.append(rate)
        ris_fail += rate < 1 - 1 / delta
    ok = dg_fail == 0 and ris_fail == 0 and dg_checked > 0 and len(picked) == ris_instances
    return ok, (f"double greedy: {dg_checked} (instance, box) cases, {dg_fail} below 0.5*f* - 3 sigma "
                f"(min margin {worst_margin:.3g}); DG-IP-RIS success rates {', '.join(f'{r:.2f}' for r in rates)} "
                f"(need >= {1 - 1 / delta:.2f})")


def c7_dr_submodular(fixture_dir: Path = FIXTURES) -> tuple[bool, str]:
    suite = oracle_suite(fixture_dir)
    rng = np.random.default_rng(SUITE_SEED + 7)
    viol_exact = 0
    for inst in suite:
        rep = check_dr_submodular(inst.objective(), inst.bounds, 200, rng)
        viol_exact += rep.violations
    # f_hat on a fixed collection over a mid-sized random instance
    g = random_digraph(200, 4, rng)
    model = assign_weighted_cascade(g, ModelKind.IC)
    b = Bounds((4, 4, 4))
    params = sample_random_strategy_params(200, 3, ((0, 0.1), (0, 0.05), (0, 0.1)), 0.8, rng)
    coll = generate_collection(model, 2000, rng)
    obj = RISObjective(coll, params, CostModel.from_lambda(0.5, 200, b), b, cache_size=1)
    viol_hat = check_dr_submodular(obj, b, 1000, rng).violations
    witnesses = []
    for lam in (1.0, 2.0):
        found = sum(check_dr_submodular(inst.with_cost(CostModel.from_lambda(lam, inst.n, inst.bounds)).objective(),
                                        inst.bounds, 50, rng).negative_marginal for inst in suite)
        witnesses.append(found)
    ok = viol_exact == 0 and viol_hat == 0 and all(w > 0 for w in witnesses)
    return ok, (f"exact violations={viol_exact} over {len(suite)}x200; f_hat violations={viol_hat} over 1000; "
                f"negative-marginal witnesses at lambda=1: {witnesses[0]}/{len(suite)}, lambda=2: {witnesses[1]}/{len(suite)}")


def c8_incremental(moves: int = 10_000) -> tuple[bool, str]:
    rng = np.random.default_rng(SUITE_SEED + 8)
    g = random_digraph(120, 3, rng)
    model = assign_weighted_cascade(g, ModelKind.IC)
    b = Bounds((3, 3, 3))
    r = rng.uniform(0, 0.3, (120, 3))
    r[rng.random((120, 3)) < 0.05] = 1.0  # h_u = 1 after one unit: zero survival factors
    params = StrategyParams(r, 0.8)
    cm = CostModel.from_lambda(1.0, 120, b)
    coll = generate_collection(model, 1500, rng)
    state = CoverageState(coll, params, cm, b.zero(), b)
    x = b.zero()
    worst, zero_cases = 0.0, 0
    for _ in range(moves):
        i = int(rng.integers(3))
        if x[i] == 0:
            direction = 1
        elif x[i] == b[i]:
            direction = -1
        else:
            direction = 1 if rng.random() < 0.5 else -1
        y = x[:i] + (x[i] + direction,) + x[i + 1:]
        got = state.marginal_gain(i, direction)
        fx, fy = estimate_f_hat(coll, params, cm, x), estimate_f_hat(coll, params, cm, y)
        scale = max(1.0, abs(fx), abs(fy))
        worst = max(worst, abs(got - (fy - fx)) / scale)
        zero_cases += bool(np.any(params.probabilities(x) == 1.0) or np.any(params.probabilities(y) == 1.0))
        if rng.random() < 0.5:
            state.commit(i, direction)
            x = y
    drift = abs(state.value - estimate_f_hat(coll, params, cm, x)) / max(1.0, abs(state.value))
    ok = worst <= 1e-9 and drift <= 1e-9 and zero_cases > 0
    return ok, f"{moves} moves, worst rel err={worst:.2e}, final drift={drift:.2e}, moves touching h_u=1: {zero_cases}"


def c9_normalization(fixture_dir: Path = FIXTURES) -> tuple[bool, str]:
    suite = oracle_suite(fixture_dir)
    rng = np.random.default_rng(SUITE_SEED + 9)
    worst_r = worst_s = 0.0
    for inst in suite:
        g = inst.model.graph
        total = 0.0
        for mask in itertools.product((False, True), repeat=g.m):
            try:
                total += realization_probability(inst.model, Realization(g, np.array(mask, dtype=bool)))
            except InvalidRealization:
                pass
        enum_total = sum(p for _, p in enumerate_realizations(inst.model))
        worst_r = max(worst_r, abs(total - 1), abs(enum_total - 1))
        for _ in range(5):
            x = tuple(int(v) for v in rng.integers(0, np.array(inst.bounds.values) + 1))
            worst_s = max(worst_s, abs(seed_set_probabilities(inst.params.probabilities(x)).sum() - 1))
    ok = worst_r <= 1e-9 and worst_s <= 1e-9
    return ok, f"max |sum - 1|: realizations {worst_r:.1e}, seed sets {worst_s:.1e}"


def _big_config(**kw) -> RunConfig:
    base = dict(dataset="synthetic:1000:6", d=5, b=(5,), mc_samples=2000, eval_samples=5000,
                theta_cap=50_000, seed=11)
    base.update(kw)
    return RunConfig(**base)


def c10_speedup() -> tuple[bool, str]:
    from .experiment import bench_rows, build_instance

    cfg = _big_config(lambdas=(1.0,), algorithms=("DG", "DGS"))
    rows = bench_rows(cfg, build_instance(cfg))
    t_dg, t_dgs = float(rows[0]["wall_time_s"]), float(rows[1]["wall_time_s"])
    ratio = t_dg / t_dgs
    target = "met" if ratio >= 5 else "missed"
    return ratio > 1, f"DG {t_dg:.2f}s, DGS {t_dgs:.2f}s, speedup {ratio:.1f}x (5x target {target})"


def c11_lambda_trend() -> tuple[bool, str]:
    from .experiment import build_instance, derive_seed, evaluator, run_algorithm

    cfg = _big_config()
    inst = build_instance(cfg)
    values, xs = [], []
    for li, lam in enumerate(cfg.lambdas):
        res = run_algorithm("DGITS", inst, lam, cfg, derive_seed(cfg.seed, 4, li, 3))
        # one evaluator seed for every lambda, so consecutive values are paired
        values.append(evaluator(inst, lam, cfg).estimate(res.x, keep_values=True).values)
        xs.append(res.x)
    worst_z, ups = -math.inf, []
    for k in range(len(values) - 1):
        diff = values[k + 1] - values[k]
        se = diff.std(ddof=1) / math.sqrt(len(diff))
        z = diff.mean() / se if se > 0 else (0.0 if diff.mean() <= 0 else math.inf)
        worst_z = max(worst_z, z)
        if z > 3:
            ups.append(f"{cfg.lambdas[k]}->{cfg.lambdas[k + 1]}")
    means = ", ".join(f"{v.mean():.1f}" for v in values)
    msg = f"profits {means}; largest paired increase z={worst_z:.2f} (limit 3)"
    if ups:
        msg += "; increases at " + ", ".join(ups)
    return not ups, msg


CRITERIA: list[tuple[str, str, Callable[..., tuple[bool, str]], bool]] = [
    # id, name, check, takes fixture_dir
    ("C1", "strategy-function golden value", c1_strategy_golden, True),
    ("C2", "telescoping identity", c2_telescoping, True),
    ("C3", "oracle-estimator agreement", c3_estimator_agreement, True),
    ("C4", "pruning soundness", c4_pruning_soundness, True),
    ("C5", "pruning monotonicity", c5_pruning_monotone, True),
    ("C6", "approximation guarantees", c6_approximation, True),
    ("C7", "dr-submodularity suites", c7_dr_submodular, True),
    ("C8", "incremental estimator consistency", c8_incremental, False),
    ("C9", "probability normalizations", c9_normalization, True),
    ("C10", "sampling speedup", c10_speedup, False),
    ("C11", "profit decreases with lambda", c11_lambda_trend, False),
]


def run_criterion(cid: str, fixture_dir: str | Path | None = None) -> CriterionResult:
    fixture_dir = Path(fixture_dir) if fixture_dir else FIXTURES
    for key, name, fn, uses_fixtures in CRITERIA:
        if key == cid:
            start = time.perf_counter()
            try:
                ok, msg = fn(fixture_dir) if uses_fixtures else fn()
            except Exception as exc:  # a crash is a failed criterion, reported by name
                ok, msg = False, f"raised {type(exc).__name__}: {exc}"
            return CriterionResult(key, name, bool(ok), msg, time.perf_counter() - start)
    raise KeyError(f"unknown criterion {cid!r}")


def run_all(fixture_dir: str | Path | None = None, only: list[str] | None = None) -> list[CriterionResult]:
    ids = [c[0] for c in CRITERIA if not only or c[0] in only]
    return [run_criterion(cid, fixture_dir) for cid in ids]
