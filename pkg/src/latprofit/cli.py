"""Command-line front end.

Every run subcommand takes ``--config FILE`` (flat ``key=value``) and
one flag per config key; flags override the file.  CSV goes to
``<output_dir>/<command>.csv`` and to stdout.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig

log = logging.getLogger("latprofit")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    for name in RunConfig.field_names():
        flag = "--" + name.replace("_", "-")
        p.add_argument(flag, dest="cfg_" + name, metavar=name.upper(), help=f"override config key {name}")


def _load_config(args) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    if args.config:
        cfg = RunConfig.load(args.config, overrides)
    else:
        cfg = RunConfig.from_dict(overrides)
    return cfg.validate()


def _emit(rows: list[dict], cfg: RunConfig | None, name: str, out=None) -> None:
    out = out or sys.stdout
    if not rows:
        return
    fields = list(rows[0])
    w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if cfg is not None:
        d = Path(cfg.output_dir)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


def cmd_ingest(args) -> int:
    from .graph import ingest_edge_list, write_edge_list

    graph, report = ingest_edge_list(args.path, args.undirected)
    print(report.format())
    if args.out:
        write_edge_list(graph, args.out)
    return 0


def cmd_optimize(args) -> int:
    from .experiment import optimize_rows

    cfg = _load_config(args)
    _emit(optimize_rows(cfg), cfg, "optimize")
    return 0


def cmd_prune(args) -> int:
    from .experiment import build_instance, prune_box

    cfg = _load_config(args)
    inst = build_instance(cfg)
    rows = []
    for lam in cfg.lambdas:
        box = prune_box(inst, lam, cfg, sampled=args.backend == "rr")
        rows.append({"lambda": repr(float(lam)), "backend": args.backend, "iterations": len(box.trace) - 1,
                     "lower": " ".join(map(str, box.lower)), "upper": " ".join(map(str, box.upper))})
    _emit(rows, cfg, "prune")
    return 0


def cmd_table_ab(args) -> int:
    from .experiment import table_ab_rows

    cfg = _load_config(args)
    _emit(table_ab_rows(cfg), cfg, "table_ab")
    return 0


def cmd_bench(args) -> int:
    from .experiment import bench_rows

    cfg = _load_config(args)
    _emit(bench_rows(cfg), cfg, "bench")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_all

    results = run_all(fixture_dir=args.fixtures, only=args.only)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if failed:
        print("failed: " + ", ".join(failed))
        return 1
    return 0


def cmd_oracle(args) -> int:
    from .oracle import exact_opt, read_instance

    inst = read_instance(args.dir)
    if args.x:
        x = tuple(int(t) for t in args.x.split(","))
        print(f"x={' '.join(map(str, x))} profit={inst.profit(x)!r}")
        return 0
    best, value = exact_opt(inst)
    print(f"opt={value!r}")
    for x in best:
        print("argmax=" + " ".join(map(str, x)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latprofit", description="Profit maximization over integer-lattice strategies.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse an edge list and report what was kept")
    s.add_argument("path")
    s.add_argument("--undirected", action="store_true")
    s.add_argument("--out", help="write the cleaned, relabelled edge list here")
    s.set_defaults(func=cmd_ingest)

    for name, func, text in (
        ("optimize", cmd_optimize, "run every algorithm for every lambda and score with a common evaluator"),
        ("prune", cmd_prune, "report the pruned box per lambda"),
        ("table-ab", cmd_table_ab, "A = f(0)+f(b) and B = f(g)+f(h) per lambda"),
        ("bench", cmd_bench, "time simulation-backed against sampling-backed double greedy"),
    ):
        s = sub.add_parser(name, help=text)
        _add_config_flags(s)
        if name == "prune":
            s.add_argument("--backend", choices=("mc", "rr"), default="rr")
        s.set_defaults(func=func)

    s = sub.add_parser("verify", help="run the acceptance checks; nonzero exit on any failure")
    s.add_argument("--fixtures", help="fixture directory (defaults to the packaged one)")
    s.add_argument("--only", action="append", help="criterion id to run (repeatable)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("oracle", help="exact optimum (or exact profit at --x) of a stored tiny instance")
    s.add_argument("dir")
    s.add_argument("--x", help="comma-separated marketing vector")
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
