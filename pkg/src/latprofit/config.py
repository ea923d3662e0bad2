"""Run configuration: a flat ``key=value`` text file with CLI overrides.

Lists are comma separated; the per-action ``r`` ranges are written as
``lo:hi`` pairs.  ``dataset`` is either an edge-list path or
``synthetic:<n>:<avg_degree>`` for a generated graph.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .graph import ModelKind
from .strategy import PAPER_RANGES

ALGORITHMS = ("DG", "DGIT", "DGS", "DGITS", "Greedy", "GreedyS", "Random")


class ConfigError(ValueError):
    pass


def read_kv(path: str | os.PathLike) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment line."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(t) for t in s.split(",") if t.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(t) for t in s.split(",") if t.strip())


def _ranges(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in s.split(","):
        lo, hi = part.split(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _opt_int(s: str) -> int | None:
    return None if s.strip().lower() in ("", "none") else int(s)


def _opt_str(s: str) -> str | None:
    return None if s.strip().lower() in ("", "none") else s.strip()


@dataclass(frozen=True)
class RunConfig:
    dataset: str = "synthetic:1000:6"
    undirected: bool = False
    model: str = "IC"
    d: int = 5
    b: tuple[int, ...] = (5,)
    eta: float = 0.8
    r_ranges: tuple[tuple[float, float], ...] = PAPER_RANGES
    lambdas: tuple[float, ...] = (0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
    algorithms: tuple[str, ...] = ALGORITHMS
    mc_samples: int = 2000
    eval_samples: int = 10000
    eps: float = 0.15
    eps1: float = 0.1
    delta: float = 10.0
    theta_cap: int | None = 50000
    seed: int = 0
    output_dir: str = "out"
    params_csv: str | None = None
    heuristic: bool = False

    _parsers = {
        "undirected": _bool, "d": int, "b": _ints, "eta": float, "r_ranges": _ranges,
        "lambdas": _floats, "algorithms": lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
        "mc_samples": int, "eval_samples": int, "eps": float, "eps1": float, "delta": float,
        "theta_cap": _opt_int, "seed": int, "params_csv": _opt_str, "heuristic": _bool,
    }

    @property
    def bounds(self) -> tuple[int, ...]:
        return self.b * self.d if len(self.b) == 1 else self.b

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, raw: dict[str, str]) -> "RunConfig":
        known = set(cls.field_names())
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        kw = {}
        for k, v in raw.items():
            try:
                kw[k] = cls._parsers.get(k, str)(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from None
        return cls(**kw)

    @classmethod
    def load(cls, path: str | os.PathLike, overrides: dict[str, str] | None = None) -> "RunConfig":
        raw = read_kv(path)
        raw.update(overrides or {})
        return cls.from_dict(raw)

    def to_dict(self) -> dict[str, str]:
        out = {}
        for k in self.field_names():
            v = getattr(self, k)
            if k == "r_ranges":
                s = ",".join(f"{lo!r}:{hi!r}" for lo, hi in v)
            elif isinstance(v, tuple):
                s = ",".join(repr(t) if isinstance(t, float) else str(t) for t in v)
            elif isinstance(v, float):
                s = repr(v)
            elif v is None:
                s = "none"
            else:
                s = str(v)
            out[k] = s
        return out

    def serialize(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_dict().items())

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def validate(self, check_files: bool = True) -> "RunConfig":
        """Raise :class:`ConfigError` on the first out-of-domain value."""
        problems = []
        try:
            ModelKind(self.model)
        except ValueError:
            problems.append(f"model must be IC or LT, got {self.model!r}")
        if self.d < 1:
            problems.append("d must be >= 1")
        if len(self.b) not in (1, self.d) or any(v < 0 for v in self.b):
            problems.append("b needs one non-negative entry or d of them")
        if not 0 < self.eta <= 1:
            problems.append("eta must lie in (0, 1]")
        if self.params_csv is None:
            if len(self.r_ranges) != self.d:
                problems.append(f"r_ranges needs {self.d} lo:hi pairs")
            elif any(not 0 <= lo <= hi <= 1 for lo, hi in self.r_ranges):
                problems.append("each r range must satisfy 0 <= lo <= hi <= 1")
        if not self.lambdas or any(v < 0 for v in self.lambdas):
            problems.append("lambdas must be a non-empty list of non-negative numbers")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            problems.append(f"unknown algorithms {bad}; choose from {', '.join(ALGORITHMS)}")
        if self.mc_samples < 1 or self.eval_samples < 1:
            problems.append("sample counts must be >= 1")
        if not 0 < self.eps < 0.5:
            problems.append("eps must lie in (0, 1/2)")
        if self.eps1 <= 0:
            problems.append("eps1 must be positive")
        if self.delta <= 1:
            problems.append("delta must exceed 1")
        if self.theta_cap is not None and self.theta_cap < 1:
            problems.append("theta_cap must be >= 1")
        if self.dataset.startswith("synthetic:"):
            try:
                _, n, deg = self.dataset.split(":")
                if int(n) < 2 or float(deg) <= 0:
                    raise ValueError
            except ValueError:
                problems.append(f"bad synthetic dataset spec {self.dataset!r}")
        elif check_files and not Path(self.dataset).is_file():
            problems.append(f"dataset not found: {self.dataset}")
        if check_files and self.params_csv is not None and not Path(self.params_csv).is_file():
            problems.append(f"params_csv not found: {self.params_csv}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self
