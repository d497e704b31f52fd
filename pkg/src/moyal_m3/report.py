"""Machine-readable verification reports.

Every check produces one record: a name, an anchor naming the identity
it certifies (or "plumbing" for artifact-internal machinery), a
residual, the tolerance it was held to, and a verdict derived from
nothing but residual <= tolerance.  Reports serialize deterministically:
identical seed and flags give byte-identical JSON (wall time is only
included on request, since it would break that guarantee).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import __version__

TOOL_NAME = "moyal-m3"
SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {
    "symbolic": 0.0,
    "float-exact": 1e-12,
    "pointwise": 1e-10,
    "homomorphism": 1e-10,
    "unitarity": 1e-8,
    "fft": 1e-6,
    "fourier-roundtrip": 1e-10,
    "parseval": 1e-10,
    "gaussian-self-dual": 1e-8,
    "derivative-rule": 1e-6,
    "quadrature": 1e-8,
    "finite-difference": 1e-7,
    "generator-bracket": 1e-9,
}


class ToleranceSet:
    """Named tolerances with command-line overrides (--tol.<name> value)."""

    def __init__(self, overrides: dict | None = None):
        self.values = dict(DEFAULT_TOLERANCES)
        if overrides:
            for key, value in overrides.items():
                self.values[key] = float(value)

    def __getitem__(self, name: str) -> float:
        try:
            return self.values[name]
        except KeyError:
            raise KeyError(f"unknown tolerance name {name!r}; known: "
                           f"{sorted(self.values)}") from None

    def as_dict(self) -> dict:
        return dict(sorted(self.values.items()))


@dataclass(frozen=True)
class CheckRecord:
    name: str
    anchor: str          # identity being certified, or "plumbing"
    residual: float
    tolerance: float
    passed: bool
    detail: dict | None = None

    @staticmethod
    def from_residual(name: str, anchor: str, residual: float,
                      tolerance: float, detail: dict | None = None
                      ) -> "CheckRecord":
        residual = float(residual)
        return CheckRecord(name, anchor, residual, float(tolerance),
                           residual <= float(tolerance), detail)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "anchor": self.anchor,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "verdict": "pass" if self.passed else "fail",
        }
        if self.detail is not None:
            out["detail"] = self.detail
        return out


@dataclass
class ReportDocument:
    command: str
    seed: int
    config: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    wall_time: float | None = None

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, record: CheckRecord):
        self.checks.append(record)

    def to_dict(self) -> dict:
        out = {
            "tool": TOOL_NAME,
            "version": __version__,
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.all_passed,
        }
        if self.wall_time is not None:
            out["wall_time_seconds"] = self.wall_time
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def thread_count() -> int:
    raw = os.environ.get("MOYAL_M3_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_checks(thunks):
    """Run check thunks (each -> CheckRecord or list of records), in order.

    Thunks are independent and deterministic, so running them on a pool
    (capped by MOYAL_M3_THREADS) cannot change the report bytes; results
    are collected in submission order.
    """
    workers = thread_count()
    if workers == 1:
        results = [t() for t in thunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: t(), thunks))
    flat = []
    for r in results:
        if isinstance(r, CheckRecord):
            flat.append(r)
        else:
            flat.extend(r)
    return flat


def write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
