"""Deterministic CSV/JSON writers.

Floats are written with ``%.17g`` so every value round-trips to the same
binary64 number; rows are emitted in canonical point/schedule order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def coord_header(dim: int) -> list[str]:
    return [f"coord_{j + 1}" for j in range(dim)]


def series_rows(points, series_list):
    """Rows ``point_id, coords..., N, re, im, delta`` for per-point series."""
    for pid, (pt, s) in enumerate(zip(points, series_list)):
        prev = None
        for N, v in s.entries:
            delta = "" if prev is None else abs(v - prev)
            yield [pid, *pt, N, v.real, v.imag, delta]
            prev = v


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class RunReport:
    metadata: dict
    files: dict[str, Path] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, value: float, threshold: float, passed: bool | None = None) -> Check:
        c = Check(name, float(value), float(threshold), bool(value <= threshold if passed is None else passed))
        self.checks.append(c)
        return c

    def write_summary(self, prefix: str) -> None:
        path = Path(f"{prefix}-summary.csv")
        write_csv(path, ["check", "value", "threshold", "passed"],
                  [[c.name, c.value, c.threshold, c.passed] for c in self.checks])
        self.files["summary"] = path
        meta = dict(self.metadata)
        meta["checks"] = [
            {"name": c.name, "value": fmt(c.value), "threshold": fmt(c.threshold), "passed": c.passed}
            for c in self.checks
        ]
        meta["passed"] = self.passed
        meta["files"] = {k: Path(v).name for k, v in sorted(self.files.items())}
        rpath = Path(f"{prefix}-report.json")
        rpath.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        self.files["report"] = rpath
