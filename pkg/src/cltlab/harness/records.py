"""Experiment records, rate fits and their on-disk formats."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

CSV_FIELDS = ("spec_id", "d", "n", "p", "seed", "method", "wp", "se", "sqrtn_wp", "bound_total")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class ExperimentRecord:
    spec_id: str
    d: int
    n: int
    p: float
    seed: int
    method: str
    wp_estimate: float
    std_error: Optional[float] = None
    bound_total: Optional[float] = None
    timestamp: str = field(default_factory=_now)

    @property
    def sqrt_n_scaled(self) -> float:
        return math.sqrt(self.n) * self.wp_estimate

    def row(self) -> dict:
        return {"spec_id": self.spec_id, "d": self.d, "n": self.n, "p": self.p, "seed": self.seed,
                "method": self.method, "wp": self.wp_estimate, "se": self.std_error,
                "sqrtn_wp": self.sqrt_n_scaled, "bound_total": self.bound_total}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sqrt_n_scaled"] = self.sqrt_n_scaled
        return out


@dataclass(frozen=True)
class RateFit:
    """Plateau constant and log-log slope of ``W_p`` against ``n``.

    The constant is the mean of ``sqrt(n) W`` over the upper half of the grid
    (``ceil(N/2)`` largest ``n``).
    """

    records: tuple
    fitted_constant: float
    fitted_slope: float
    reference_constant: Optional[float] = None
    relative_gap: Optional[float] = None
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Sequence[ExperimentRecord], reference: Optional[float] = None,
                     extras: Optional[dict] = None) -> "RateFit":
        recs = sorted(records, key=lambda r: r.n)
        if len(recs) < 4:
            raise ValueError(f"a rate fit needs at least 4 grid points, got {len(recs)}")
        ns = np.array([r.n for r in recs], dtype=float)
        ws = np.array([r.wp_estimate for r in recs])
        if np.any(ws <= 0):
            raise ValueError("non-positive W estimate in rate fit")
        top = recs[len(recs) // 2:]
        const = float(np.mean([r.sqrt_n_scaled for r in top]))
        slope = float(np.polyfit(np.log(ns), np.log(ws), 1)[0])
        if not math.isfinite(slope):
            raise ValueError("rate-fit slope is not finite")
        gap = None
        if reference is not None and reference > 0:
            gap = (const - reference) / reference
        return cls(tuple(recs), const, slope, reference, gap, dict(extras or {}))

    def summary(self) -> dict:
        return {"fitted_constant": self.fitted_constant, "fitted_slope": self.fitted_slope,
                "reference_constant": self.reference_constant, "relative_gap": self.relative_gap,
                "n_points": len(self.records), **self.extras}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(records: Sequence[ExperimentRecord], timestamp: bool = False) -> str:
    cols = CSV_FIELDS + (("timestamp",) if timestamp else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = r.row()
        if timestamp:
            row["timestamp"] = r.timestamp
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def rate_table(records: Sequence[ExperimentRecord]) -> str:
    """Two whitespace-separated columns, ``log2 n`` and ``sqrt(n) W``, sorted by ``n``."""
    lines = ["# log2_n sqrtn_wp"]
    for r in sorted(records, key=lambda r: r.n):
        lines.append(f"{math.log2(r.n)!r} {r.sqrt_n_scaled!r}")
    return "\n".join(lines) + "\n"


def emit_outputs(records: Sequence[ExperimentRecord], path, timestamp: bool = False,
                 fit: Optional[RateFit] = None) -> dict[str, Path]:
    """Write ``<path>.csv``, ``<path>.json`` and ``<path>.dat``; returns the written paths."""
    stem = Path(path)
    out = {"csv": stem.with_suffix(".csv"), "json": stem.with_suffix(".json"), "dat": stem.with_suffix(".dat")}
    payload = {"records": [r.to_dict() if timestamp else {k: v for k, v in r.to_dict().items() if k != "timestamp"}
                           for r in records]}
    if fit is not None:
        payload["fit"] = fit.summary()
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        out["csv"].write_text(records_csv(records, timestamp))
        out["json"].write_text(json.dumps(payload, indent=1, allow_nan=True) + "\n")
        out["dat"].write_text(rate_table(records))
    except OSError as exc:
        raise OSError(f"cannot write outputs under {stem.parent}: {exc.strerror}") from exc
    return out


def read_records_json(path) -> list[ExperimentRecord]:
    data = json.loads(Path(path).read_text())
    keep = {f for f in ExperimentRecord.__dataclass_fields__}
    return [ExperimentRecord(**{k: v for k, v in row.items() if k in keep}) for row in data["records"]]
