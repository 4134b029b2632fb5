"""Cohort statistics over per-case PCAT measurements, plus mask overlap.

Statistics are taken over cases whose status is ``ok``; every other status
is only tallied. Standard deviations use the population divisor N. Records
are sorted by case id before any accumulation and sums use ``math.fsum``,
so the report does not depend on the order cases finished in.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pcat import PcatMeasurement
from .volume_io import BinaryMask

SCHEMA_VERSION = "1.0"
TERRITORIES = ("rpcat", "lpcat")
OK, TRUNCATED = "ok", "truncated"


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """Dice overlap 2|A∩B| / (|A|+|B|); two empty masks score 1.0."""
    a.check_geometry(b, "dice operands")
    na, nb = int(np.count_nonzero(a.data)), int(np.count_nonzero(b.data))
    if na + nb == 0:
        return 1.0
    inter = int(np.count_nonzero(a.data & b.data))
    return 2.0 * inter / (na + nb)


def pearson_r2(x, y) -> float | None:
    """Squared Pearson correlation, or None when either series is constant."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least two paired values")
    n = x.size
    dx = x - math.fsum(x) / n
    dy = y - math.fsum(y) / n
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = math.fsum(dx * dy)
    return min(1.0, sxy * sxy / (sxx * syy))


@dataclass(frozen=True, eq=False)
class CaseRecord:
    """Outcome of one case: measurements that succeeded and errors that did not."""

    case_id: str
    rpcat: PcatMeasurement | None = None
    lpcat: PcatMeasurement | None = None
    errors: dict[str, dict] = field(default_factory=dict)

    @property
    def status(self) -> str:
        # first failure wins, in case-level then territory order
        for key in ("case",) + TERRITORIES:
            if key in self.errors:
                return self.errors[key]["error_class"]
        if any(m is not None and m.truncated for m in (self.rpcat, self.lpcat)):
            return TRUNCATED
        return OK

    def measurement(self, territory: str) -> PcatMeasurement | None:
        return getattr(self, territory)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "status": self.status,
            "errors": self.errors,
            **{t: (m.to_dict() if (m := self.measurement(t)) is not None else None) for t in TERRITORIES},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseRecord":
        meas = {t: PcatMeasurement.from_dict(d[t]) if d.get(t) else None for t in TERRITORIES}
        return cls(str(d["case_id"]), errors=dict(d.get("errors") or {}), **meas)


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    n = len(values)
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / n)
    return mean, sd


def five_number(values: list[float]) -> dict | None:
    """Box-plot summary: min, quartiles (linear interpolation), max."""
    if not values:
        return None
    q = np.percentile(np.asarray(values, dtype=np.float64), [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(v) for v in q)))


def _r2_or_none(x: list[float], y: list[float]) -> float | None:
    return pearson_r2(x, y) if len(x) >= 2 else None


@dataclass(frozen=True, eq=False)
class CohortReport:
    cases: list[CaseRecord]
    status_counts: dict[str, int]
    territories: dict[str, dict]
    r2: dict[str, float | None]
    histograms: dict[str, dict]

    @property
    def n_total(self) -> int:
        return len(self.cases)

    @property
    def n_ok(self) -> int:
        return self.status_counts.get(OK, 0)

    def to_dict(self) -> dict:
        return {
            "n_cases": self.n_total,
            "status_counts": self.status_counts,
            "statistics": {
                "sd_divisor": "N (population)",
                "included_status": OK,
                "territories": self.territories,
                "r2": self.r2,
            },
            "histograms": self.histograms,
            "cases": [c.to_dict() for c in self.cases],
        }


def aggregate(records: list[CaseRecord]) -> CohortReport:
    """Cohort statistics over the ``ok`` records; other statuses are counted only."""
    if not records:
        raise ValueError("aggregate needs at least one record")
    ids = [r.case_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate case id in records")
    cases = sorted(records, key=lambda r: r.case_id)

    counts: dict[str, int] = {}
    for r in cases:
        counts[r.status] = counts.get(r.status, 0) + 1
    status_counts = dict(sorted(counts.items()))
    ok = [r for r in cases if r.status == OK]

    territories: dict[str, dict] = {}
    histograms: dict[str, dict] = {}
    r2: dict[str, float | None] = {}
    for t in TERRITORIES:
        meas = [r.measurement(t) for r in ok if r.measurement(t) is not None]
        att = [m.mean_attenuation for m in meas if m.mean_attenuation is not None]
        vol = [m.volume_ml for m in meas]
        att_mean, att_sd = _mean_sd(att)
        vol_mean, vol_sd = _mean_sd(vol)
        territories[t] = {
            "n": len(meas),
            "n_attenuation": len(att),
            "attenuation_hu": {"mean": att_mean, "sd": att_sd, "box": five_number(att)},
            "volume_ml": {"mean": vol_mean, "sd": vol_sd, "box": five_number(vol)},
        }
        paired = [m for m in meas if m.mean_attenuation is not None]
        r2[f"{t}_attenuation_vs_volume"] = _r2_or_none(
            [m.mean_attenuation for m in paired], [m.volume_ml for m in paired]
        )
        histograms[t] = _pool_histograms(meas)

    both = [
        (r.rpcat.mean_attenuation, r.lpcat.mean_attenuation)
        for r in ok
        if r.rpcat is not None and r.lpcat is not None
        and r.rpcat.mean_attenuation is not None and r.lpcat.mean_attenuation is not None
    ]
    r2["rpcat_vs_lpcat_attenuation"] = _r2_or_none([a for a, _ in both], [b for _, b in both])
    return CohortReport(cases, status_counts, territories, dict(sorted(r2.items())), histograms)


def _pool_histograms(meas: list[PcatMeasurement]) -> dict:
    if not meas:
        return {"bin_edges_hu": [], "counts": []}
    edges = meas[0].bin_edges
    total = np.zeros(len(edges) - 1, dtype=np.int64)
    for m in meas:
        if len(m.bin_edges) != len(edges) or not np.array_equal(m.bin_edges, edges):
            raise ValueError("cannot pool histograms with different bin edges")
        total += m.histogram
    return {"bin_edges_hu": [float(e) for e in edges], "counts": [int(c) for c in total]}


def dump_json(obj: dict, path: str | Path) -> None:
    """Stable JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_report(report: CohortReport, out_dir: str | Path, header: dict | None = None,
                 metadata: dict | None = None) -> dict[str, Path]:
    """Write report.json plus cases.csv, histograms.csv and boxplots.csv.

    ``header`` goes in the JSON top level (tool version, parameters) and must
    be reproducible; run-specific values such as timestamps belong in
    ``metadata``, which is kept in its own block.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "cases": out / "cases.csv",
        "histograms": out / "histograms.csv",
        "boxplots": out / "boxplots.csv",
    }
    doc = {"schema_version": SCHEMA_VERSION, **(header or {}), "report": report.to_dict(),
           "metadata": metadata or {}}
    dump_json(doc, paths["json"])
    _write_cases_csv(report, paths["cases"])
    _write_histograms_csv(report, paths["histograms"])
    _write_boxplots_csv(report, paths["boxplots"])
    return paths


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


CASE_COLUMNS = ["case_id", "status", "error_class", "error_message"] + [
    f"{t}_{q}" for t in TERRITORIES
    for q in ("mean_attenuation_hu", "volume_ml", "voxel_count", "region_voxels", "truncated")
]


def case_row(r: CaseRecord) -> list[str]:
    err = next((r.errors[k] for k in ("case",) + TERRITORIES if k in r.errors), {})
    row = [r.case_id, r.status, err.get("error_class"), err.get("message")]
    for t in TERRITORIES:
        m = r.measurement(t)
        row += [None] * 5 if m is None else [
            m.mean_attenuation, m.volume_ml, m.voxel_count, m.region_voxels, m.truncated
        ]
    return [_fmt(v) for v in row]


def _write_cases_csv(report: CohortReport, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CASE_COLUMNS)
        for r in report.cases:
            w.writerow(case_row(r))


def _write_histograms_csv(report: CohortReport, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["territory", "bin_lo_hu", "bin_hi_hu", "count"])
        for t in TERRITORIES:
            h = report.histograms[t]
            edges = h["bin_edges_hu"]
            for lo, hi, c in zip(edges[:-1], edges[1:], h["counts"]):
                w.writerow([t, _fmt(lo), _fmt(hi), c])


def _write_boxplots_csv(report: CohortReport, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["territory", "quantity", "n", "mean", "sd", "min", "q1", "median", "q3", "max"])
        for t in TERRITORIES:
            s = report.territories[t]
            for q in ("attenuation_hu", "volume_ml"):
                box = s[q]["box"] or {}
                n = s["n_attenuation"] if q == "attenuation_hu" else s["n"]
                w.writerow([t, q, n, _fmt(s[q]["mean"]), _fmt(s[q]["sd"])]
                           + [_fmt(box.get(k)) for k in ("min", "q1", "median", "q3", "max")])
