"""Decay-slope fitting, run classification, sweeps and run artifacts."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import exponents as ex
from .dynamics import BLOWUP, COMPLETED, DT_COLLAPSE, Datum, RunConfig, RunRecord, run
from .geometry import ManifoldSpec

MATCH = "match"
MISMATCH = "mismatch"
INCONCLUSIVE = "inconclusive"

GLOBAL = "global"
UNDECIDED = "undecided"

SWEEP_AXES = ("amplitude", "sigma", "p", "m", "N")

MIN_FIT_POINTS = 8


class FitError(ValueError):
    pass


def fmt(x) -> str:
    """Serialize a float with 17 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    return format(float(x), ".17g")


def fit_decay_slope(series: Iterable[Tuple[float, float]],
                    window: Tuple[float, float]) -> Tuple[float, float, float]:
    """Least-squares fit of ``log value`` against ``log t`` inside ``window``.

    Returns ``(slope, stderr, intercept)``.
    """
    lo, hi = window
    pts = [(t, v) for t, v in series if lo <= t <= hi]
    if len(pts) < MIN_FIT_POINTS:
        raise FitError(f"need >= {MIN_FIT_POINTS} points in window, got {len(pts)}")
    t = np.array([p[0] for p in pts], dtype=float)
    v = np.array([p[1] for p in pts], dtype=float)
    if np.any(t <= 0) or np.any(v <= 0):
        raise FitError("log-log fit needs positive times and values")
    x, y = np.log(t), np.log(v)
    xm = x - x.mean()
    sxx = float(np.dot(xm, xm))
    if sxx == 0:
        raise FitError("window contains a single distinct time")
    slope = float(np.dot(xm, y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = len(pts) - 2
    stderr = math.sqrt(float(np.dot(resid, resid)) / dof / sxx)
    return slope, stderr, intercept


@dataclass
class DecayReport:
    family: str
    q: float
    fitted_slope: float
    stderr: float
    predicted: float
    window: Tuple[float, float]
    verdict: str


def predicted_decay(family: str, q: float, params: ex.ProblemParams,
                    datum_exponent: Optional[float] = None) -> float:
    """Predicted decay exponent of ``||u(t)||_q`` for an estimate family.

    ``thm1i`` is the L^1 -> L^inf rate ``alpha``; ``lemma3`` is the
    L^r -> L^inf time exponent with ``r = datum_exponent``; the remaining
    families defer to :func:`plaplab.exponents.smoothing_pair` (``thm3`` with
    ``q = inf`` returns ``beta_qs`` at ``q = s``).
    """
    if family == "thm1i":
        if not math.isinf(q):
            raise ex.ParameterError("thm1i predicts the L^inf rate only")
        return ex.alpha_smoothing(params)
    if family == "lemma3":
        return ex.linfty_bound_exponents(datum_exponent if datum_exponent else 1.0, params)[0]
    if family == "thm3" and math.isinf(q):
        return ex.beta_qs(datum_exponent, datum_exponent, params)
    return ex.smoothing_pair(family, datum_exponent, q, params)[0]


def _verdict(slope, stderr, predicted):
    tol = max(0.1 * abs(predicted), 2 * stderr)
    return MATCH if abs(slope + predicted) <= tol else MISMATCH


def default_window(record: RunRecord) -> Tuple[float, float]:
    t_hi = record.t_stop
    return t_hi / 10.0, t_hi


def smoothing_report(record: RunRecord, families: Sequence, params: Optional[ex.ProblemParams] = None,
                     window: Optional[Tuple[float, float]] = None) -> List[DecayReport]:
    """Compare fitted decay slopes of recorded norms with predicted exponents.

    ``families`` holds ``(family, q)`` or ``(family, q, datum_exponent)`` tuples.
    """
    if record.status != COMPLETED:
        raise ex.ParameterError(f"record did not complete (status {record.status})")
    params = params or record.config.params
    window = window or default_window(record)
    out = []
    for item in families:
        family, q = item[0], float(item[1])
        extra = item[2] if len(item) > 2 else None
        predicted = predicted_decay(family, q, params, extra)
        try:
            slope, err, _ = fit_decay_slope(zip(*record.column(q)), window)
        except FitError:
            out.append(DecayReport(family, q, math.nan, math.nan, predicted, window, INCONCLUSIVE))
            continue
        out.append(DecayReport(family, q, slope, err, predicted, window,
                               _verdict(slope, err, predicted)))
    return out


def classify_record(record: RunRecord) -> str:
    if record.status == BLOWUP:
        return BLOWUP
    if record.status == COMPLETED and record.max_s <= 1.0:
        return GLOBAL
    return UNDECIDED


def classify_run(config: RunConfig) -> str:
    """``global`` if the run completes with ``S(t) <= 1`` throughout,
    ``blowup`` on a blow-up status (exploratory), ``undecided`` otherwise."""
    return classify_record(run(config))


# --- artifacts --------------------------------------------------------------


def series_header(config: RunConfig) -> List[str]:
    extra = [f"l{q:g}" for q in config.norm_qs[2:]]
    return ["t", "dt", "linf", "l1", *extra, "s_monitor"]


def write_series(record: RunRecord, path: str) -> None:
    qs = record.config.norm_qs
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(series_header(record.config))
        for row in record.series:
            w.writerow([fmt(row.t), fmt(row.dt), *(fmt(row.norms[q]) for q in qs),
                        fmt(row.s_monitor)])


def manifest(record: RunRecord, config_echo: Optional[dict] = None) -> dict:
    from .config import config_to_flat

    out = {
        "status": record.status,
        "exploratory": record.status == BLOWUP,
        "config": config_echo if config_echo is not None else config_to_flat(record.config),
        "clipped_mass": fmt(record.clipped_mass),
        "steps": record.steps,
        "rejections": record.rejections,
        "s_max": fmt(record.max_s),
        "wallclock_s": record.wallclock_s,
    }
    if record.status == BLOWUP:
        out["t_star"] = fmt(record.t_stop)
    else:
        out["t_end"] = fmt(record.t_stop)
    return out


def write_run(record: RunRecord, directory: str, config_echo: Optional[dict] = None) -> dict:
    os.makedirs(directory, exist_ok=True)
    write_series(record, os.path.join(directory, "series.csv"))
    man = manifest(record, config_echo)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return man


# --- sweeps -----------------------------------------------------------------


def _apply(base: RunConfig, axis: str, value) -> RunConfig:
    params = base.params
    if axis == "amplitude":
        return replace(base, datum=replace(base.datum, amplitude=float(value)))
    if axis == "sigma":
        return replace(base, params=replace(params, sigma=float(value)))
    if axis == "p":
        return replace(base, params=replace(params, p=float(value)))
    if axis == "m":
        return replace(base, params=replace(params, m=float(value)))
    if axis == "N":
        n = int(value)
        if n != value:
            raise ValueError("N must be an integer")
        return replace(base, params=replace(params, N=n),
                       manifold=ManifoldSpec(base.manifold.kind, n))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _sweep_one(job):
    idx, axis, value, base, directory = job
    row = {"index": idx, "axis": axis, "value": value, "status": "error", "t_star": None,
           "gate": None, "slope_linf": None, "s_max": None, "label": "", "error": ""}
    try:
        cfg = _apply(base, axis, value)
        row["gate"] = cfg.params.above_fujita
        rec = run(cfg)
        write_run(rec, directory)
        row.update(status=rec.status, s_max=rec.max_s, label=classify_record(rec))
        if rec.status == BLOWUP:
            row["t_star"] = rec.t_stop
            row["label"] = "blowup (exploratory)"
        elif rec.status == COMPLETED:
            try:
                row["slope_linf"] = fit_decay_slope(zip(*rec.column(math.inf)),
                                                    default_window(rec))[0]
            except FitError:
                pass
    except Exception as exc:  # per-run failures are recorded, the sweep goes on
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


INDEX_COLUMNS = ["index", "axis", "value", "status", "label", "t_star", "gate",
                 "slope_linf", "s_max", "error"]


def sweep(base: RunConfig, axis: str, values: Sequence, out_dir: str,
          workers: int = 1) -> List[dict]:
    """Run one simulation per value of ``axis`` and write ``runs/`` artifacts.

    Each run writes only ``runs/<id>/``; ``runs/index.csv`` is written once at
    the end.  Never bisects.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    runs_dir = os.path.join(out_dir, "runs")
    os.makedirs(runs_dir, exist_ok=True)
    jobs = [(i, axis, v, base, os.path.join(runs_dir, f"{i:04d}")) for i, v in enumerate(values)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    with open(os.path.join(runs_dir, "index.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INDEX_COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in INDEX_COLUMNS])
    return rows


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, float):
        return fmt(v)
    return str(v)
