"""Curve sweeps, cross-sampler comparisons and shape audits.

A sweep evaluates one sampler class at every point of a distortion grid and
keeps out-of-range points with a status marker instead of dropping them:

* ``ok``         -- solved inside the feasible range
* ``above_max``  -- beyond the largest useful distortion; rate is 0
* ``below_min``  -- infeasible; rate is NaN (treated as +inf in comparisons)
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleDelta, NoFeasibleSet
from .rd_core import TOL_CONVEX, TOL_FEAS, TOL_GAP, RDCurve, RDPoint
from .source_model import SourceModel, as_subset, subsets_of_size
from .usrdf_fixed import BAYES, NONBAYES, best_fixed_set, delta_bounds_fs, normalize_setting, usrdf_fs
from .usrdf_irs import delta_bounds_irs, usrdf_irs
from .usrdf_mrs import delta_bounds_mrs, usrdf_mrs

OK, BELOW_MIN, ABOVE_MAX = "ok", "below_min", "above_max"
CSV_HEADER = ("delta", "rate", "status", "sampler", "setting")
SAMPLER_ORDER = ("mrs", "irs", "bestfs")


@dataclass(frozen=True)
class SamplerSpec:
    """Which sampler class to evaluate: ``fs`` (with a set), ``bestfs``, ``irs`` or ``mrs``."""

    kind: str
    A: tuple | None = None
    k: int | None = None

    @classmethod
    def parse(cls, text: str, k: int | None = None) -> "SamplerSpec":
        text = str(text).strip().lower()
        if text.startswith("fs:"):
            A = tuple(int(v) for v in text[3:].replace("{", "").replace("}", "").split(",") if v.strip())
            if not A:
                raise ValueError("fs sampler needs a nonempty set, e.g. fs:1,2")
            return cls("fs", tuple(sorted(set(A))), len(set(A)))
        if text in ("bestfs", "irs", "mrs"):
            return cls(text, None, None if k is None else int(k))
        raise ValueError(f"unknown sampler {text!r}; use fs:<set>, bestfs, irs or mrs")

    @property
    def label(self) -> str:
        return "fs:" + ",".join(map(str, self.A)) if self.kind == "fs" else self.kind

    def need_k(self) -> int:
        if self.k is None:
            raise ValueError(f"sampler {self.kind} needs k")
        return int(self.k)

    def bounds(self, model: SourceModel, setting) -> tuple[float, float]:
        if self.kind == "fs":
            return delta_bounds_fs(model, as_subset(self.A, model.m), setting)
        k = self.need_k()
        if self.kind == "irs":
            return delta_bounds_irs(model, k, setting)
        if self.kind == "mrs":
            return delta_bounds_mrs(model, k, setting)
        per_set = [delta_bounds_fs(model, A, setting) for A in subsets_of_size(model.m, k)]
        return min(b[0] for b in per_set), min(b[1] for b in per_set)

    def solve(self, model: SourceModel, Delta: float, setting) -> tuple[float, dict]:
        """Rate at ``Delta`` plus a JSON-friendly description of the optimizer."""
        if self.kind == "fs":
            rate, alloc = usrdf_fs(model, self.A, Delta, setting)
            return rate, {"A": list(self.A), "allocation": alloc.as_dict() if alloc else None}
        k = self.need_k()
        if self.kind == "bestfs":
            A, rate = best_fixed_set(model, k, Delta, setting)
            return rate, {"A": list(A)}
        if self.kind == "irs":
            rate, ps, alloc = usrdf_irs(model, k, Delta, setting)
            return rate, {"sampling": ps.as_dict(), "allocation": alloc.as_dict()}
        rate, policy = usrdf_mrs(model, k, Delta, setting)
        return rate, {"slots": policy.n_slots, "p_u": np.asarray(policy.p_u).tolist(),
                      "samplers": [w.as_dict(model.alphabets) for w in policy.samplers]}


def _spec(sampler, k=None) -> SamplerSpec:
    if isinstance(sampler, SamplerSpec):
        return sampler if sampler.k is not None or k is None else SamplerSpec(sampler.kind, sampler.A, int(k))
    return SamplerSpec.parse(sampler, k)


def sweep(model: SourceModel, sampler, setting, grid, k: int | None = None) -> RDCurve:
    """Evaluate a sampler class on every grid point; out-of-range points carry statuses."""
    spec = _spec(sampler, k)
    setting = normalize_setting(setting)
    lo, hi = spec.bounds(model, setting)
    points = []
    for delta in np.sort(np.asarray(grid, dtype=float).ravel()):
        delta = float(delta)
        if delta < lo - TOL_FEAS:
            points.append(RDPoint(delta, math.nan, status=BELOW_MIN))
            continue
        if delta > hi + TOL_FEAS:
            points.append(RDPoint(delta, 0.0, status=ABOVE_MAX))
            continue
        try:
            rate, info = spec.solve(model, delta, setting)
        except (InfeasibleDelta, NoFeasibleSet):
            points.append(RDPoint(delta, math.nan, status=BELOW_MIN))
            continue
        points.append(RDPoint(delta, max(float(rate), 0.0), status=OK, info=info))
    return RDCurve(points, {"sampler": spec.label, "k": spec.k, "setting": setting,
                            "delta_min": lo, "delta_max": hi})


# -- shape audit --------------------------------------------------------------
def _finite(curve: RDCurve) -> tuple[np.ndarray, np.ndarray]:
    d, r = curve.deltas, curve.rates
    keep = np.isfinite(r)
    order = np.argsort(d[keep], kind="stable")
    return d[keep][order], r[keep][order]


def shape_excess(curve: RDCurve) -> tuple[float, float]:
    """Largest increase between neighbours and largest chord violation (both >= 0)."""
    d, r = _finite(curve)
    mono = float(np.max(np.diff(r), initial=0.0)) if r.size > 1 else 0.0
    convex = 0.0
    for i in range(1, r.size - 1):
        span = d[i + 1] - d[i - 1]
        if span <= 0:
            continue
        lam = (d[i + 1] - d[i]) / span
        convex = max(convex, r[i] - (lam * r[i - 1] + (1 - lam) * r[i + 1]))
    return max(mono, 0.0), max(convex, 0.0)


def audit_shape(curve: RDCurve, tol_mono: float = TOL_GAP, tol_convex: float = TOL_CONVEX) -> list[dict]:
    """Flag increases above ``tol_mono`` and chord (midpoint-convexity) violations above ``tol_convex``.

    Infeasible (NaN) points are ignored; at least three points are required.
    """
    if len(curve) < 3:
        raise ValueError("shape audit needs at least 3 points")
    d, r = _finite(curve)
    label = curve.descriptor.get("sampler", "?"), curve.descriptor.get("setting", "?")
    out = []
    for i in range(r.size - 1):
        if r[i + 1] - r[i] > tol_mono:
            out.append({"check": "monotone", "sampler": label[0], "setting": label[1],
                        "delta": float(d[i + 1]), "magnitude": float(r[i + 1] - r[i])})
    for i in range(1, r.size - 1):
        span = d[i + 1] - d[i - 1]
        if span <= 0:
            continue
        lam = (d[i + 1] - d[i]) / span
        excess = r[i] - (lam * r[i - 1] + (1 - lam) * r[i + 1])
        if excess > tol_convex:
            out.append({"check": "convex", "sampler": label[0], "setting": label[1],
                        "delta": float(d[i]), "magnitude": float(excess)})
    return out


# -- comparisons --------------------------------------------------------------
@dataclass
class ComparisonReport:
    """Rates of every sampler class per setting on a shared grid, plus violations."""

    grid: np.ndarray
    k: int
    curves: dict = field(default_factory=dict)  # (setting, sampler) -> RDCurve
    violations: list = field(default_factory=list)
    tol: float = TOL_GAP

    def rates(self, setting, sampler) -> np.ndarray:
        """Rates with infeasible points as +inf."""
        r = self.curves[(normalize_setting(setting), sampler)].rates
        return np.where(np.isnan(r), np.inf, r)

    def strict_gaps(self, setting, better: str, worse: str, margin: float = 1e-3) -> list[float]:
        """Grid points where both are feasible and ``better`` beats ``worse`` by more than ``margin``."""
        a, b = self.rates(setting, better), self.rates(setting, worse)
        return [float(d) for d, x, y in zip(self.grid, a, b) if np.isfinite(x) and np.isfinite(y) and x < y - margin]

    def as_dict(self) -> dict:
        out = {"grid": self.grid.tolist(), "k": self.k, "tol": self.tol, "settings": {}, "violations": self.violations}
        for (setting, sampler), curve in self.curves.items():
            out["settings"].setdefault(setting, {})[sampler] = {
                "rates": [None if not np.isfinite(p.rate) else p.rate for p in curve.points],
                "status": [p.status for p in curve.points],
                "delta_min": curve.descriptor["delta_min"],
                "delta_max": curve.descriptor["delta_max"],
            }
        return out


def _settings(setting) -> list[str]:
    if str(setting).lower() == "both":
        return [BAYES, NONBAYES]
    return [normalize_setting(setting)]


def compare_samplers(model: SourceModel, k: int, setting, grid, tol: float = TOL_GAP,
                     audit: bool = True) -> ComparisonReport:
    """Sweep MRS, IRS and the best fixed set; check class nesting and setting ordering.

    Checks, per grid point (infeasible counts as +inf):
    ``R_mrs <= R_irs + tol``, ``R_irs <= R_bestfs + tol`` and, when both
    settings are requested, Bayesian <= nonBayesian + tol wherever both are
    feasible.  With ``audit`` each curve also goes through the shape audit.
    """
    grid = np.sort(np.asarray(grid, dtype=float).ravel())
    report = ComparisonReport(grid, int(k), tol=tol)
    settings = _settings(setting)
    for s in settings:
        for name in SAMPLER_ORDER:
            report.curves[(s, name)] = sweep(model, name, s, grid, k=k)
    for s in settings:
        for better, worse in zip(SAMPLER_ORDER[:-1], SAMPLER_ORDER[1:]):
            a, b = report.rates(s, better), report.rates(s, worse)
            for d, x, y in zip(grid, a, b):
                if x > y + tol:
                    report.violations.append({"check": f"{better}<={worse}", "setting": s, "delta": float(d),
                                              "magnitude": float(x - y) if np.isfinite(x - y) else math.inf})
    if len(settings) == 2:
        for name in SAMPLER_ORDER:
            a, b = report.rates(BAYES, name), report.rates(NONBAYES, name)
            for d, x, y in zip(grid, a, b):
                if np.isfinite(x) and np.isfinite(y) and x > y + tol:
                    report.violations.append({"check": "bayes<=nonbayes", "sampler": name, "delta": float(d),
                                              "magnitude": float(x - y)})
    if audit and grid.size >= 3:
        for curve in report.curves.values():
            report.violations.extend(audit_shape(curve, tol, tol))
    return report


# -- writers ------------------------------------------------------------------
def curve_rows(curve: RDCurve) -> list[tuple]:
    s, st = curve.descriptor.get("sampler", ""), curve.descriptor.get("setting", "")
    return [(p.delta, p.rate, p.status, s, st) for p in curve.points]


def write_csv(curves, fh=None) -> str:
    """CSV with header delta,rate,status,sampler,setting; returns the text (and writes to ``fh``)."""
    if isinstance(curves, RDCurve):
        curves = [curves]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for curve in curves:
        for delta, rate, status, s, st in curve_rows(curve):
            w.writerow((repr(float(delta)), "nan" if not np.isfinite(rate) else repr(float(rate)), status, s, st))
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def _clean(x):
    """Recursively convert numpy values to JSON types; non-finite floats become null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if np.isfinite(x) else None
    return x


def curve_as_dict(curve: RDCurve) -> dict:
    return {**curve.descriptor,
            "points": [{"delta": p.delta, "rate": None if not np.isfinite(p.rate) else p.rate,
                        "status": p.status, "info": p.info} for p in curve.points]}


def to_json(obj) -> str:
    if isinstance(obj, RDCurve):
        obj = curve_as_dict(obj)
    elif hasattr(obj, "as_dict"):
        obj = obj.as_dict()
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
