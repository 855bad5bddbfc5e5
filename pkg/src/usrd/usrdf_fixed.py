"""Universal rate-distortion for a fixed sampling set A.

Bayesian: the prior-weighted distortion budget is split across the ambiguity
cells of A and the worst cell rate is minimized.  The optimal split equalizes
cell rates at a common level ``r`` (cells that cannot reach ``r`` sit at their
minimum distortion), so the minmax is a one-dimensional root find in ``r``.

NonBayesian: every parameter in a cell must meet the distortion target through
one shared test channel; the rate is the worst cell's constrained minimum.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .errors import DeltaOutOfRange, InfeasibleDelta, NoFeasibleSet
from .rd_core import TOL_FEAS, RateDistortionProblem, RDPoint, min_max_distortion, rd_multi
from .source_model import (
    SourceModel,
    as_subset,
    modified_distortion,
    per_tau_distortion,
    subsets_of_size,
    theta1_partition,
)

BAYES = "bayes"
NONBAYES = "nonbayes"


def normalize_setting(setting) -> str:
    s = str(setting).lower().replace("-", "").replace("_", "")
    if s in ("bayes", "bayesian"):
        return BAYES
    if s in ("nonbayes", "nonbayesian"):
        return NONBAYES
    raise ValueError(f"unknown setting {setting!r}; use 'bayes' or 'nonbayes'")


@dataclass
class ThresholdAllocation:
    """Per-cell distortion budgets and the rate each cell needs at its budget."""

    cells: tuple
    weights: np.ndarray
    deltas: np.ndarray
    rates: np.ndarray
    rate: float

    @property
    def expected_delta(self) -> float:
        return float(self.weights @ self.deltas)

    def as_dict(self) -> dict:
        return {
            "cells": [list(c) for c in self.cells],
            "weights": self.weights.tolist(),
            "deltas": self.deltas.tolist(),
            "rates": self.rates.tolist(),
            "rate": self.rate,
        }


def minmax_allocation(problems: list, weights, Delta: float, cells=None) -> ThresholdAllocation:
    """min over {delta_c : sum w_c delta_c <= Delta} of max_c R_c(delta_c).

    ``problems`` are curve objects exposing ``delta_min``, ``delta_max``,
    ``rate_floor``, ``distortion_at_rate`` and ``rate``.  Caller guarantees
    ``sum w_c delta_min_c <= Delta``.
    """
    w = np.asarray(weights, dtype=float)
    cells = tuple(cells) if cells is not None else tuple(range(len(problems)))
    lo = np.array([pr.delta_min for pr in problems])
    hi = np.array([pr.delta_max for pr in problems])
    if Delta >= w @ hi - TOL_FEAS:
        return ThresholdAllocation(cells, w, hi.copy(), np.zeros(len(problems)), 0.0)

    def alloc(r):
        return np.array([pr.distortion_at_rate(r) for pr in problems])

    r_top = max(pr.rate_floor for pr in problems)
    if w @ lo >= Delta:
        r_star = r_top
    else:
        r_star = brentq(lambda r: w @ alloc(r) - Delta, 0.0, r_top, xtol=1e-12, rtol=1e-12, maxiter=200)
    deltas = alloc(r_star)
    # spend any slack left by the root tolerance, keeping the budget exact
    slack = Delta - w @ deltas
    if slack < 0:
        room = deltas - lo
        if room @ w > 0:
            deltas = deltas - room * min(1.0, -slack / (room @ w))
    rates = np.array([pr.rate(d) for pr, d in zip(problems, deltas)])
    return ThresholdAllocation(cells, w, deltas, rates, float(rates.max()))


class FixedSetSolver:
    """Per-cell curves for a fixed sampling set, shared across settings and levels."""

    def __init__(self, model: SourceModel, A):
        self.model = model
        self.A = as_subset(A, model.m)
        self.partition = theta1_partition(model, self.A)
        self.cells = self.partition.cells
        self.weights = np.asarray(self.partition.induced_prior)
        self.px = [model.marginal(self.A, cell) for cell in self.cells]
        self.bayes = [
            RateDistortionProblem(px, modified_distortion(model, cell, self.A))
            for px, cell in zip(self.px, self.cells)
        ]
        self.tau_tables = [
            [per_tau_distortion(model, t, self.A).table for t in cell] for cell in self.cells
        ]
        self._nb_bounds = None

    def cell_index(self, cell) -> int:
        if isinstance(cell, (int, np.integer)):
            return int(cell)
        cell = tuple(sorted(cell))
        for c, cc in enumerate(self.cells):
            if tuple(cc) == cell:
                return c
        raise ValueError(f"{cell} is not a cell of the partition for A={self.A}")

    def bounds(self, setting) -> tuple[float, float]:
        setting = normalize_setting(setting)
        if setting == BAYES:
            lo = sum(w * pr.delta_min for w, pr in zip(self.weights, self.bayes))
            hi = sum(w * pr.delta_max for w, pr in zip(self.weights, self.bayes))
            return float(lo), float(hi)
        if self._nb_bounds is None:
            lo = max(min_max_distortion(px, tabs)[0] for px, tabs in zip(self.px, self.tau_tables))
            hi = max(
                float(np.min(np.max([px @ t for t in tabs], axis=0)))
                for px, tabs in zip(self.px, self.tau_tables)
            )
            self._nb_bounds = (float(lo), float(hi))
        return self._nb_bounds

    def rho(self, cell, delta: float, setting) -> RDPoint:
        c = self.cell_index(cell)
        if normalize_setting(setting) == BAYES:
            return self.bayes[c].point(delta)
        return rd_multi(self.px[c], [(t, delta) for t in self.tau_tables[c]])

    def rate(self, Delta: float, setting) -> tuple[float, ThresholdAllocation | None]:
        setting = normalize_setting(setting)
        lo, hi = self.bounds(setting)
        if Delta < lo - TOL_FEAS:
            raise DeltaOutOfRange(f"Delta={Delta:.6g} below minimum {lo:.6g} for A={self.A} ({setting})")
        if setting == BAYES:
            alloc = minmax_allocation(self.bayes, self.weights, max(Delta, lo), self.cells)
            return alloc.rate, alloc
        if Delta >= hi:
            return 0.0, None
        rates = []
        for c in range(len(self.cells)):
            try:
                rates.append(self.rho(c, max(Delta, lo), NONBAYES).rate)
            except InfeasibleDelta:
                raise DeltaOutOfRange(f"Delta={Delta:.6g} infeasible for A={self.A}") from None
        return float(max(rates)), None


@lru_cache(maxsize=128)
def fixed_set_solver(model: SourceModel, A: tuple) -> FixedSetSolver:
    return FixedSetSolver(model, A)


def _solver(model, A) -> FixedSetSolver:
    return fixed_set_solver(model, as_subset(A, model.m))


def rho_fs(model: SourceModel, A, cell, delta: float, setting) -> RDPoint:
    """Per-cell constrained minimum of I(X_A ; Y_B) at distortion ``delta``."""
    return _solver(model, A).rho(cell, delta, setting)


def usrdf_fs(model: SourceModel, A, Delta: float, setting) -> tuple[float, ThresholdAllocation | None]:
    """Universal rate for fixed set A; Bayesian calls also return the allocation."""
    return _solver(model, A).rate(float(Delta), setting)


def delta_bounds_fs(model: SourceModel, A, setting) -> tuple[float, float]:
    return _solver(model, A).bounds(setting)


def best_fixed_set(model: SourceModel, k: int, Delta: float, setting, tol: float = 1e-9):
    """Best k-subset at ``Delta`` (lexicographically first among ties)."""
    best, best_rate = None, np.inf
    for A in subsets_of_size(model.m, k):
        try:
            r, _ = usrdf_fs(model, A, Delta, setting)
        except DeltaOutOfRange:
            continue
        if r < best_rate - tol:
            best, best_rate = A, r
    if best is None:
        raise NoFeasibleSet(f"no {k}-subset reaches Delta={Delta:.6g}")
    return best, float(best_rate)
