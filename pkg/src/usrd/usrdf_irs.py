"""Universal rate-distortion for an independent random sampler.

At each time a k-subset S is drawn from P_S independently of the source.
For fixed P_S the encoder sees (S, X_S); conditioning symbols are the pairs
(A, x_A) grouped by A, so a single grouped rate-distortion problem covers
every branch and the per-branch distortion split is optimized implicitly.
The outer minimization over P_S is a grid search followed by local polish.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ._linprog import solve_lp
from .errors import DeltaOutOfRange, InfeasibleDelta
from .rd_core import TOL_FEAS, RateDistortionProblem, RDPoint, min_max_distortion, rd_multi
from .source_model import (
    SourceModel,
    as_subset,
    modified_distortion,
    per_tau_distortion,
    subsets_of_size,
    theta2_partition,
)
from .usrdf_fixed import BAYES, NONBAYES, ThresholdAllocation, minmax_allocation, normalize_setting

GRID_STEP = 8
_PENALTY = 1e3


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    """A pmf over the k-subsets, listed in lexicographic order."""

    sets: tuple
    probs: np.ndarray

    def __post_init__(self):
        p = np.clip(np.asarray(self.probs, dtype=float), 0.0, None)
        if p.size != len(self.sets):
            raise ValueError("one probability per sampling set is required")
        if abs(p.sum() - 1.0) > 1e-6:
            raise ValueError(f"sampling pmf sums to {p.sum()}")
        object.__setattr__(self, "probs", p / p.sum())

    @classmethod
    def point_mass(cls, sets, A) -> "SamplingDistribution":
        sets = tuple(tuple(s) for s in sets)
        p = np.zeros(len(sets))
        p[sets.index(tuple(A))] = 1.0
        return cls(sets, p)

    @classmethod
    def uniform(cls, sets) -> "SamplingDistribution":
        return cls(tuple(tuple(s) for s in sets), np.full(len(sets), 1.0 / len(sets)))

    def support(self) -> list[int]:
        return [i for i, v in enumerate(self.probs) if v > 0]

    def as_dict(self) -> dict:
        return {"sets": [list(s) for s in self.sets], "probs": self.probs.tolist()}


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def simplex_grid(n: int, step: int = GRID_STEP) -> np.ndarray:
    """All points of the n-simplex with coordinates in multiples of 1/step."""
    pts = []

    def rec(prefix, left, slots):
        if slots == 1:
            pts.append(prefix + [left])
            return
        for v in range(left + 1):
            rec(prefix + [v], left - v, slots - 1)

    rec([], step, n)
    return np.array(pts, dtype=float) / step


class IrsSolver:
    """Caches per-(cell, subset) marginals and tables for a model and k."""

    def __init__(self, model: SourceModel, k: int):
        self.model, self.k = model, int(k)
        self.sets = tuple(subsets_of_size(model.m, k))
        self.partition = theta2_partition(model, k)
        self.cells = self.partition.cells
        self.weights = np.asarray(self.partition.induced_prior)
        self.px = [[model.marginal(A, cell) for A in self.sets] for cell in self.cells]
        self.dcell = [[modified_distortion(model, cell, A).table for A in self.sets] for cell in self.cells]
        self.dtau = [
            [[per_tau_distortion(model, t, A).table for A in self.sets] for t in cell] for cell in self.cells
        ]
        self._problems: dict = {}
        self._bounds: dict = {}

    def sampling(self, probs) -> SamplingDistribution:
        return SamplingDistribution(self.sets, probs)

    def _stack(self, c, probs, tables):
        idx = [i for i, v in enumerate(probs) if v > 1e-15]
        p = np.concatenate([probs[i] * self.px[c][i] for i in idx])
        D = np.concatenate([tables[i] for i in idx])
        g = np.concatenate([np.full(self.px[c][i].size, i) for i in idx])
        return p, D, g

    def bayes_problem(self, c: int, probs) -> RateDistortionProblem:
        probs = np.asarray(probs, dtype=float)
        key = (c, tuple(np.round(probs, 15)))
        pr = self._problems.get(key)
        if pr is None:
            if len(self._problems) > 4096:
                self._problems.clear()
            p, D, g = self._stack(c, probs, self.dcell[c])
            pr = self._problems[key] = RateDistortionProblem(p, D, g)
        return pr

    def rho(self, c: int, probs, delta: float, setting) -> RDPoint:
        probs = np.asarray(getattr(probs, "probs", probs), dtype=float)
        if normalize_setting(setting) == BAYES:
            return self.bayes_problem(c, probs).point(delta)
        cons = []
        for tabs in self.dtau[c]:
            p, D, g = self._stack(c, probs, tabs)
            cons.append((D, delta))
        return rd_multi(p, cons, groups=g)

    # -- bounds ---------------------------------------------------------------
    def bounds(self, setting) -> tuple[float, float]:
        setting = normalize_setting(setting)
        if setting not in self._bounds:
            self._bounds[setting] = self._bayes_bounds() if setting == BAYES else self._nonbayes_bounds()
        return self._bounds[setting]

    def _bayes_bounds(self):
        lo = min(
            sum(w * float(px[i] @ d[i].min(axis=1)) for w, px, d in zip(self.weights, self.px, self.dcell))
            for i in range(len(self.sets))
        )
        hi = min(
            sum(w * float((px[i] @ d[i]).min()) for w, px, d in zip(self.weights, self.px, self.dcell))
            for i in range(len(self.sets))
        )
        return float(lo), float(hi)

    def _nonbayes_bounds(self):
        hi = max(
            float(np.min(np.max([px[0] @ tabs[0] for tabs in dt], axis=0)))
            for px, dt in zip(self.px, self.dtau)
        )
        lo, _ = self.nonbayes_min_sampling()
        return float(lo), float(hi)

    def nonbayes_min_sampling(self) -> tuple[float, np.ndarray]:
        """Least worst-case distortion over P_S and per-branch channels, as one LP.

        Variables are P_S, t and the scaled channels V = P_S(A) W(y | A, x_A)
        for every cell; constraints are linear in (P_S, V).
        """
        nA = len(self.sets)
        blocks, offset = [], nA
        for c in range(len(self.cells)):
            for i in range(nA):
                n, ny = self.dcell[c][i].shape
                blocks.append((c, i, offset, n, ny))
                offset += n * ny
        nv = offset + 1
        A_eq, b_eq, A_ub = [], [], []
        row = np.zeros(nv)
        row[:nA] = 1.0
        A_eq.append(row)
        b_eq.append(1.0)
        for c, i, off, n, ny in blocks:
            for x in range(n):
                row = np.zeros(nv)
                row[off + x * ny: off + (x + 1) * ny] = 1.0
                row[i] = -1.0
                A_eq.append(row)
                b_eq.append(0.0)
        for c, cell in enumerate(self.cells):
            for tabs in self.dtau[c]:
                row = np.zeros(nv)
                for cc, i, off, n, ny in blocks:
                    if cc == c:
                        row[off: off + n * ny] = (self.px[c][i][:, None] * tabs[i]).ravel()
                row[-1] = -1.0
                A_ub.append(row)
        cost = np.zeros(nv)
        cost[-1] = 1.0
        bounds = [(0, None)] * (nv - 1) + [(None, None)]
        x, val = solve_lp(cost, np.array(A_ub), np.zeros(len(A_ub)), np.array(A_eq), np.array(b_eq), bounds)
        ps = np.clip(x[:nA], 0, None)
        return val, ps / ps.sum()

    # -- value at fixed P_S -----------------------------------------------------
    def min_delta(self, probs, setting) -> float:
        """Smallest feasible Delta for this P_S."""
        probs = np.asarray(probs, dtype=float)
        if normalize_setting(setting) == BAYES:
            return float(sum(w * self.bayes_problem(c, probs).delta_min for c, w in enumerate(self.weights)))
        worst = 0.0
        for c in range(len(self.cells)):
            tabs = []
            for dt in self.dtau[c]:
                p, D, g = self._stack(c, probs, dt)
                tabs.append(D)
            worst = max(worst, min_max_distortion(p, tabs)[0])
        return worst

    def value(self, probs, Delta: float, setting) -> tuple[float, ThresholdAllocation]:
        """Worst-cell rate at fixed P_S (Bayesian: with optimal threshold split)."""
        probs = np.asarray(probs, dtype=float)
        setting = normalize_setting(setting)
        if setting == BAYES:
            probs_list = [self.bayes_problem(c, probs) for c in range(len(self.cells))]
            lo = sum(w * pr.delta_min for w, pr in zip(self.weights, probs_list))
            if Delta < lo - TOL_FEAS:
                raise InfeasibleDelta(f"Delta below {lo:.6g} for this sampling pmf")
            alloc = minmax_allocation(probs_list, self.weights, max(Delta, lo), self.cells)
            return alloc.rate, alloc
        rates = np.array([self.rho(c, probs, Delta, NONBAYES).rate for c in range(len(self.cells))])
        alloc = ThresholdAllocation(self.cells, self.weights, np.full(len(self.cells), Delta), rates, float(rates.max()))
        return alloc.rate, alloc

    def _objective(self, setting, Delta):
        cache = {}

        def f(probs):
            probs = project_to_simplex(probs)
            key = tuple(np.round(probs, 12))
            if key not in cache:
                try:
                    cache[key] = self.value(probs, Delta, setting)[0]
                except InfeasibleDelta:
                    cache[key] = _PENALTY + _PENALTY * max(self.min_delta(probs, setting) - Delta, 0.0)
            return cache[key]

        return f

    def optimize(self, Delta: float, setting) -> tuple[float, SamplingDistribution, ThresholdAllocation]:
        setting = normalize_setting(setting)
        lo, hi = self.bounds(setting)
        if Delta < lo - TOL_FEAS:
            raise DeltaOutOfRange(f"Delta={Delta:.6g} below minimum {lo:.6g} for k={self.k} ({setting})")
        nA = len(self.sets)
        if Delta >= hi - TOL_FEAS:
            ps = np.zeros(nA)
            ps[0] = 1.0
            if setting == NONBAYES:
                ps = self.nonbayes_min_sampling()[1] if Delta < lo + TOL_FEAS else ps
            zeros = np.zeros(len(self.cells))
            return 0.0, self.sampling(ps), ThresholdAllocation(self.cells, self.weights, zeros + Delta, zeros, 0.0)
        f = self._objective(setting, Delta)
        if nA == 1:
            best = np.ones(1)
        else:
            grid = simplex_grid(nA)
            if setting == NONBAYES and Delta < lo + 1e-6:
                grid = np.vstack([grid, self.nonbayes_min_sampling()[1]])
            vals = np.array([f(g) for g in grid])
            best = grid[int(np.argmin(vals))]
            if nA == 2:
                a0 = best[0]
                res = minimize_scalar(
                    lambda a: f(np.array([a, 1.0 - a])),
                    bounds=(max(a0 - 1.0 / GRID_STEP, 0.0), min(a0 + 1.0 / GRID_STEP, 1.0)),
                    method="bounded", options={"xatol": 1e-7},
                )
                if res.fun < f(best):
                    best = np.array([res.x, 1.0 - res.x])
            else:
                simplex = [best] + [project_to_simplex(best + np.eye(nA)[i] / GRID_STEP) for i in range(nA)]
                res = minimize(f, best, method="Nelder-Mead",
                               options={"initial_simplex": np.array(simplex)[: nA + 1],
                                        "xatol": 1e-6, "fatol": 1e-9, "maxfev": 400})
                cand = project_to_simplex(res.x)
                if f(cand) < f(best):
                    best = cand
        best = project_to_simplex(best)
        try:
            rate, alloc = self.value(best, Delta, setting)
        except InfeasibleDelta:
            raise DeltaOutOfRange(f"no sampling pmf found meeting Delta={Delta:.6g}") from None
        return rate, self.sampling(best), alloc


@lru_cache(maxsize=64)
def irs_solver(model: SourceModel, k: int) -> IrsSolver:
    return IrsSolver(model, k)


def rho_irs(model: SourceModel, P_S, cell, delta: float, setting) -> RDPoint:
    """Per-cell minimum of I(X_S ; Y_B | S) at fixed sampling pmf."""
    probs = np.asarray(getattr(P_S, "probs", P_S), dtype=float)
    k = len(P_S.sets[0]) if hasattr(P_S, "sets") else None
    if k is None:
        raise ValueError("P_S must be a SamplingDistribution")
    solver = irs_solver(model, k)
    if not isinstance(cell, (int, np.integer)):
        cell = [tuple(c) for c in solver.cells].index(tuple(sorted(cell)))
    return solver.rho(int(cell), probs, delta, setting)


def usrdf_irs(model: SourceModel, k: int, Delta: float, setting):
    """Returns (rate, best sampling pmf found, per-cell allocation)."""
    return irs_solver(model, int(k)).optimize(float(Delta), setting)


def delta_bounds_irs(model: SourceModel, k: int, setting) -> tuple[float, float]:
    return irs_solver(model, int(k)).bounds(setting)
