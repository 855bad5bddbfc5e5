"""Universal rate-distortion for a memoryless random sampler.

The sampler may pick the subset from the current source symbol.  Deterministic
maps w : X_M -> A_k, time-shared through a slot variable U, attain the
optimum, so the solver enumerates all maps, tabulates each map's per-parameter
rate-distortion curve on a distortion grid and solves a linear program over
convex combinations of tabulated operating points.  A few refinement rounds
insert exact curve points where the LP used chords between grid points.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse

from ._linprog import solve_lp
from .errors import DeltaOutOfRange, TooManySamplers
from .rd_core import TOL_FEAS, RateDistortionProblem, RDPoint
from .source_model import SourceModel, conditional_distortion, subsets_of_size
from .usrdf_fixed import BAYES, NONBAYES, normalize_setting

SAMPLER_CAP = 2 ** 20
GRID_POINTS = 33
REFINE_ROUNDS = 4


@dataclass(frozen=True)
class DeterministicSampler:
    """A map from joint source symbols (flat index) to k-subsets."""

    assignment: tuple
    sets: tuple
    slot: int = 0

    def subset(self, joint_index: int) -> tuple:
        return self.sets[self.assignment[joint_index]]

    def with_slot(self, slot: int) -> "DeterministicSampler":
        return DeterministicSampler(self.assignment, self.sets, slot)

    def is_constant(self) -> bool:
        return len(set(self.assignment)) == 1

    def as_dict(self, alphabets=None) -> dict:
        out = {"slot": self.slot}
        if alphabets is None:
            out["map"] = {str(i): list(self.subset(i)) for i in range(len(self.assignment))}
        else:
            names = ["".join(map(str, t)) for t in itertools.product(*[range(a) for a in alphabets])]
            out["map"] = {n: list(self.subset(i)) for i, n in enumerate(names)}
        return out


@dataclass
class MrsPolicy:
    """Time-shared deterministic samplers with per-slot, per-parameter operating points."""

    p_u: np.ndarray
    samplers: list
    rates: np.ndarray
    dists: np.ndarray
    rate: float
    info: dict = field(default_factory=dict)

    @property
    def n_slots(self) -> int:
        return len(self.p_u)

    def rate_per_tau(self) -> np.ndarray:
        return self.p_u @ self.rates

    def dist_per_tau(self) -> np.ndarray:
        return self.p_u @ self.dists


class BranchBuilder:
    """Builds the (A, x_A) conditioning source a deterministic map induces."""

    def __init__(self, model: SourceModel, k: int):
        self.model, self.k = model, int(k)
        self.sets = tuple(subsets_of_size(model.m, k))
        self.T = model.n_theta
        self.offsets = np.concatenate([[0], np.cumsum([model.subset_size(A) for A in self.sets])])
        self._idx = np.stack([model.index_of(A) for A in self.sets])  # (nA, n_joint)
        n_lab = int(self.offsets[-1])
        self._group = np.searchsorted(self.offsets, np.arange(n_lab), side="right") - 1

    def branch(self, assignment, tau: int):
        """(p, D, groups) over labels (A, x_A) with positive mass under parameter ``tau``."""
        a = np.asarray(assignment)
        labels = self.offsets[a] + self._idx[a, np.arange(a.size)]
        pmf = self.model.family[tau]
        D, mass = conditional_distortion(self.model, pmf, labels, int(self.offsets[-1]))
        keep = mass > 0
        return mass[keep], D[keep], self._group[keep]


class MrsSolver(BranchBuilder):
    """Enumerated samplers, their per-parameter curves and the time-sharing LP."""

    def __init__(self, model: SourceModel, k: int, cap: int = SAMPLER_CAP, grid_points: int = GRID_POINTS):
        super().__init__(model, k)
        self.grid_points = grid_points
        self.samplers = enumerate_samplers(self, cap=cap, dedup=True)
        self._problems: dict = {}
        self._table = None

    def problem(self, w: int, tau: int) -> RateDistortionProblem:
        key = (w, tau)
        if key not in self._problems:
            p, D, g = self.branch(self.samplers[w].assignment, tau)
            self._problems[key] = RateDistortionProblem(p, D, g)
        return self._problems[key]

    def tabulate(self):
        """Per-(w, tau) grids of (delta, rate), cached and grown by refinement."""
        if self._table is None:
            table = {}
            for w in range(len(self.samplers)):
                for t in range(self.T):
                    pr = self.problem(w, t)
                    grid = np.linspace(pr.delta_min, pr.delta_max, self.grid_points)
                    rates = np.array([pr.rate(d) for d in grid])
                    table[w, t] = (grid, rates)
            self._table = table
        return self._table

    def _insert(self, w, t, delta):
        grid, rates = self._table[w, t]
        if np.min(np.abs(grid - delta)) < 1e-12:
            return False
        r = self.problem(w, t).rate(delta)
        j = np.searchsorted(grid, delta)
        self._table[w, t] = (np.insert(grid, j, delta), np.insert(rates, j, r))
        return True

    # -- bounds -----------------------------------------------------------------
    def bounds(self, setting) -> tuple[float, float]:
        setting = normalize_setting(setting)
        nW = len(self.samplers)
        lo = np.array([[self.problem(w, t).delta_min for t in range(self.T)] for w in range(nW)])
        hi = np.array([[self.problem(w, t).delta_max for t in range(self.T)] for w in range(nW)])
        if setting == BAYES:
            mu = self.model.prior
            return float((lo @ mu).min()), float((hi @ mu).min())
        return _minmax_mixture(lo)[0], _minmax_mixture(hi)[0]

    # -- the time-sharing LP ----------------------------------------------------
    def _lp(self, Delta: float, setting: str):
        table = self.tabulate()
        nW, T = len(self.samplers), self.T
        cols, col_of = [], {}
        for w in range(nW):
            for t in range(T):
                grid, rates = table[w, t]
                for j in range(grid.size):
                    col_of[w, t, j] = nW + len(cols)
                    cols.append((w, t, grid[j], rates[j]))
        nv = nW + len(cols) + 1
        it = nv - 1
        cost = np.zeros(nv)
        cost[it] = 1.0
        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        row = 0
        eq_r += [row] * nW
        eq_c += list(range(nW))
        eq_v += [1.0] * nW
        b_eq.append(1.0)
        row += 1
        for w in range(nW):
            for t in range(T):
                js = [col_of[w, t, j] for j in range(table[w, t][0].size)]
                eq_r += [row] * (len(js) + 1)
                eq_c += js + [w]
                eq_v += [1.0] * len(js) + [-1.0]
                b_eq.append(0.0)
                row += 1
        A_eq = sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(row, nv))
        ub_r, ub_c, ub_v, b_ub = [], [], [], []
        for t in range(T):
            for k, (w, tt, d, r) in enumerate(cols):
                if tt == t:
                    ub_r.append(t)
                    ub_c.append(nW + k)
                    ub_v.append(r)
            ub_r.append(t)
            ub_c.append(it)
            ub_v.append(-1.0)
            b_ub.append(0.0)
        nrow = T
        mu = self.model.prior
        if setting == BAYES:
            for k, (w, t, d, r) in enumerate(cols):
                ub_r.append(nrow)
                ub_c.append(nW + k)
                ub_v.append(mu[t] * d)
            b_ub.append(Delta)
            nrow += 1
        else:
            for t in range(T):
                for k, (w, tt, d, r) in enumerate(cols):
                    if tt == t:
                        ub_r.append(nrow)
                        ub_c.append(nW + k)
                        ub_v.append(d)
                b_ub.append(Delta)
                nrow += 1
        A_ub = sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(nrow, nv))
        bounds = [(0, None)] * (nv - 1) + [(None, None)]
        x, val = solve_lp(cost, A_ub, np.array(b_ub), A_eq, np.array(b_eq), bounds)
        return x, val, cols

    def solve(self, Delta: float, setting, rounds: int = REFINE_ROUNDS) -> tuple[float, MrsPolicy]:
        setting = normalize_setting(setting)
        lo, hi = self.bounds(setting)
        if Delta < lo - TOL_FEAS:
            raise DeltaOutOfRange(f"Delta={Delta:.6g} below minimum {lo:.6g} for k={self.k} ({setting})")
        Delta = max(Delta, lo)
        nW, T = len(self.samplers), self.T
        x, val, cols = self._lp(Delta, setting)
        for _ in range(rounds):
            added = False
            for w in range(nW):
                for t in range(T):
                    ks = [k for k, c in enumerate(cols) if c[0] == w and c[1] == t and x[nW + k] > 1e-12]
                    mass = sum(x[nW + k] for k in ks)
                    if len(ks) > 1 and mass > 1e-12:
                        dbar = sum(x[nW + k] * cols[k][2] for k in ks) / mass
                        added |= self._insert(w, t, dbar)
            if not added:
                break
            x_new, val_new, cols_new = self._lp(Delta, setting)
            improved = val_new < val - 1e-13
            x, val, cols = x_new, val_new, cols_new
            if not improved:
                break
        policy = self._policy(x, cols)
        policy.rate = float(max(val, 0.0))
        policy.info.update(setting=setting, Delta=Delta)
        return policy.rate, policy

    def _policy(self, x, cols) -> MrsPolicy:
        nW, T = len(self.samplers), self.T
        slots_w, weights, R, Dm = [], [], [], []
        for w in range(nW):
            lam = x[w]
            if lam <= 1e-9:  # LP solver noise, not a real mixture component
                continue
            # comonotone coupling of the per-tau splits of this sampler's mass
            per_t = []
            for t in range(T):
                pts = sorted((cols[k][2], cols[k][3], x[nW + k]) for k, c in enumerate(cols)
                             if c[0] == w and c[1] == t and x[nW + k] > 1e-14)
                tot = sum(p[2] for p in pts)
                per_t.append([(d, r, m / tot) for d, r, m in pts] if tot > 0 else [])
            if not all(per_t):
                continue
            cuts = sorted({0.0, 1.0} | {round(c, 14) for pts in per_t for c in np.cumsum([p[2] for p in pts])})
            for a, b in zip(cuts[:-1], cuts[1:]):
                if b - a <= 1e-14:
                    continue
                mid = 0.5 * (a + b)
                rr, dd = [], []
                for pts in per_t:
                    cum = np.cumsum([p[2] for p in pts])
                    j = min(int(np.searchsorted(cum, mid)), len(pts) - 1)
                    dd.append(pts[j][0])
                    rr.append(pts[j][1])
                slots_w.append(w)
                weights.append(lam * (b - a))
                R.append(rr)
                Dm.append(dd)
        weights = np.array(weights)
        R, Dm = np.array(R), np.array(Dm)
        keep = caratheodory_reduce(np.hstack([R, Dm]), weights)
        weights = weights[keep] / weights[keep].sum()
        samplers = [self.samplers[slots_w[i]].with_slot(u) for u, i in enumerate(keep)]
        return MrsPolicy(weights, samplers, R[keep], Dm[keep], 0.0)


def _minmax_mixture(V: np.ndarray) -> tuple[float, np.ndarray]:
    """min over mixtures lambda of max_t sum_w lambda_w V[w, t]."""
    nW, T = V.shape
    c = np.zeros(nW + 1)
    c[-1] = 1.0
    A_ub = np.hstack([V.T, -np.ones((T, 1))])
    A_eq = np.zeros((1, nW + 1))
    A_eq[0, :nW] = 1.0
    x, val = solve_lp(c, A_ub, np.zeros(T), A_eq, np.ones(1), [(0, None)] * nW + [(None, None)])
    return float(val), x[:nW]


def caratheodory_reduce(V: np.ndarray, weights: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Indices of a support of size <= dim + 1 carrying the same weighted mean.

    Repeatedly moves weight along a null vector of [V^T; 1^T] until a weight
    hits zero; ``weights`` is updated in place.
    """
    w = weights
    active = [i for i in range(len(w)) if w[i] > tol]
    dim = V.shape[1]
    while len(active) > dim + 1:
        M = np.vstack([V[active].T, np.ones(len(active))])
        _, _, vh = np.linalg.svd(M)
        z = vh[-1]
        if not np.any(z > 1e-12):
            z = -z
        pos = z > 1e-12
        step = np.min(w[active][pos] / z[pos])
        w[active] = w[active] - step * z
        w[np.abs(w) < tol] = 0.0
        active = [i for i in active if w[i] > tol]
    return np.array(active, dtype=int)


def _dedup_key(solver: BranchBuilder, assignment, digits: int = 10):
    """Map-invariant signature: per-group multisets of (mass, distortion row) across all tau."""
    groups = {}
    for t in range(solver.T):
        p, D, g = solver.branch(assignment, t)
        for pi, row, gi in zip(p, D, g):
            groups.setdefault(gi, {}).setdefault(t, []).append((round(float(pi), digits),) + tuple(np.round(row, digits)))
    sig = []
    for gi, per_t in groups.items():
        sig.append(tuple(tuple(sorted(per_t.get(t, []))) for t in range(solver.T)))
    return tuple(sorted(sig))


def enumerate_samplers(solver: BranchBuilder, cap: int = SAMPLER_CAP, dedup: bool = True) -> list:
    model = solver.model
    nA, n = len(solver.sets), model.n_joint
    total = nA ** n
    if total > cap:
        raise TooManySamplers(
            f"{nA}^{n} = {total} deterministic samplers exceed the cap {cap}; "
            "reduce the alphabet or raise the cap"
        )
    out, seen = [], set()
    for assignment in itertools.product(range(nA), repeat=n):
        if dedup:
            key = _dedup_key(solver, assignment)
            if key in seen:
                continue
            seen.add(key)
        out.append(DeterministicSampler(tuple(assignment), solver.sets))
    return out


@lru_cache(maxsize=32)
def mrs_solver(model: SourceModel, k: int) -> MrsSolver:
    return MrsSolver(model, k)


def enumerate_pure_samplers(model: SourceModel, k: int, cap: int = SAMPLER_CAP, dedup: bool = True) -> list:
    """All deterministic k-samplers in lexicographic order (duplicates removed by default)."""
    if dedup and cap == SAMPLER_CAP:
        return list(mrs_solver(model, int(k)).samplers)
    return enumerate_samplers(BranchBuilder(model, k), cap=cap, dedup=dedup)


def rho_mrs_pure(model: SourceModel, w: DeterministicSampler, tau: int, delta: float, setting=BAYES) -> RDPoint:
    """Minimum I(X_S ; Y_B | S) under one parameter for a deterministic sampler.

    The setting only changes how curves are aggregated across parameters, so
    it does not affect this single-parameter value.
    """
    normalize_setting(setting)
    k = len(w.sets[0])
    solver = mrs_solver(model, k)
    p, D, g = solver.branch(w.assignment, int(tau))
    return RateDistortionProblem(p, D, g).point(delta)


def usrdf_mrs(model: SourceModel, k: int, Delta: float, setting) -> tuple[float, MrsPolicy]:
    return mrs_solver(model, int(k)).solve(float(Delta), setting)


def delta_bounds_mrs(model: SourceModel, k: int, setting) -> tuple[float, float]:
    return mrs_solver(model, int(k)).bounds(setting)


def evaluate_policy(model: SourceModel, policy: MrsPolicy, setting) -> tuple[float, np.ndarray]:
    """Recompute a policy's worst-parameter rate and per-parameter distortion from scratch."""
    setting = normalize_setting(setting)
    T = model.n_theta
    rates = np.zeros(T)
    dists = np.zeros(T)
    for pu, w, drow in zip(policy.p_u, policy.samplers, policy.dists):
        for t in range(T):
            pt = rho_mrs_pure(model, w, t, drow[t], setting)
            rates[t] += pu * pt.rate
            dists[t] += pu * drow[t]
    return float(rates.max()), dists
