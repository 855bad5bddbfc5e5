"""Finite-alphabet rate-distortion engines.

All engines work on a *conditioning* alphabet: symbols ``i`` with probability
``p[i]``, a distortion row ``D[i, :]`` over the reproduction alphabet and an
optional group label.  Symbols sharing a group share an output marginal, so
the objective is the conditional mutual information ``I(X ; Y | G)``.  With a
single group this is ordinary rate-distortion; with groups it covers sources
whose conditioning variable reveals which subset was sampled.

Rates are reported in bits.  Internally the alternating minimization works in
nats with slope ``s`` (nats per distortion unit).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy.optimize import brentq, minimize

from ._linprog import LPFailure, solve_lp
from .errors import DimensionMismatch, Infeasible, InfeasibleDelta, TooLarge

LN2 = math.log(2.0)
TOL_FEAS = 1e-7
TOL_GAP = 1e-6
TOL_CONVEX = 1e-6
BA_TOL = 1e-11
BA_MAXITER = 5000


@dataclass
class RDPoint:
    """One operating point: rate (bits) at distortion ``delta`` with its test channel."""

    delta: float
    rate: float
    channel: np.ndarray | None = None
    converged: bool = True
    iterations: int = 0
    slope: object = None
    status: str = "ok"
    info: dict = field(default_factory=dict)


@dataclass
class RDCurve:
    """Ordered points plus a free-form descriptor of what was swept."""

    points: list
    descriptor: dict = field(default_factory=dict)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    def __len__(self):
        return len(self.points)


def binary_entropy(x) -> np.ndarray | float:
    """h(x) in bits, with h(0) = h(1) = 0; accepts scalars or arrays."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(x * np.log2(x) + (1 - x) * np.log2(1 - x))
    h = np.where((x <= 0) | (x >= 1), 0.0, h)
    return float(h) if h.ndim == 0 else h


def _table(d) -> np.ndarray:
    return np.asarray(getattr(d, "table", d), dtype=float)


def _xlogy_rows(W: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row sums of W log(W/Q) with 0 log 0 = 0."""
    pos = (W > 0) & (Q > 0)
    out = np.zeros_like(W)
    out[pos] = W[pos] * np.log(W[pos] / Q[pos])
    return out.sum(axis=1)


def mutual_information(px, channel, groups=None) -> float:
    """I(X ; Y) in bits (or I(X ; Y | G) when ``groups`` labels the rows)."""
    p = np.asarray(px, dtype=float).ravel()
    W = np.asarray(channel, dtype=float)
    if W.ndim != 2 or W.shape[0] != p.size:
        raise DimensionMismatch(f"channel shape {W.shape} does not match pmf of size {p.size}")
    g = np.zeros(p.size, dtype=int) if groups is None else np.asarray(groups).ravel()
    if g.size != p.size:
        raise DimensionMismatch("groups must label every conditioning symbol")
    keep = p > 0
    p, W = p[keep], W[keep]
    _, g = np.unique(g[keep], return_inverse=True)
    G = g.max() + 1
    Pg = np.bincount(g, weights=p, minlength=G)
    q = np.zeros((G, W.shape[1]))
    np.add.at(q, g, p[:, None] * W)
    pos = Pg > 0
    q[pos] /= Pg[pos, None]
    val = p @ _xlogy_rows(W, q[g])
    return max(float(val) / LN2, 0.0)


@dataclass
class _Eval:
    s: float
    delta: float
    rate: float
    W: np.ndarray
    q: np.ndarray
    converged: bool
    iterations: int
    lagrangian: float = 0.0
    gap: float = 0.0


@njit(cache=True)
def _ba_kernel(p, E, g, w, Pg, q, tol, maxiter, base, trace):  # pragma: no cover - compiled
    n, ny = E.shape
    G = q.shape[0]
    c = np.empty(n)
    cg = np.empty((G, ny))
    gap = np.inf
    record = trace.size > 0
    for it in range(1, maxiter + 1):
        lag = base
        for i in range(n):
            acc = 0.0
            for y in range(ny):
                acc += q[g[i], y] * E[i, y]
            c[i] = max(acc, 1e-300)
            lag -= p[i] * np.log(c[i])
        cg[:, :] = 0.0
        for i in range(n):
            f = w[i] / c[i]
            for y in range(ny):
                cg[g[i], y] += f * E[i, y]
        gap = 0.0
        for k in range(G):
            mx = 1.0
            for y in range(ny):
                if cg[k, y] > mx:
                    mx = cg[k, y]
            gap += Pg[k] * np.log(mx)
        if record:
            trace[it - 1] = lag
        if gap < tol:
            return it, gap, True
        for k in range(G):
            tot = 0.0
            for y in range(ny):
                q[k, y] *= cg[k, y]
                tot += q[k, y]
            for y in range(ny):
                q[k, y] /= tot
    return maxiter, gap, False


def _alternating_min(p, D, g, M, s, q0=None, tol=BA_TOL, maxiter=BA_MAXITER, trace=None):
    """Grouped alternating minimization at slope ``s`` (``np.inf`` = zero-distortion mask).

    Returns (W, q, lagrangian_nats, gap_nats, iterations, converged), where the
    lagrangian is min_W I_q(W) + s E[D] for the final q and ``gap`` bounds its
    excess over the true minimum.  ``trace`` (a list) receives the Lagrangian
    value at every iteration.
    """
    shift = D.min(axis=1)
    if np.isinf(s):
        E = (D <= shift[:, None] + 1e-12).astype(float)
        s_fin = 0.0
    else:
        E = np.exp(-s * (D - shift[:, None]))
        s_fin = s
    G, ny = M.shape[0], D.shape[1]
    Pg = np.bincount(g, weights=p, minlength=G)
    q = np.full((G, ny), 1.0 / ny) if q0 is None else np.array(q0, dtype=float)
    base = s_fin * float(p @ shift)
    w = p / Pg[g]
    buf = np.empty(maxiter if trace is not None else 0)
    it, gap, converged = _ba_kernel(
        p, np.ascontiguousarray(E), g.astype(np.int64), w, Pg, q, tol, maxiter, base, buf
    )
    if trace is not None:
        trace.extend(buf[:it].tolist())
    QE = q[g] * E
    c = np.maximum(QE.sum(axis=1), 1e-300)
    W = QE / c[:, None]
    lag = float(-(p @ np.log(c))) + base
    return W, q, lag, gap, it, converged


class RateDistortionProblem:
    """Rate-distortion curve of a (possibly grouped) finite source.

    Solved points are cached by slope so that repeated queries on the same
    curve warm-start from the nearest previously solved slope.
    """

    def __init__(self, px, d_table, groups=None, tol: float = BA_TOL, maxiter: int = BA_MAXITER):
        p = np.asarray(px, dtype=float).ravel()
        D = _table(d_table)
        if D.ndim != 2 or D.shape[0] != p.size:
            raise DimensionMismatch(f"distortion table {D.shape} does not match pmf of size {p.size}")
        if np.any(p < -1e-12):
            raise ValueError("pmf has negative entries")
        p = np.clip(p, 0.0, None)
        p = p / p.sum()
        g = np.zeros(p.size, dtype=int) if groups is None else np.asarray(groups).ravel()
        if g.size != p.size:
            raise DimensionMismatch("groups must label every conditioning symbol")
        self.n, self.ny = D.shape
        self.full_p, self.full_D = p, D
        self._keep = p > 0
        self.p = p[self._keep]
        self.D = D[self._keep]
        labels, gi = np.unique(g[self._keep], return_inverse=True)
        self.g = gi
        self.G = len(labels)
        self.Pg = np.bincount(gi, weights=self.p, minlength=self.G)
        M = np.zeros((self.G, self.p.size))
        M[gi, np.arange(self.p.size)] = self.p / self.Pg[gi]
        self.M = M
        self.tol, self.maxiter = tol, maxiter
        self.delta_min = float(self.p @ self.D.min(axis=1))
        expected = M @ self.D
        self._y0 = expected.argmin(axis=1)
        self.delta_max = float(self.Pg @ expected.min(axis=1))
        vals = np.unique(np.round(self.D, 12))
        diffs = np.diff(vals)
        diffs = diffs[diffs > 1e-9]
        self.d_gap = float(diffs.min()) if diffs.size else 1.0
        self.s_max = 50.0 / self.d_gap
        self._evals: dict[float, _Eval] = {}
        self._floor: _Eval | None = None

    # -- channel helpers --------------------------------------------------
    def full_channel(self, W: np.ndarray) -> np.ndarray:
        """Expand a channel on the positive-probability rows to all rows."""
        out = np.zeros((self.n, self.ny))
        out[np.arange(self.n), self.full_D.argmin(axis=1)] = 1.0
        out[self._keep] = W
        return out

    def rate_of(self, W: np.ndarray) -> float:
        """Conditional mutual information (bits) of a channel on the kept rows."""
        q = self.M @ W
        return max(float(self.p @ _xlogy_rows(W, q[self.g])) / LN2, 0.0)

    def distortion_of(self, W: np.ndarray) -> float:
        return float(self.p @ (W * self.D).sum(axis=1))

    def constant_channel(self) -> np.ndarray:
        W = np.zeros((self.p.size, self.ny))
        W[np.arange(self.p.size), self._y0[self.g]] = 1.0
        return W

    # -- slope evaluations --------------------------------------------------
    def evaluate(self, s: float, trace=None) -> _Eval:
        """Solve the Lagrangian problem at slope ``s`` (nats per unit distortion)."""
        if s in self._evals and trace is None:
            return self._evals[s]
        q0 = None
        if self._evals:
            ls = math.log(s)
            near = min(self._evals, key=lambda t: abs(math.log(t) - ls))
            q0 = self._evals[near].q
        W, q, lag, gap, it, conv = _alternating_min(
            self.p, self.D, self.g, self.M, s, q0=q0, tol=self.tol, maxiter=self.maxiter, trace=trace
        )
        ev = _Eval(s, self.distortion_of(W), self.rate_of(W), W, q, conv, it, lag, gap)
        self._evals[s] = ev
        return ev

    def floor(self) -> _Eval:
        """Least rate among channels achieving the minimum distortion."""
        if self._floor is None:
            W, q, lag, gap, it, conv = _alternating_min(
                self.p, self.D, self.g, self.M, np.inf, tol=self.tol, maxiter=self.maxiter
            )
            self._floor = _Eval(np.inf, self.distortion_of(W), self.rate_of(W), W, q, conv, it, lag, gap)
        return self._floor

    @property
    def rate_floor(self) -> float:
        """R(delta_min): the largest finite value of the curve."""
        return self.floor().rate

    def _zero_point(self) -> RDPoint:
        return RDPoint(self.delta_max, 0.0, self.full_channel(self.constant_channel()), True, 0, 0.0)

    def _as_point(self, ev: _Eval, delta=None) -> RDPoint:
        slope = ev.s / LN2 if np.isfinite(ev.s) else np.inf
        return RDPoint(
            ev.delta if delta is None else delta, ev.rate, self.full_channel(ev.W), ev.converged, ev.iterations, slope
        )

    def _search(self, key: str, target: float) -> tuple[_Eval, _Eval]:
        """Bracket ``target`` for ``key`` ('delta' decreasing or 'rate' increasing in s).

        Returns (a, b) with a.delta >= b.delta; the target lies between them.
        """
        sign = 1.0 if key == "delta" else -1.0

        def f(u):
            ev = self.evaluate(math.exp(u))
            return sign * (getattr(ev, key) - target)

        u_hi = math.log(self.s_max)
        u_lo = u_hi
        f_lo = f(u_lo)
        while f_lo < 0:
            u_lo -= 2.0
            f_lo = f(u_lo)
            if u_lo < u_hi - 60:
                break
        if f_lo >= 0 and u_lo < u_hi:
            try:
                brentq(f, u_lo, min(u_lo + 2.0, u_hi), xtol=1e-12, rtol=1e-14, maxiter=200)
            except ValueError:
                pass
        evs = list(self._evals.values())
        above = [e for e in evs if sign * (getattr(e, key) - target) >= 0]
        below = [e for e in evs if sign * (getattr(e, key) - target) <= 0]
        a = min(above, key=lambda e: e.delta) if above else None
        b = max(below, key=lambda e: e.delta) if below else None
        return a, b

    def _mix(self, a, b, delta) -> RDPoint:
        """Time-share two solved points (or endpoints) to land on ``delta`` exactly."""
        if a.delta - b.delta <= 1e-15:
            lam = 1.0
        else:
            lam = (delta - b.delta) / (a.delta - b.delta)
        lam = min(max(lam, 0.0), 1.0)
        W = lam * a.W + (1 - lam) * b.W
        rate = lam * a.rate + (1 - lam) * b.rate
        # the mixed channel is feasible and its rate never exceeds the chord
        rate = min(rate, self.rate_of(W))
        s_ref = b.s if np.isfinite(b.s) else a.s
        return RDPoint(
            delta, max(rate, 0.0), self.full_channel(W), a.converged and b.converged,
            a.iterations + b.iterations, s_ref / LN2 if np.isfinite(s_ref) else np.inf,
        )

    def _zero_eval(self) -> _Eval:
        return _Eval(0.0, self.delta_max, 0.0, self.constant_channel(), None, True, 0)

    def point(self, delta: float) -> RDPoint:
        """Minimum rate subject to expected distortion at most ``delta``."""
        delta = float(delta)
        if delta < self.delta_min - TOL_FEAS:
            raise InfeasibleDelta(f"delta={delta:.6g} below minimum distortion {self.delta_min:.6g}")
        if delta >= self.delta_max - TOL_FEAS:
            pt = self._zero_point()
            pt.delta = delta
            return pt
        fl = self.floor()
        if delta <= self.delta_min + 1e-13:
            return self._as_point(fl, delta)
        a, b = self._search("delta", delta)
        if a is None:
            a = self._zero_eval()
        if b is None:
            b = fl
        if abs(b.delta - delta) <= 1e-12:
            return self._as_point(b, delta)
        return self._mix(a, b, delta)

    def rate(self, delta: float) -> float:
        return self.point(delta).rate

    def distortion_at_rate(self, r: float) -> float:
        """Inverse curve D(r): least distortion reachable at rate ``r`` (bits)."""
        fl = self.floor()
        if r >= fl.rate - 1e-13:
            return self.delta_min
        if r <= 0:
            return self.delta_max
        a, b = self._search("rate", r)
        if a is None:
            a = self._zero_eval()
        if b is None:
            b = fl
        if b.rate - a.rate <= 1e-15:
            return b.delta
        lam = (b.rate - r) / (b.rate - a.rate)
        lam = min(max(lam, 0.0), 1.0)
        return lam * a.delta + (1 - lam) * b.delta


def rd_single(px, d_table, delta: float, groups=None) -> RDPoint:
    """Minimum I(X ; Y) (bits) subject to E[d(X, Y)] <= delta."""
    return RateDistortionProblem(px, d_table, groups).point(delta)


# -- multiple simultaneous constraints ---------------------------------------
def min_max_distortion(px, tables: Sequence, levels=None, groups=None) -> tuple[float, np.ndarray]:
    """min over channels of max_tau (E_W[d_tau] - level_tau), solved as an LP.

    Returns the optimal value and a minimizing channel.  With ``levels=None``
    this is the least achievable worst-case distortion.
    """
    p = np.asarray(px, dtype=float).ravel()
    Ds = [_table(t) for t in tables]
    n, ny = Ds[0].shape
    lv = np.zeros(len(Ds)) if levels is None else np.asarray(levels, dtype=float)
    nv = n * ny
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    A_ub = np.zeros((len(Ds), nv + 1))
    for t, D in enumerate(Ds):
        A_ub[t, :nv] = (p[:, None] * D).ravel()
        A_ub[t, -1] = -1.0
    A_eq = np.zeros((n, nv + 1))
    for i in range(n):
        A_eq[i, i * ny:(i + 1) * ny] = 1.0
    bounds = [(0, None)] * nv + [(None, None)]
    x, val = solve_lp(c, A_ub, lv, A_eq, np.ones(n), bounds)
    W = np.clip(x[:nv].reshape(n, ny), 0, None)
    W /= W.sum(axis=1, keepdims=True)
    return val, W


def _dedupe(tables, levels):
    out_t, out_l = [], []
    for D, lv in zip(tables, levels):
        for j, E in enumerate(out_t):
            if E.shape == D.shape and np.allclose(E, D, atol=1e-12, rtol=0):
                out_l[j] = min(out_l[j], lv)
                break
        else:
            out_t.append(D)
            out_l.append(lv)
    return out_t, np.array(out_l, dtype=float)


def rd_multi(px, constraints: Sequence, groups=None, tol_gap: float = TOL_GAP) -> RDPoint:
    """Minimum I(X ; Y) (bits) with one shared channel meeting every constraint.

    ``constraints`` is a list of ``(table, level)`` pairs, each requiring
    ``E[table(X, Y)] <= level``.  The value is certified by a Lagrangian dual
    lower bound; ``info['gap']`` holds the final primal/dual gap in bits.
    """
    if not constraints:
        raise ValueError("need at least one constraint")
    p = np.asarray(px, dtype=float).ravel()
    tables = [_table(t) for t, _ in constraints]
    for D in tables:
        if D.shape != tables[0].shape or D.shape[0] != p.size:
            raise DimensionMismatch("all constraint tables must share the channel's shape")
    tables, levels = _dedupe(tables, [float(lv) for _, lv in constraints])
    if len(tables) == 1:
        pt = rd_single(p, tables[0], levels[0], groups)
        pt.info["gap"] = 0.0
        return pt

    probs = [RateDistortionProblem(p, D, groups) for D in tables]
    base = probs[0]
    keep = base._keep
    pk = base.p
    Dk = [D[keep] for D in tables]
    worst, W_lp = min_max_distortion(pk, Dk, levels)
    if worst > TOL_FEAS:
        raise Infeasible(f"no channel meets all {len(tables)} constraints (excess {worst:.3g})")

    def dist_vec(W):
        return np.array([float(pk @ (W * D).sum(axis=1)) for D in Dk])

    singles = []
    for pr, lv in zip(probs, levels):
        singles.append(pr.point(min(lv, pr.delta_max)))
    order = np.argsort([-s.rate for s in singles])
    best = singles[order[0]]
    Wb = best.channel[keep]
    lower = best.rate
    if np.all(dist_vec(Wb) <= levels + TOL_FEAS):
        best.info["gap"] = 0.0
        best.info["active"] = [int(order[0])]
        return best

    pool = [W_lp] + [s.channel[keep] for s in singles]
    T = len(tables)
    state = {"q": None, "lower": lower * LN2}

    def dual(svec):
        svec = np.maximum(svec, 0.0)
        Dc = sum(s * D for s, D in zip(svec, Dk))
        W, q, lag, gap, it, conv = _alternating_min(pk, Dc, base.g, base.M, 1.0, q0=state["q"])
        state["q"] = q
        pool.append(W)
        e = dist_vec(W)
        G = lag - float(svec @ levels)
        state["lower"] = max(state["lower"], G - gap)
        return -G, -(e - levels)

    s0 = np.zeros(T)
    sl = singles[order[0]].slope
    s0[order[0]] = (sl if np.isfinite(sl) else base.s_max / LN2) * LN2
    smax = max(pr.s_max for pr in probs)
    res = minimize(dual, s0, jac=True, method="L-BFGS-B", bounds=[(0, smax)] * T,
                   options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-11})
    W, rate, e = _mix_pool(pool, base, dist_vec, levels)
    lower_bits = state["lower"] / LN2
    gap = max(rate - lower_bits, 0.0)
    s_bits = tuple(float(v) / LN2 for v in np.maximum(res.x, 0))
    pt = RDPoint(float(levels.max()), rate, base.full_channel(W), gap <= tol_gap, int(res.nit), s_bits)
    pt.info.update(gap=gap, lower=lower_bits, distortions=e.tolist())
    return pt


def _mix_pool(pool, prob: RateDistortionProblem, dist_vec, levels):
    """Best convex combination of collected channels meeting every constraint."""
    uniq = []
    for W in pool:  # near-identical channels only make the LP degenerate
        if not any(np.max(np.abs(W - U)) < 1e-10 for U in uniq):
            uniq.append(W)
    pool = uniq
    rates = np.array([prob.rate_of(W) for W in pool])
    E = np.array([dist_vec(W) for W in pool])
    K = len(pool)
    # pool[0] is the min-max LP channel, feasible only up to round-off; admit exactly that much slack
    levels = np.maximum(levels, E[0])
    try:
        x, _ = solve_lp(rates, E.T, levels, np.ones((1, K)), np.ones(1), [(0, None)] * K)
    except LPFailure:
        # degenerate pools can defeat HiGHS; fall back to the cheapest member that is feasible on its own
        ok = np.all(E <= levels, axis=1)
        x = np.zeros(K)
        x[np.flatnonzero(ok)[np.argmin(rates[ok])]] = 1.0
    x = np.clip(x, 0, None)
    x /= x.sum()
    W = sum(w * Wk for w, Wk in zip(x, pool) if w > 0)
    W /= W.sum(axis=1, keepdims=True)
    return W, prob.rate_of(W), dist_vec(W)


# -- brute-force oracle -------------------------------------------------------
ORACLE_MAX_SYMBOLS = 4
ORACLE_MAX_GRID = 64
ORACLE_MAX_CHANNELS = 20_000_000


def _compositions(q: int, k: int) -> np.ndarray:
    """All k-vectors on the simplex lattice with spacing 1/q (stars and bars)."""
    rows = []
    for bars in itertools.combinations(range(q + k - 1), k - 1):
        edges = np.array((-1,) + bars + (q + k - 1,))
        rows.append(np.diff(edges) - 1)
    return np.array(rows, dtype=float).reshape(-1, k) / q


def rd_oracle(px, d_or_constraints, delta=None, grid_q: int = 64) -> float:
    """Exhaustive search over channels with rows on the 1/grid_q lattice.

    ``d_or_constraints`` is either a distortion table (with ``delta``) or a
    list of ``(table, level)`` pairs.  Returns the least quantized mutual
    information (bits) among feasible lattice channels.
    """
    p = np.asarray(px, dtype=float).ravel()
    if isinstance(d_or_constraints, (list, tuple)):
        cons = [(_table(t), float(lv)) for t, lv in d_or_constraints]
    else:
        cons = [(_table(d_or_constraints), float(delta))]
    n, ny = cons[0][0].shape
    if n != p.size:
        raise DimensionMismatch("table does not match pmf")
    if n > ORACLE_MAX_SYMBOLS or ny > ORACLE_MAX_SYMBOLS or grid_q > ORACLE_MAX_GRID:
        raise TooLarge("oracle limited to 4x4 alphabets and grid_q <= 64")
    R = _compositions(grid_q, ny)
    m = R.shape[0]
    if float(m) ** n > ORACLE_MAX_CHANNELS:
        raise TooLarge(f"{m}^{n} lattice channels exceed the oracle budget")
    with np.errstate(divide="ignore", invalid="ignore"):
        negent = np.where(R > 0, R * np.log2(R), 0.0).sum(axis=1)
    # per-row contributions, broadcast over one axis per conditioning symbol
    shape = lambda i: (1,) * i + (m,) + (1,) * (n - i - 1)
    H = sum((p[i] * negent).reshape(shape(i)) for i in range(n))
    feas = np.ones((m,) * n, dtype=bool)
    for D, lv in cons:
        dist = sum((p[i] * (R @ D[i])).reshape(shape(i)) for i in range(n))
        feas &= dist <= lv + 1e-12
    if not feas.any():
        raise Infeasible("no lattice channel meets the constraints")
    out_ent = 0.0
    for y in range(ny):
        qy = sum((p[i] * R[:, y]).reshape(shape(i)) for i in range(n))
        with np.errstate(divide="ignore", invalid="ignore"):
            out_ent = out_ent - np.where(qy > 0, qy * np.log2(qy), 0.0)
    info = H + out_ent
    best = float(info[feas].min())
    return 0.0 if best < 1e-12 else best
