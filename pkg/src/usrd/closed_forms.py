"""Closed-form rates for the small binary families in ``families``.

These are written directly from the binary-entropy expressions, without the
Blahut-Arimoto machinery, so they serve as independent checks on the solvers.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

from .rd_core import binary_entropy as h


def remote_bsc_rate(p: float, q: float, delta: float) -> float:
    """Rate for recovering (X1, X2) under 0/1 error from X1 ~ Bern(p) when X2 = X1 xor Bern(q).

    Only X1 is seen; the flip of X2 is an unavoidable error q, so the rate is
    h(p) - h((delta - q)/(1 - q)) on [q, q + (1 - q) min(p, 1 - p)] and 0 beyond.
    """
    pmin = min(p, 1 - p)
    if delta < q - 1e-12:
        return np.inf
    d = (max(delta, q) - q) / (1 - q)
    return float(max(h(pmin) - h(min(d, pmin)), 0.0))


def remote_bsc_range(p: float, q: float) -> tuple[float, float]:
    return q, q + (1 - q) * min(p, 1 - p)


def _cells_by_p(p, q, prior):
    """Group parameters by p (what X1 alone reveals); each cell gets its prior weight and mean q."""
    p, q, prior = (np.asarray(v, dtype=float) for v in (p, q, prior))
    out = []
    for pv in sorted(set(np.round(p, 12))):
        idx = np.isclose(p, pv, atol=1e-12)
        w = prior[idx].sum()
        out.append((float(pv), float(prior[idx] @ q[idx] / w), float(q[idx].max()), float(w)))
    return out


def first_component_bayes_rate(p, q, prior, Delta: float) -> float:
    """Bayesian rate of sampling X1 only, by a direct search over the split of the distortion budget.

    Supports at most two distinct values of p.
    """
    cells = _cells_by_p(p, q, prior)
    if len(cells) == 1:
        pv, qbar, _, _ = cells[0]
        return remote_bsc_rate(pv, qbar, Delta)
    if len(cells) > 2:
        raise NotImplementedError("closed form implemented for at most two cells")
    (p1, q1, _, w1), (p2, q2, _, w2) = cells
    lo1, hi1 = remote_bsc_range(p1, q1)
    lo2, hi2 = remote_bsc_range(p2, q2)
    if Delta >= w1 * hi1 + w2 * hi2:
        return 0.0
    a = max(lo1, (Delta - w2 * hi2) / w1)
    b = min(hi1, (Delta - w2 * lo2) / w1)

    def worst(d1):
        d2 = (Delta - w1 * d1) / w2
        return max(remote_bsc_rate(p1, q1, d1), remote_bsc_rate(p2, q2, d2))

    res = minimize_scalar(worst, bounds=(a, b), method="bounded", options={"xatol": 1e-13})
    return float(min(res.fun, worst(a), worst(b)))


def first_component_nonbayes_rate(p, q, Delta: float) -> float:
    """Worst-case rate of sampling X1 only: each p-cell pays its largest flip probability."""
    cells = _cells_by_p(p, q, np.ones(len(p)))
    return max(remote_bsc_rate(pv, qmax, Delta) for pv, _, qmax, _ in cells)


def xor_sampler_nonbayes_rate(p, delta: float) -> float:
    """Worst-case rate of the symbol-dependent sampler for X2 = X1 xor Bern(1/2): max_tau h(p_tau) - h(delta)."""
    top = max(h(min(v, 1 - v)) for v in p)
    if delta >= 0.5:
        return 0.0
    return float(max(top - h(delta), 0.0))
