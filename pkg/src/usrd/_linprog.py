"""Thin wrapper around scipy's HiGHS linear programming interface."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

INFEASIBLE, NUMERICAL_TROUBLE = 2, 4  # scipy linprog status codes


class LPFailure(RuntimeError):
    pass


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None)):
    """Minimize c @ x; returns (x, value).  Raises LPFailure unless optimal.

    HiGHS presolve occasionally gives up on, or wrongly reports infeasible,
    degenerate problems (constraints tight at zero, many near-parallel
    columns); such verdicts are rechecked without presolve.
    """
    c = np.asarray(c, dtype=float)
    kw = dict(A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    res = linprog(c, **kw)
    if res.status in (INFEASIBLE, NUMERICAL_TROUBLE):
        res = linprog(c, options={"presolve": False}, **kw)
    if res.status != 0:
        raise LPFailure(res.message)
    return res.x, float(res.fun)
