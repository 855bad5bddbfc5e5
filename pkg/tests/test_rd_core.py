import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from usrd.errors import DimensionMismatch, Infeasible, InfeasibleDelta, TooLarge
from usrd.rd_core import (
    TOL_CONVEX,
    TOL_GAP,
    RateDistortionProblem,
    binary_entropy,
    mutual_information,
    rd_multi,
    rd_oracle,
    rd_single,
)

HAM = 1.0 - np.eye(2)
h = binary_entropy


# -- mutual information -----------------------------------------------------
def test_mi_identity_channel():
    assert mutual_information([0.5, 0.5], np.eye(2)) == pytest.approx(1.0, abs=1e-12)


def test_mi_equal_rows_is_zero():
    assert mutual_information([0.3, 0.7], [[0.2, 0.8], [0.2, 0.8]]) == pytest.approx(0.0, abs=1e-14)


def test_mi_bsc():
    W = [[0.89, 0.11], [0.11, 0.89]]
    assert mutual_information([0.5, 0.5], W) == pytest.approx(1 - h(0.11), abs=1e-12)
    assert 1 - h(0.11) == pytest.approx(0.5, abs=1e-3)


def test_mi_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mutual_information([0.5, 0.5], np.eye(3))


# -- single constraint --------------------------------------------------------
def test_binary_hamming_closed_form():
    pt = rd_single([0.5, 0.5], HAM, 0.11)
    assert pt.rate == pytest.approx(1 - h(0.11), abs=1e-9)
    assert pt.converged
    assert abs(pt.channel.sum(axis=1) - 1).max() < 1e-9


def test_biased_binary_closed_form():
    assert rd_single([0.9, 0.1], HAM, 0.05).rate == pytest.approx(h(0.1) - h(0.05), abs=1e-9)
    assert h(0.1) - h(0.05) == pytest.approx(0.1826, abs=1e-3)


def test_rate_zero_at_delta_max():
    pr = RateDistortionProblem([0.5, 0.5], HAM)
    assert pr.delta_max == 0.5
    assert pr.point(0.5).rate == 0.0
    assert pr.point(0.7).rate == 0.0
    assert pr.point(0.5 - 1e-3).rate > 0


def test_infeasible_below_min():
    D = np.array([[0.2, 1.0], [1.0, 0.2]])
    with pytest.raises(InfeasibleDelta):
        rd_single([0.5, 0.5], D, 0.1)
    assert rd_single([0.5, 0.5], D, 0.2).rate == pytest.approx(1.0, abs=1e-9)


def test_lagrangian_trace_nonincreasing():
    rng = np.random.default_rng(4)
    p = rng.dirichlet(np.ones(4))
    D = rng.random((4, 3))
    trace = []
    RateDistortionProblem(p, D).evaluate(3.0, trace=trace)
    assert len(trace) > 2
    assert np.all(np.diff(trace) <= 1e-12)


def test_linear_segment_hits_target_exactly():
    # two identical rows: the curve of this source has a flat-slope section at the top
    D = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 0.5], [0.0, 1.0, 0.5]])
    pr = RateDistortionProblem([0.25, 0.5, 0.25], D)
    for delta in np.linspace(pr.delta_min, pr.delta_max, 7)[1:-1]:
        pt = pr.point(delta)
        assert pr.distortion_of(pt.channel) == pytest.approx(delta, abs=1e-7)


def test_grouped_problem_is_sum_of_independent_problems():
    # two groups with their own output marginals decouple at a common slope
    p = np.array([0.2, 0.3, 0.1, 0.4])
    D = np.vstack([HAM, HAM])
    grouped = RateDistortionProblem(p, D, groups=[0, 0, 1, 1]).evaluate(2.0)
    a = RateDistortionProblem(p[:2] / 0.5, HAM).evaluate(2.0)
    b = RateDistortionProblem(p[2:] / 0.5, HAM).evaluate(2.0)
    assert grouped.rate == pytest.approx(0.5 * a.rate + 0.5 * b.rate, abs=1e-9)
    assert grouped.delta == pytest.approx(0.5 * a.delta + 0.5 * b.delta, abs=1e-9)


def test_distortion_at_rate_inverts_rate():
    pr = RateDistortionProblem([0.3, 0.7], HAM)
    for d in (0.05, 0.1, 0.2):
        r = pr.rate(d)
        assert pr.distortion_at_rate(r) == pytest.approx(d, abs=1e-7)


# -- multiple constraints -----------------------------------------------------
def test_multi_single_constraint_matches_single():
    p = [0.3, 0.7]
    assert rd_multi(p, [(HAM, 0.1)]).rate == pytest.approx(rd_single(p, HAM, 0.1).rate, abs=TOL_GAP)


def test_multi_duplicate_constraint_matches_single():
    p = [0.3, 0.7]
    pt = rd_multi(p, [(HAM, 0.1), (HAM.copy(), 0.1)])
    assert pt.rate == pytest.approx(rd_single(p, HAM, 0.1).rate, abs=TOL_GAP)


def test_multi_infeasible():
    d1 = np.array([[0.0, 1.0], [0.0, 1.0]])
    d2 = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(Infeasible):
        rd_multi([0.5, 0.5], [(d1, 0.2), (d2, 0.2)])
    assert rd_multi([0.5, 0.5], [(d1, 0.5), (d2, 0.5)]).rate == pytest.approx(0.0, abs=1e-9)


def _remote_bsc_tables(q_values):
    """Per-flip-probability distortion tables from X1 to (Y1, Y2) under 0/1 error."""
    out = []
    for q in q_values:
        T = np.zeros((2, 4))
        for x1 in (0, 1):
            for y1 in (0, 1):
                for y2 in (0, 1):
                    T[x1, 2 * y1 + y2] = 1 - (x1 == y1) * ((1 - q) if y2 == x1 else q)
        out.append(T)
    return out


@pytest.mark.parametrize("delta", [0.35, 0.4, 0.45])
def test_multi_worst_flip_closed_form(delta):
    p, qs = 0.2, [0.1, 0.3]
    px = [1 - p, p]
    pt = rd_multi(px, [(T, delta) for T in _remote_bsc_tables(qs)])
    expect = max(h(p) - min(h(min((delta - q) / (1 - q), p)) for q in qs), 0.0)
    assert pt.rate == pytest.approx(expect, abs=1e-6)
    assert pt.info["gap"] <= 1e-6


def test_multi_active_interior_case_certified():
    # neither single-constraint solution meets both constraints
    rng = np.random.default_rng(11)
    for _ in range(5):
        p = rng.dirichlet(np.ones(3))
        D1, D2 = rng.random((3, 3)), rng.random((3, 3))
        prs = [RateDistortionProblem(p, D) for D in (D1, D2)]
        lv = [0.5 * (pr.delta_min + pr.delta_max) for pr in prs]
        try:
            pt = rd_multi(p, [(D1, lv[0]), (D2, lv[1])])
        except Infeasible:
            continue
        assert pt.info["gap"] <= 1e-5
        e = [float(p @ (pt.channel * D).sum(axis=1)) for D in (D1, D2)]
        assert e[0] <= lv[0] + 1e-7 and e[1] <= lv[1] + 1e-7
        assert pt.rate >= max(pr.rate(l) for pr, l in zip(prs, lv)) - 1e-9


# -- oracle -------------------------------------------------------------------
def test_oracle_binary():
    r = rd_oracle([0.5, 0.5], HAM, 0.11, grid_q=64)
    assert 1 - h(0.11) - 1e-9 <= r <= 1 - h(0.11) + 2e-2


def test_oracle_zero_at_max():
    assert rd_oracle([0.3, 0.7], HAM, 0.3, grid_q=16) == 0.0


def test_oracle_size_limits():
    with pytest.raises(TooLarge):
        rd_oracle(np.full(5, 0.2), 1 - np.eye(5), 0.1)
    with pytest.raises(TooLarge):
        rd_oracle([0.5, 0.5], HAM, 0.1, grid_q=128)


def test_oracle_brackets_multi():
    rng = np.random.default_rng(2)
    p = rng.dirichlet(np.ones(2))
    D1, D2 = rng.random((2, 2)), rng.random((2, 2))
    prs = [RateDistortionProblem(p, D) for D in (D1, D2)]
    lv = [pr.delta_min + 0.6 * (pr.delta_max - pr.delta_min) for pr in prs]
    solver = rd_multi(p, [(D1, lv[0]), (D2, lv[1])]).rate
    oracle = rd_oracle(p, [(D1, lv[0]), (D2, lv[1])], grid_q=64)
    assert oracle - 2e-2 <= solver <= oracle + 1e-9


# -- properties ---------------------------------------------------------------
pmf2 = st.floats(0.02, 0.98).map(lambda a: np.array([a, 1 - a]))
table = st.lists(st.floats(0, 1), min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))
frac = st.floats(0.05, 0.95)


@given(pmf2, table, frac, frac)
def test_curve_monotone_and_midpoint_convex(p, D, a, b):
    pr = RateDistortionProblem(p, D)
    if pr.delta_max - pr.delta_min < 1e-6:
        return
    d1, d2 = sorted(pr.delta_min + np.array([a, b]) * (pr.delta_max - pr.delta_min))
    r1, r2, rm = pr.rate(d1), pr.rate(d2), pr.rate(0.5 * (d1 + d2))
    assert r2 <= r1 + TOL_GAP
    assert rm <= 0.5 * (r1 + r2) + TOL_CONVEX


@given(pmf2, table, frac)
def test_rate_zero_iff_at_or_above_max(p, D, a):
    pr = RateDistortionProblem(p, D)
    assert pr.point(pr.delta_max).rate == 0.0
    if pr.delta_max - pr.delta_min > 1e-3:
        d = pr.delta_min + min(a, 0.9) * (pr.delta_max - pr.delta_min)
        assert pr.point(d).rate > 0


@given(pmf2, table, frac)
def test_oracle_dominates_solver(p, D, a):
    pr = RateDistortionProblem(p, D)
    d = pr.delta_min + a * (pr.delta_max - pr.delta_min)
    assert rd_oracle(p, D, d, grid_q=32) >= pr.rate(d) - TOL_GAP


@given(pmf2, table, table, frac)
def test_more_constraints_never_lower_rate(p, D1, D2, a):
    pr = RateDistortionProblem(p, D1)
    lv1 = pr.delta_min + a * (pr.delta_max - pr.delta_min)
    base = rd_multi(p, [(D1, lv1)]).rate
    pr2 = RateDistortionProblem(p, D2)
    lv2 = pr2.delta_min + a * (pr2.delta_max - pr2.delta_min)
    try:
        more = rd_multi(p, [(D1, lv1), (D2, lv2)]).rate
    except Infeasible:
        return
    assert more >= base - TOL_GAP


@pytest.mark.parametrize("p0", [0.5, 0.5625])
def test_multi_constraints_tight_at_boundary_force_bijection(p0):
    # both levels sit on their feasible boundary: x=0 must map to y=1, x=1 to y=0
    p = np.array([p0, 1 - p0])
    D1 = np.array([[0.0, 0.0], [0.5, 0.75]])
    D2 = np.array([[1.0, 0.0], [0.0, 0.0]])
    pt = rd_multi(p, [(D1, 0.5 * p[1]), (D2, 0.0)])
    assert pt.rate == pytest.approx(binary_entropy(p0), abs=1e-9)


def test_multi_degenerate_mixing_pool_stays_certified():
    # both constraints admit only one channel; the mixing LP is degenerate
    p = np.array([0.5, 0.5])
    D1 = np.array([[0.0, 0.0], [1.0, 0.5]])
    D2 = np.array([[0.5, 1.0], [0.0, 0.0]])
    pt = rd_multi(p, [(D1, 0.25), (D2, 0.25)])
    assert pt.rate == pytest.approx(1.0, abs=1e-9)
    assert pt.info["gap"] <= TOL_GAP
