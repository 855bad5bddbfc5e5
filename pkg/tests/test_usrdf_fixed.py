import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from usrd.closed_forms import first_component_bayes_rate, first_component_nonbayes_rate, remote_bsc_rate
from usrd.errors import DeltaOutOfRange, NoFeasibleSet
from usrd.families import independent_bits_family, single_source, virtual_bsc_family
from usrd.rd_core import TOL_CONVEX, TOL_FEAS, TOL_GAP, binary_entropy as h, rd_single
from usrd.usrdf_fixed import (
    best_fixed_set,
    delta_bounds_fs,
    fixed_set_solver,
    minmax_allocation,
    rho_fs,
    usrdf_fs,
)


def test_single_parameter_reduces_to_known_pmf():
    m = virtual_bsc_family([0.3], [0.2])
    px = m.marginal((1,))
    from usrd.source_model import modified_distortion
    D = modified_distortion(m, (0,), (1,)).table
    for delta in (0.25, 0.3, 0.4):
        direct = rd_single(px, D, delta).rate
        assert usrdf_fs(m, (1,), delta, "bayes")[0] == pytest.approx(direct, abs=1e-9)
        assert usrdf_fs(m, (1,), delta, "nonbayes")[0] == pytest.approx(direct, abs=1e-9)


def test_cell_rate_closed_form(bsc_model):
    for cell, p in ((0, 0.2), (1, 0.4)):
        for delta in (0.15, 0.2, 0.3):
            assert rho_fs(bsc_model, (1,), cell, delta, "bayes").rate == pytest.approx(
                remote_bsc_rate(p, 0.1, delta), abs=1e-8)


def test_bayes_curve_matches_allocation_search(bsc_model):
    for D in np.linspace(0.1, 0.37, 11)[1:-1]:
        rate, alloc = usrdf_fs(bsc_model, (1,), D, "bayes")
        assert rate == pytest.approx(first_component_bayes_rate([0.2, 0.4], [0.1, 0.1], [0.5, 0.5], D), abs=1e-6)
        assert alloc.expected_delta <= D + TOL_FEAS


def test_nonbayes_worst_flip(bsc_mixed_q):
    for D in (0.35, 0.4, 0.45):
        assert usrdf_fs(bsc_mixed_q, (1,), D, "nonbayes")[0] == pytest.approx(
            first_component_nonbayes_rate([0.2, 0.2], [0.1, 0.3], D), abs=1e-6)


def test_bounds_closed_form(bsc_model, bsc_mixed_q):
    p, q = np.array([0.2, 0.4]), np.array([0.1, 0.1])
    lo, hi = delta_bounds_fs(bsc_model, (1,), "bayes")
    assert lo == pytest.approx(q.mean(), abs=1e-12)
    assert hi == pytest.approx(np.mean(p + q - p * q), abs=1e-12)
    assert delta_bounds_fs(bsc_mixed_q, (1,), "nonbayes")[0] == pytest.approx(0.3, abs=1e-9)


def test_zero_at_delta_max(bsc_model):
    for s in ("bayes", "nonbayes"):
        hi = delta_bounds_fs(bsc_model, (1,), s)[1]
        assert usrdf_fs(bsc_model, (1,), hi, s)[0] == 0.0


def test_below_min_raises(bsc_model):
    with pytest.raises(DeltaOutOfRange):
        usrdf_fs(bsc_model, (1,), 0.05, "bayes")


def test_full_observation_min_zero(bsc_model):
    assert delta_bounds_fs(bsc_model, (1, 2), "bayes")[0] == 0.0


def test_single_cell_collapses_to_rho(bsc_mixed_q):
    for D in (0.3, 0.35):
        assert usrdf_fs(bsc_mixed_q, (1,), D, "bayes")[0] == pytest.approx(
            rho_fs(bsc_mixed_q, (1,), 0, D, "bayes").rate, abs=1e-12)


def test_bayes_below_nonbayes(bsc_mixed_q, bsc_model):
    for model in (bsc_mixed_q, bsc_model):
        lo = delta_bounds_fs(model, (1,), "nonbayes")[0]
        for D in np.linspace(lo, 0.5, 6):
            b = usrdf_fs(model, (1,), D, "bayes")[0]
            n = usrdf_fs(model, (1,), D, "nonbayes")[0]
            assert b <= n + TOL_GAP


def test_parity_third_component_dominates(parity_model):
    for s in ("bayes", "nonbayes"):
        lo3 = delta_bounds_fs(parity_model, (3,), s)[0]
        lo1 = delta_bounds_fs(parity_model, (1,), s)[0]
        assert lo3 < lo1
        for D in np.linspace(lo1, 0.5, 5):
            assert usrdf_fs(parity_model, (3,), D, s)[0] <= usrdf_fs(parity_model, (1,), D, s)[0] + TOL_GAP
    A, r = best_fixed_set(parity_model, 1, 0.15, "bayes")
    assert A == (3,)
    assert r == pytest.approx(0.10609, abs=1e-4)


def test_best_fixed_set_full_and_ties(bsc_model):
    assert best_fixed_set(bsc_model, 2, 0.05, "bayes")[0] == (1, 2)
    sym = independent_bits_family([0.2], [0.2])
    assert best_fixed_set(sym, 1, 0.3, "bayes")[0] == (1,)


def test_no_feasible_set(bsc_model):
    with pytest.raises(NoFeasibleSet):
        best_fixed_set(bsc_model, 1, 0.01, "bayes")


def test_allocation_certificate(bsc_model):
    solver = fixed_set_solver(bsc_model, (1,))
    for D in (0.15, 0.25, 0.33):
        alloc = minmax_allocation(solver.bayes, solver.weights, D, solver.cells)
        assert alloc.expected_delta == pytest.approx(D, abs=1e-9)
        for pr, d, r in zip(solver.bayes, alloc.deltas, alloc.rates):
            assert r >= alloc.rate - 1e-6 or d <= pr.delta_min + 1e-9
        # a lower common rate is infeasible
        lower = [pr.distortion_at_rate(max(alloc.rate - 1e-4, 0)) for pr in solver.bayes]
        assert solver.weights @ lower > D


@given(st.floats(0.05, 0.45), st.floats(0.05, 0.45), st.floats(0.02, 0.3), st.floats(0.1, 0.9))
def test_fs_curve_shape(p1, p2, q, w):
    m = virtual_bsc_family([p1, p2], [q, q], prior=[w, 1 - w])
    lo, hi = delta_bounds_fs(m, (1,), "bayes")
    grid = np.linspace(lo, hi, 7)
    r = np.array([usrdf_fs(m, (1,), D, "bayes")[0] for D in grid])
    assert np.all(np.diff(r) <= TOL_GAP)
    assert np.all(r[1:-1] <= 0.5 * (r[:-2] + r[2:]) + TOL_CONVEX)
