import csv
import io
import json

import numpy as np
import pytest

from usrd.closed_forms import first_component_bayes_rate
from usrd.families import independent_bits_family
from usrd.rd_core import RDCurve, RDPoint
from usrd.reports import (
    CSV_HEADER,
    SamplerSpec,
    audit_shape,
    compare_samplers,
    shape_excess,
    sweep,
    to_json,
    write_csv,
)
from usrd.usrdf_fixed import delta_bounds_fs


def test_sampler_spec_parse():
    s = SamplerSpec.parse("fs:2,1")
    assert s.kind == "fs" and s.A == (1, 2) and s.k == 2 and s.label == "fs:1,2"
    assert SamplerSpec.parse("MRS", 1) == SamplerSpec("mrs", None, 1)
    with pytest.raises(ValueError):
        SamplerSpec.parse("bogus")
    with pytest.raises(ValueError):
        SamplerSpec.parse("fs:")


def test_sweep_at_max_is_single_zero(bsc_model):
    hi = delta_bounds_fs(bsc_model, (1,), "bayes")[1]
    curve = sweep(bsc_model, "fs:1", "bayes", [hi])
    assert len(curve) == 1 and curve.points[0].rate == 0.0 and curve.points[0].status == "ok"


def test_sweep_statuses(bsc_model):
    curve = sweep(bsc_model, "fs:1", "bayes", [0.0, 0.2, 0.6])
    assert [p.status for p in curve.points] == ["below_min", "ok", "above_max"]
    assert np.isnan(curve.points[0].rate) and curve.points[2].rate == 0.0


def test_sweep_matches_closed_form(bsc_model):
    grid = np.linspace(0.1, 0.37, 11)[1:-1]
    curve = sweep(bsc_model, "fs:1", "bayes", grid)
    expect = [first_component_bayes_rate([0.2, 0.4], [0.1, 0.1], [0.5, 0.5], d) for d in grid]
    assert np.max(np.abs(curve.rates - expect)) < 1e-3
    assert audit_shape(curve) == []


def test_refinement_does_not_raise_convexity_statistic(bsc_model):
    coarse = sweep(bsc_model, "fs:1", "bayes", np.linspace(0.1, 0.37, 5))
    fine = sweep(bsc_model, "fs:1", "bayes", np.linspace(0.1, 0.37, 9))
    assert shape_excess(fine)[1] <= shape_excess(coarse)[1] + 1e-9


def test_audit_flags_nonconvex_and_increase():
    bad = RDCurve([RDPoint(d, r) for d, r in ((0.0, 1.0), (0.1, 0.9), (0.2, 0.2))])
    flags = audit_shape(bad)
    assert [f["check"] for f in flags] == ["convex"]
    up = RDCurve([RDPoint(d, r) for d, r in ((0.0, 1.0), (0.1, 1.1), (0.2, 0.2))])
    assert "monotone" in [f["check"] for f in audit_shape(up)]


def test_audit_needs_three_points():
    with pytest.raises(ValueError):
        audit_shape(RDCurve([RDPoint(0.0, 1.0), RDPoint(1.0, 0.0)]))


def test_compare_mrs_gap(xor_model):
    rep = compare_samplers(xor_model, 1, "both", [0.3, 0.35, 0.4, 0.45, 0.5, 0.6])
    assert rep.violations == []
    gaps = rep.strict_gaps("nonbayes", "mrs", "irs")
    assert {0.35, 0.4, 0.45} <= {round(g, 12) for g in gaps}
    assert 0.6 not in gaps or rep.rates("nonbayes", "irs")[-1] > 1e-3


def test_compare_irs_gap(indep_model):
    rep = compare_samplers(indep_model, 1, "nonbayes", [0.3, 0.33, 0.36, 0.39])
    assert rep.violations == []
    assert len(rep.strict_gaps("nonbayes", "irs", "bestfs")) >= 3


def test_compare_no_ambiguity_full_observation():
    m = independent_bits_family([0.3], [0.15])
    rep = compare_samplers(m, 2, "bayes", np.linspace(0.0, 0.45, 6))
    a, b, c = (rep.rates("bayes", s) for s in ("mrs", "irs", "bestfs"))
    assert np.max(np.abs(a - c)) < 1e-6 and np.max(np.abs(b - c)) < 1e-6


def test_compare_negative_tolerance_reports_violations(xor_model):
    rep = compare_samplers(xor_model, 1, "nonbayes", [0.35, 0.4, 0.45], tol=-1.0)
    assert rep.violations


def test_writers(bsc_model):
    curve = sweep(bsc_model, "fs:1", "bayes", [0.0, 0.2, 0.6])
    text = write_csv(curve)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1][2] == "below_min" and rows[1][1] == "nan"
    data = json.loads(to_json(curve))
    assert data["points"][0]["rate"] is None and data["sampler"] == "fs:1"
