import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from usrd.cli import main, parse_grid
from usrd.closed_forms import first_component_bayes_rate
from usrd.families import independent_bits_family, virtual_bsc_family
from usrd.source_model import save_model


@pytest.fixture
def model_file(tmp_path):
    def make(model, name="model.json"):
        path = tmp_path / name
        save_model(model, path)
        return str(path)
    return make


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_grid():
    assert parse_grid("0:1:3").tolist() == [0.0, 0.5, 1.0]
    assert parse_grid("0.3,0.1").tolist() == [0.1, 0.3]
    assert len(parse_grid("auto", (0, 1))) == 17
    assert parse_grid("0.2:0.9:1").tolist() == [0.2]
    with pytest.raises(ValueError):
        parse_grid("0:1:0")


def test_bounds_closed_form(capsys, model_file, bsc_model):
    code, out, _ = run(capsys, "bounds", "--model", model_file(bsc_model), "--sampler", "fs:1", "--setting", "bayes")
    assert code == 0
    r = rows(out)[0]
    assert float(r["delta_min"]) == pytest.approx(0.1, abs=1e-12)
    assert float(r["delta_max"]) == pytest.approx(np.mean([0.2 + 0.1 - 0.02, 0.4 + 0.1 - 0.04]), abs=1e-12)


def test_bounds_single_parameter_settings_coincide(capsys, model_file):
    code, out, _ = run(capsys, "bounds", "--model", model_file(virtual_bsc_family([0.3], [0.2])))
    assert code == 0
    by = {}
    for r in rows(out):
        by.setdefault(r["sampler"], {})[r["setting"]] = (float(r["delta_min"]), float(r["delta_max"]))
    for v in by.values():
        assert v["bayes"] == pytest.approx(v["nonbayes"], abs=1e-9)


def test_malformed_model_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"alphabets": [2, 2], "recovery_set": [1], "prior": [1.0],
                               "distortion": [0, 1, 1, 0]}))
    code, _, err = run(capsys, "bounds", "--model", bad)
    assert code == 2
    assert "MalformedModel" in err and "family" in err


def test_zero_mass_exit_2(capsys, tmp_path):
    bad = tmp_path / "z.json"
    bad.write_text(json.dumps({"alphabets": [2], "recovery_set": [1], "prior": [1.0],
                               "family": [[1.0, 0.0]], "distortion": [0, 1, 1, 0]}))
    code, _, err = run(capsys, "curve", "--model", bad)
    assert code == 2 and "ZeroMassSymbol" in err


def test_curve_matches_closed_form(capsys, model_file, bsc_model, tmp_path):
    out_file = tmp_path / "c.csv"
    code, _, _ = run(capsys, "curve", "--model", model_file(bsc_model), "--sampler", "fs:1",
                     "--delta", "0.127:0.343:9", "--out", out_file)
    assert code == 0
    data = rows(out_file.read_text())
    assert len(data) == 9
    for r in data:
        d = float(r["delta"])
        assert float(r["rate"]) == pytest.approx(first_component_bayes_rate([0.2, 0.4], [0.1, 0.1], [0.5, 0.5], d),
                                                 abs=1e-3)


def test_curve_mrs_beats_irs(capsys, model_file, xor_model):
    path = model_file(xor_model)
    grid = "0.35,0.4,0.45"
    _, out_m, _ = run(capsys, "curve", "--model", path, "--sampler", "mrs", "--setting", "nonbayes", "--delta", grid)
    _, out_i, _ = run(capsys, "curve", "--model", path, "--sampler", "irs", "--setting", "nonbayes", "--delta", grid)
    for a, b in zip(rows(out_m), rows(out_i)):
        assert float(a["rate"]) < float(b["rate"]) - 1e-3


def test_curve_single_point_at_max(capsys, model_file, bsc_model):
    hi = np.mean([0.2 + 0.1 - 0.02, 0.4 + 0.1 - 0.04])
    code, out, _ = run(capsys, "curve", "--model", model_file(bsc_model), "--sampler", "fs:1",
                       "--delta", f"{float(hi)!r}:1:1")
    assert code == 0
    data = rows(out)
    assert len(data) == 1 and float(data[0]["rate"]) == 0.0


def test_curve_all_infeasible_exit_3(capsys, model_file, bsc_model):
    code, _, _ = run(capsys, "curve", "--model", model_file(bsc_model), "--sampler", "fs:1", "--delta", "0.01,0.02")
    assert code == 3


def test_curve_json(capsys, model_file, bsc_model):
    code, out, _ = run(capsys, "curve", "--model", model_file(bsc_model), "--sampler", "fs:1",
                       "--delta", "0.2", "--format", "json")
    assert code == 0 and json.loads(out)["points"][0]["status"] == "ok"


def test_simulate_fs(capsys, model_file, bsc_model, tmp_path):
    path = model_file(bsc_model)
    outs = []
    for name in ("a.json", "b.json"):
        f = tmp_path / name
        code, _, _ = run(capsys, "simulate", "--model", path, "--sampler", "fs:1", "--n", "20,200",
                         "--trials", 2000, "--out", f)
        assert code == 0
        outs.append(f.read_bytes())
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])
    assert rep["errors"][1] < rep["errors"][0]


def test_simulate_mrs_chunks(capsys, model_file, bsc_model):
    code, out, _ = run(capsys, "simulate", "--model", model_file(bsc_model), "--sampler", "mrs", "--k", 1,
                       "--n", "10", "--trials", 50)
    assert code == 0 and json.loads(out)["chunks"] == 4


def test_simulate_signaling_impossible_exit_4(capsys, model_file, bsc_model):
    code, _, err = run(capsys, "simulate", "--model", model_file(bsc_model), "--sampler", "mrs", "--k", 2,
                       "--n", "10", "--trials", 5)
    assert code == 4 and "SignalingImpossible" in err


def test_simulate_tau_label(capsys, model_file, bsc_model):
    code, out, _ = run(capsys, "simulate", "--model", model_file(bsc_model), "--sampler", "fs:1", "--tau", "2",
                       "--n", "50", "--trials", 20)
    assert code == 0 and json.loads(out)["tau_true"] == 2


def test_compare_irs_gap_exit_0(capsys, model_file, tmp_path):
    f = tmp_path / "r.json"
    code, _, _ = run(capsys, "compare", "--model", model_file(independent_bits_family([0.3, 0.1], [0.1, 0.3])),
                     "--k", 1, "--setting", "nonbayes", "--delta", "0.3,0.33,0.36,0.39", "--format", "json",
                     "--out", f)
    assert code == 0
    rep = json.loads(f.read_text())
    irs, fs = rep["settings"]["nonbayes"]["irs"]["rates"], rep["settings"]["nonbayes"]["bestfs"]["rates"]
    assert sum(a < b - 1e-3 for a, b in zip(irs, fs)) >= 3
    assert rep["violations"] == []


def test_compare_mrs_gap_exit_0(capsys, model_file, xor_model):
    code, out, _ = run(capsys, "compare", "--model", model_file(xor_model), "--k", 1,
                       "--delta", "0.35,0.4,0.45", "--format", "json")
    assert code == 0
    rep = json.loads(out)["settings"]["nonbayes"]
    assert all(a < b - 1e-3 for a, b in zip(rep["mrs"]["rates"], rep["irs"]["rates"]))


def test_compare_corrupted_tolerance_exit_5(capsys, model_file, xor_model):
    code, _, err = run(capsys, "compare", "--model", model_file(xor_model), "--k", 1,
                       "--delta", "0.35,0.4,0.45", "--tol-gap", "-1")
    assert code == 5 and "violation" in err


def test_threads_env_validated(capsys, model_file, bsc_model, monkeypatch):
    monkeypatch.setenv("USRD_THREADS", "-2")
    code, _, err = run(capsys, "bounds", "--model", model_file(bsc_model))
    assert code == 1 and "USRD_THREADS" in err


def test_module_entry_point(model_file, bsc_model):
    res = subprocess.run([sys.executable, "-m", "usrd", "bounds", "--model", model_file(bsc_model),
                          "--sampler", "fs:1"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("sampler,k,setting")
