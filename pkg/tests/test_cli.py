import csv
import json
import subprocess
import sys

import pytest

from vocfrt import config
from vocfrt.cli import CSV_COLUMNS, main

HEADER = ("t_s,v_pcc_a_V,v_pcc_b_V,v_pcc_c_V,i_inv_a_A,i_inv_b_A,i_inv_c_A,p_W,q_var,"
          "p_a_W,p_b_W,p_c_W,v_voc_a_V,sin_delta,frt_mode,limiter_d,limiter_mag,breaker")


def short_config(tmp_path, name="short.json", **patch):
    doc = config.preset("paper-sec2-frt")
    doc = config.set_key(doc, "simulation.duration_s", 0.65)
    doc = config.set_key(doc, "fault.t_start_s", 0.1)
    doc = config.set_key(doc, "fault.t_clear_s", 0.15)
    for k, v in patch.items():
        doc = config.set_key(doc, k.replace("__", "."), v)
    path = tmp_path / name
    path.write_text(config.dumps(doc))
    return path


def read(path):
    return path.read_bytes()


def test_run_writes_outputs_and_echo_reproduces(tmp_path):
    cfg = short_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a), "--workers", "1"]) == 0
    assert main(["run", "--config", str(a / "scenario.json"), "--out", str(b)]) == 0
    for f in ("timeseries.csv", "metrics.json", "scenario.json"):
        assert read(a / f) == read(b / f)
    lines = (a / "timeseries.csv").read_text().splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 1 + 6500
    m = json.loads((a / "metrics.json").read_text())
    assert m["complete"] is True
    assert all(not isinstance(v, (dict, list)) for v in m.values())


def test_header_matches_schema():
    assert ",".join(h for h, _ in CSV_COLUMNS) == HEADER


def test_dt_and_decimate_overrides(tmp_path):
    cfg = short_config(tmp_path)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out),
                 "--dt", "2e-5", "--decimate", "10"]) == 0
    echo = json.loads((out / "scenario.json").read_text())
    assert echo["simulation"]["dt_us"] == pytest.approx(20.0)
    rows = list(csv.reader((out / "timeseries.csv").open()))
    assert float(rows[2][0]) - float(rows[1][0]) == pytest.approx(2e-4)


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "frt": {\n    "gamma": 0.1\n  }\n}\n')
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "line 3" in err and "frt.gamma" in err
    assert main(["run", "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o")]) == 1


def test_nonfinite_exit_code(tmp_path):
    cfg = short_config(tmp_path, inner__k_pc_V_per_A=1e4, simulation__dt_us=50.0,
                       simulation__decimate=1)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    m = json.loads((out / "metrics.json").read_text())
    assert m["complete"] is False
    assert (out / "timeseries.csv").read_text().startswith(HEADER)


def test_compare_identical_configs_has_zero_deltas(tmp_path):
    cfg = short_config(tmp_path)
    out = tmp_path / "c"
    assert main(["compare", str(cfg), str(cfg), "--out", str(out), "--workers", "1"]) == 0
    res = json.loads((out / "compare.json").read_text())
    assert set(res["deltas"]) == {"max_dsin_fault", "min_p_post_W", "recovery_time_s"}
    assert all(v in (0, 0.0, None) for v in res["deltas"].values())
    assert res["deltas"]["max_dsin_fault"] == 0.0
    assert (out / "compare.txt").exists()


def test_single_point_sweep_equals_run(tmp_path):
    cfg = short_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"),
                 "--param", "frt.gamma_A_per_V", "--values", "0.05", "--workers", "1"]) == 0
    m = json.loads((tmp_path / "r" / "metrics.json").read_text())
    s = json.loads((tmp_path / "s" / "sweep.json").read_text())
    assert s["rows"] == [m]
    rows = list(csv.reader((tmp_path / "s" / "sweep.csv").open()))
    assert rows[0][0] == "frt.gamma_A_per_V" and len(rows) == 2


def test_sweep_range_and_unknown_param(tmp_path):
    cfg = short_config(tmp_path, simulation__duration_s=0.1, fault__phases="")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"),
                 "--param", "voc.p_ref_kW", "--range", "1", "4", "3", "--log",
                 "--workers", "1"]) == 0
    s = json.loads((tmp_path / "s" / "sweep.json").read_text())
    assert s["values"] == pytest.approx([1.0, 2.0, 4.0])
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"),
                 "--param", "voc.nope", "--values", "1"]) == 1


def test_analyze_prediction_only(tmp_path):
    out = tmp_path / "a"
    assert main(["analyze", "--preset", "paper-sec2-baseline", "--out", str(out),
                 "--n-delta", "3", "--n-sag", "2"]) == 0
    rows = list(csv.reader((out / "analysis.csv").open()))
    assert rows[0] == ["delta_c_rad", "sag_pu", "predicted", "margin_A", "simulated", "agree"]
    assert len(rows) == 1 + 6
    summary = json.loads((out / "analysis.json").read_text())
    assert summary["points"] == 6 and "agreement" not in summary


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "vocfrt", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for cmd in ("run", "compare", "analyze", "sweep"):
        assert cmd in res.stdout


def test_compare_baseline_against_frt(tmp_path):
    out = tmp_path / "c"
    assert main(["compare", "paper-sec2-baseline", "paper-sec2-frt", "--out", str(out),
                 "--workers", "1"]) == 0
    res = json.loads((out / "compare.json").read_text())
    base, frt = (res["metrics"][n] for n in res["configs"])
    assert res["deltas"]["max_dsin_fault"] < 0
    assert base["reversal"] and not frt["reversal"]


def test_gamma_sweep_settles_faster_with_gain(tmp_path):
    out = tmp_path / "g"
    assert main(["sweep", "--preset", "paper-sec2-frt", "--out", str(out),
                 "--param", "frt.gamma_A_per_V", "--range", "0.02", "0.2", "4", "--log",
                 "--workers", "1"]) == 0
    rows = json.loads((out / "sweep.json").read_text())["rows"]
    settle = [r["fault_settle_time_s"] for r in rows]
    assert all(a > b for a, b in zip(settle, settle[1:]))
