import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import trapezoid

from stochgm.cli import main
from stochgm.metrics import TABULATED_PERIODS, TimeSeries
from stochgm.report import read_json, read_trace_csv, write_trace_csv


def rows_of(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_predict_pga(capsys):
    assert main(["predict", "--mw", "5.6", "--rrup", "10", "--vs30", "800",
                 "--param", "sa"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema_version"] == "1.0"
    preds = doc["predictions"]
    assert len(preds) == len(TABULATED_PERIODS)
    pga = preds[0]
    assert pga["target"] == "PGA" and pga["period_s"] == 0
    assert pga["median"] == pytest.approx(0.1510, rel=1e-3)
    assert pga["sigma"] == 0.84507


def test_predict_all_to_file(tmp_path):
    out = tmp_path / "p.json"
    assert main(["predict", "--mw", "5.6", "--rrup", "1", "--vs30", "800",
                 "--out", str(out)]) == 0
    doc = read_json(out)
    targets = [p["target"] for p in doc["predictions"]]
    assert targets.count("AI") == 2 and targets.count("DSR") == 2
    a = next(p for p in doc["predictions"] if p["target"] == "A")
    assert a["median"] == pytest.approx(3.55833)
    lnb = next(p for p in doc["predictions"] if p["target"] == "lnB")
    assert lnb["B_median"] == pytest.approx(0.3635, abs=5e-5)


def test_predict_flags_out_of_range(capsys):
    assert main(["predict", "--mw", "7.5", "--rrup", "10", "--vs30", "800",
                 "--param", "ai", "--hdef", "AM"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["range_flags"] and doc["predictions"][0]["hdef"] == "AM"


def test_predict_errors(capsys):
    assert main(["predict", "--mw", "5", "--rrup", "0", "--vs30", "800",
                 "--param", "fc"]) == 1
    assert "R_RUP" in capsys.readouterr().err
    assert main(["predict", "--mw", "5", "--rrup", "10", "--vs30", "800",
                 "--param", "ai", "--hdef", "IND"]) == 1
    with pytest.raises(SystemExit) as e:
        main(["predict", "--mw", "5", "--bogus"])
    assert e.value.code != 0


def simulate(out, *extra):
    return main(["simulate", "--mw", "5", "--rrup", "50", "--vs30", "550", "--n", "2",
                 "--seed", "7", "--out-dir", str(out), *extra])


def test_simulate_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert simulate(a) == 0
    assert simulate(b, "--no-plots", "--jobs", "2") == 0
    for name in ("traces/sim_00000.csv", "traces/sim_00001.csv", "ensemble_stats.csv",
                 "spectrum_summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "spectra.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert (a / "parameters.png").stat().st_size > 1000
    assert not (b / "spectra.png").exists()

    doc = read_json(a / "manifest.json")
    assert doc["kind"] == "ensemble" and len(doc["simulations"]) == 2
    assert doc["config"]["master_seed"] == "7"
    assert doc["periods_s"] == list(TABULATED_PERIODS)
    sim = doc["simulations"][1]
    assert sim["trace"] == "traces/sim_00001.csv"
    ts = read_trace_csv(a / sim["trace"])
    assert ts.dt == pytest.approx(0.01)
    ai = np.pi / (2 * 9.81) * trapezoid(ts.samples ** 2, dx=ts.dt)
    assert ai == pytest.approx(sim["params"]["ai"], rel=1e-6)

    stats = rows_of(a / "ensemble_stats.csv")
    assert [r["index"] for r in stats] == ["0", "1"]
    assert "sa_1.3622_g" in stats[0] and "sa_0_g" not in stats[0]
    summary = rows_of(a / "spectrum_summary.csv")
    assert len(summary) == 22 and float(summary[0]["period_s"]) == 0.0


def test_simulate_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# scenario\nmw = 5\nrrup = 50\nvs30 = 550\nn_sims = 1\n"
                   "master_seed = 3\ntruncate_sigma = 0\n", encoding="utf-8")
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--seed", "4", "--out-dir", str(out),
                 "--no-plots"]) == 0
    doc = read_json(out / "manifest.json")
    assert doc["config"]["master_seed"] == "4"
    assert doc["config"]["truncate_sigma"] == 0
    assert doc["config"]["n_sims"] == 1

    cfg.write_text("mw = 5\nrrup = 50\nvs30 = 550\ncolour = red\n", encoding="utf-8")
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(out)]) == 1
    assert main(["simulate", "--mw", "5", "--out-dir", str(out)]) == 1


def test_simulate_without_traces(tmp_path):
    out = tmp_path / "n"
    assert simulate(out, "--no-traces", "--no-plots") == 0
    assert not (out / "traces").exists()
    assert read_json(out / "manifest.json")["simulations"][0]["trace"] is None


@pytest.fixture(scope="module")
def ensemble_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ens")
    assert main(["simulate", "--mw", "5", "--rrup", "50", "--vs30", "550", "--n", "4",
                 "--seed", "11", "--out-dir", str(out), "--no-plots"]) == 0
    return out


def test_select(ensemble_dir, tmp_path):
    sel = tmp_path / "sel.json"
    assert main(["select", "--ensemble", str(ensemble_dir / "manifest.json"),
                 "--target", str(ensemble_dir / "spectrum_summary.csv"), "--k", "2",
                 "--out", str(sel)]) == 0
    doc = read_json(sel)
    assert doc["kind"] == "selection" and len(doc["selection"]) == 2
    assert [s["rank"] for s in doc["selection"]] == [1, 2]
    assert doc["selection"][0]["mse_ln_sa"] <= doc["selection"][1]["mse_ln_sa"]
    assert doc["selection"][0]["trace"].startswith("traces/")


def test_select_exact_member_and_empty(ensemble_dir, tmp_path):
    man = read_json(ensemble_dir / "manifest.json")
    target = tmp_path / "t.csv"
    with open(target, "w", encoding="utf-8") as fh:
        fh.write("period_s,sa_g\n")
        for p, v in zip(man["periods_s"], man["simulations"][2]["sa_g"]):
            fh.write(f"{p!r},{v!r}\n")
    sel = tmp_path / "s.json"
    args = ["select", "--ensemble", str(ensemble_dir / "manifest.json"),
            "--target", str(target), "--out", str(sel)]
    assert main(args + ["--k", "1"]) == 0
    assert read_json(sel)["selection"][0]["index"] == 2
    assert main(args + ["--k", "0"]) == 0
    assert read_json(sel)["selection"] == []
    assert main(args + ["--k", "5"]) == 1
    assert main(args[:2] + [str(target)] + args[3:] + ["--k", "1"]) == 1


def test_analyze_trace_and_record(tmp_path, knet_file):
    t = np.arange(1500) * 0.01
    x = np.where(t > 3, np.sin(2 * np.pi * 4 * t) * np.exp(-(t - 3) / 3), 0.0)
    x += 1e-4 * np.random.default_rng(0).normal(size=t.size)
    trace = tmp_path / "tr.csv"
    write_trace_csv(trace, TimeSeries(x, 0.01))
    out = tmp_path / "an.csv"
    assert main(["analyze", str(trace), str(knet_file), "--out", str(out)]) == 0
    rows = rows_of(out)
    assert len(rows) == 2
    assert rows[0]["fc_status"] in ("ok", "unusable", "empty-band")
    assert abs(float(rows[0]["p_arrival_s"]) - 3.0) < 0.2
    assert float(rows[1]["pga_g"]) > 0
    assert "pga_g" in rows[0] and "sa_0.0384_g" in rows[0]
    assert list(rows[0]).count("pga_g") == 1
    assert main(["analyze", str(trace), "--no-fc", "--out", str(out)]) == 0
    assert rows_of(out)[0]["fc_status"] == "skipped"
    assert main(["analyze", str(tmp_path / "missing.csv"), "--out", str(out)]) == 1


def test_parse(tmp_path, knet_file, knet_counts):
    out = tmp_path / "p"
    assert main(["parse", str(knet_file), "--out-dir", str(out), "--roundtrip"]) == 0
    stem = knet_file.name.replace(".", "_")
    ts = read_trace_csv(out / f"{stem}.csv")
    assert len(ts) == knet_counts.size and ts.dt == pytest.approx(0.01)
    head = read_json(out / f"{stem}.header.json")
    assert head["header"]["station_code"] == "NIG019"
    assert head["scale_gal_per_count"] == [3920, 6182761]
    assert (out / f"{stem}.roundtrip.txt").exists()
    bad = tmp_path / "bad.txt"
    bad.write_text("Scale Factor      oops\n", encoding="ascii")
    assert main(["parse", str(bad), "--out-dir", str(out)]) == 1


def test_filter(tmp_path):
    meta = tmp_path / "m.csv"
    meta.write_text("record_id,mw,depth_km,vs30,pga_gal\n"
                    "a,4.4,10,600,3\nb,5.0,10,450,3\nc,5.0,10,600,3\n", encoding="utf-8")
    out = tmp_path / "f.csv"
    assert main(["filter", str(meta), "--out", str(out)]) == 0
    assert [(r["record_id"], r["accepted"], r["rule"]) for r in rows_of(out)] == [
        ("a", "false", "magnitude"), ("b", "false", "vs30"), ("c", "true", "")]


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "stochgm.cli", "predict", "--mw", "5.6",
                        "--rrup", "10", "--vs30", "800", "--param", "dsr"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert json.loads(r.stdout)["predictions"][0]["target"] == "DSR"
    r = subprocess.run([sys.executable, "-m", "stochgm.cli", "nonsense"],
                       capture_output=True, text=True, check=False)
    assert r.returncode != 0
