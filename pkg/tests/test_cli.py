import json
import subprocess
import sys

import numpy as np
import pytest

from leocd.cli import main
from leocd.raster import load_binary_map, load_score_map


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_stage_commands_compose(tmp_path, capsys):
    d = tmp_path
    code, out, _ = run(capsys, "synth", "--out", d, "--height", 16, "--width", 12, "--seed", 3)
    assert code == 0 and json.loads(out)["changed_pixels"] == 19

    assert run(capsys, "normalize", d / "reference", d / "ref_n", "--bands", "R,G,B")[0] == 0
    assert run(capsys, "normalize", d / "observed", d / "obs_n", "--bands", "R,G,B")[0] == 0
    assert run(capsys, "normalize", d / "observed", d / "obs_all")[0] == 0

    code, out, _ = run(capsys, "cloudmask", d / "obs_all", "--out", d, "--apply", d / "obs_n")
    assert code == 0 and json.loads(out)["gamma"] == 0.5
    assert (d / "cloud_removed.bin").is_file()

    assert run(capsys, "score", d / "ref_n", d / "cloud_removed", d / "scores", "--cloud", d / "cloud_mask")[0] == 0
    assert load_score_map(d / "scores").values.max() == 1.0

    code, out, _ = run(capsys, "calibrate", d / "scores", d / "change_truth", "--epsilon", 0.05, "--out", d)
    cal = json.loads(out)
    assert code == 0 and cal["achieved_miss_rate"] <= 0.05
    assert json.loads((d / "calibration.json").read_text()) == cal

    code, out, _ = run(capsys, "select", d / "prediction", d / "sel", "--bands-per-pixel", 4)
    sel = json.loads(out)
    assert sel["volume_bits"] == sel["selected_pixels"] * 48

    code, out, _ = run(capsys, "energy", d / "sel", "--out", d / "energy.json")
    rep = json.loads(out)
    assert code == 0 and rep["modcod_name"] == "QPSK 3/5"
    assert rep["savings_fraction"] == pytest.approx(1 - sel["selected_pixels"] / 192)

    code, out, _ = run(capsys, "metrics", "--scores", d / "scores", "--truth", d / "change_truth",
                       "--reconstructed", d / "observed", "--observed", d / "observed", "--out", d / "m")
    res = json.loads(out)
    assert code == 0 and res["psnr_db"] == "inf" and 0 <= res["auc"] <= 1
    for f in ("roc.csv", "histograms.csv", "cumulative.csv", "figures/roc.png", "metrics.json"):
        assert (d / "m" / f).is_file()


def test_calibrate_tau_override(tmp_path, capsys):
    run(capsys, "synth", "--out", tmp_path, "--height", 8, "--width", 8)
    code, out, _ = run(capsys, "calibrate", tmp_path / "change_truth", tmp_path / "change_truth",
                       "--tau", 0.5, "--out", tmp_path)
    # a binary map is not a score file: header says u8, which load_score_map refuses
    assert code == 3


def test_link_command(capsys):
    code, out, _ = run(capsys, "link")
    st = json.loads(out)
    assert code == 0 and st["modcod"] == "QPSK 3/5" and st["t_s"] == 0.0
    code, out, _ = run(capsys, "link", "--time", 450)
    assert json.loads(out)["slant_range_m"] == pytest.approx(786e3)
    code, out, _ = run(capsys, "link", "--snr-db", 5.5)
    assert json.loads(out)["modcod"] == "8PSK 3/5"


def test_link_outage_exit_code(capsys):
    code, _, err = run(capsys, "link", "--snr-db", -5)
    assert code == 4 and "error" in err


def test_config_error_exit_code(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"unknown": 1}))
    assert run(capsys, "pipeline", "--config", tmp_path / "c.json", "--out", tmp_path)[0] == 2
    assert run(capsys, "link", "--time", 5000)[0] == 2


def test_data_error_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "normalize", tmp_path / "missing", tmp_path / "o")
    assert code == 3 and "missing" in err


def test_pipeline_command(tmp_path, capsys):
    cfg = {"synthetic": {"height": 12, "width": 12}, "figures": False}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "pipeline", "--config", tmp_path / "c.json", "--out", tmp_path / "o",
                       "--epsilon", 0.25, "--seed", 8)
    summary = json.loads(out)
    assert code == 0 and summary["calibration"]["epsilon"] == 0.25
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["config"]["synthetic"]["seed"] == 8


def test_pipeline_stage_flag(tmp_path, capsys):
    code, out, _ = run(capsys, "pipeline", "--out", tmp_path, "--stage", "calibrate")
    assert code == 0 and "selection" not in json.loads(out)
    assert (tmp_path / "prediction.bin").is_file()
    assert not (tmp_path / "selection.bin").exists()


def test_modcod_override(tmp_path, capsys):
    (tmp_path / "m.csv").write_text("name,spectral_efficiency_bps_per_hz,gamma_min_db\nonly,1.0,-10\n")
    code, out, _ = run(capsys, "link", "--modcod", tmp_path / "m.csv")
    assert code == 0 and json.loads(out)["rate_bps"] == 5e8


def test_console_script_exit_code():
    proc = subprocess.run([sys.executable, "-m", "leocd", "link", "--snr-db", "-5"],
                          capture_output=True, text=True)
    assert proc.returncode == 4
    assert "leocd: error" in proc.stderr


def test_workers_flag(tmp_path, capsys):
    run(capsys, "pipeline", "--out", tmp_path / "a", "--workers", 1)
    run(capsys, "pipeline", "--out", tmp_path / "b", "--workers", 3)
    a = load_binary_map(tmp_path / "a" / "selection").values
    b = load_binary_map(tmp_path / "b" / "selection").values
    assert np.array_equal(a, b)
