import hashlib
import json
import os
import shutil

import numpy as np
import pytest

from gridest.cli import main

CASES_DIR = os.path.join(os.path.dirname(__file__), "..", "cases")


def sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@pytest.fixture()
def ws(tmp_path):
    """Workspace with an imported grid file."""
    case = tmp_path / "ieee14.m"
    shutil.copy(os.path.join(CASES_DIR, "ieee14.m"), case)
    grid = tmp_path / "grid.json"
    rc = main(["import", str(case), "-o", str(grid)])
    assert rc == 0
    return tmp_path


def test_import_summary_and_file(ws, capsys):
    assert (ws / "grid.json").exists()


def test_import_missing_path_exit2(tmp_path, capsys):
    rc = main(["import", str(tmp_path / "nope.m")])
    assert rc == 2
    assert capsys.readouterr().out == ""


def test_import_malformed_exit3(tmp_path, capsys):
    bad = tmp_path / "bad.m"
    bad.write_text("function mpc = bad\nmpc.baseMVA = 100;\nmpc.bus = [ 1 3 oops ];\n")
    rc = main(["import", str(bad)])
    assert rc == 3
    err = capsys.readouterr().err
    assert "import failed" in err


def test_generate_and_determinism(ws, capsys):
    out1 = ws / "a.csv"
    out2 = ws / "b.csv"
    args = ["generate", "--grid", str(ws / "grid.json"), "--case", "c1",
            "--n", "12", "--seed", "7"]
    assert main(args + ["-o", str(out1)]) == 0
    assert main(args + ["-o", str(out2)]) == 0
    assert sha(out1) == sha(out2)
    assert len(out1.read_text().splitlines()) == 13
    meta = json.loads((ws / "a.csv.meta.json").read_text())
    assert meta["config"]["seed"] == 7


def test_generate_phase_shift_flag(ws):
    out = ws / "c6.csv"
    rc = main(["generate", "--grid", str(ws / "grid.json"), "--case", "c6",
               "--n", "5", "--seed", "1", "--phase-shift", "20", "-o", str(out)])
    assert rc == 0
    meta = json.loads((ws / "c6.csv.meta.json").read_text())
    assert meta["config"]["phase_shift_deg"] == 20


def test_kron_edges_match_library(ws, capsys):
    from gridest import load_grid
    from gridest.kron import ObservabilityMask, load_reduced, reduce_case

    out = ws / "reduced.json"
    rc = main(["kron", "--grid", str(ws / "grid.json"), "--obs", "generators",
               "--threshold", "0.02", "-o", str(out)])
    assert rc == 0
    grid = load_grid((ws / "grid.json").read_text())
    expect = reduce_case(grid, ObservabilityMask.generators(grid), 0.02)
    back = load_reduced(out.read_text())
    assert back.edges == expect.edges
    assert "effective edges" in capsys.readouterr().out


def test_train_evaluate_roundtrip(ws, capsys):
    data = ws / "d.csv"
    assert main(["generate", "--grid", str(ws / "grid.json"), "--case", "c1",
                 "--n", "20", "--seed", "3", "-o", str(data)]) == 0
    ckpt = ws / "ckpt.json"
    rc = main(["train", "--model", "pgnn", "--grid", str(ws / "grid.json"),
               "--data", str(data), "--obs", "full", "--epochs", "150",
               "--lr", "5e-3", "--record-every", "50",
               "--seed", "1", "--out", str(ws), "-o", str(ckpt)])
    assert rc == 0
    assert ckpt.exists()
    runs = list((ws / "runs").iterdir())
    assert len(runs) == 1
    assert (runs[0] / "trace.csv").exists()
    trace_header = (runs[0] / "trace.csv").read_text().splitlines()[0]
    assert trace_header == "epoch,loss,data_term,reg_term"
    capsys.readouterr()
    rc = main(["evaluate", "--model", str(ckpt), "--data", str(data)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("mismatch ")
    assert out.count("\n") == 1


def test_train_divergence_exit5(ws, capsys):
    data = ws / "d2.csv"
    assert main(["generate", "--grid", str(ws / "grid.json"), "--case", "c1",
                 "--n", "10", "--seed", "4", "-o", str(data)]) == 0
    rc = main(["train", "--model", "pgnn", "--grid", str(ws / "grid.json"),
               "--data", str(data), "--obs", "full", "--epochs", "200",
               "--lr", "1e9", "--out", str(ws)])
    assert rc == 5
    assert "diverged" in capsys.readouterr().err


def test_train_checkpoint_deterministic(ws):
    data = ws / "d3.csv"
    assert main(["generate", "--grid", str(ws / "grid.json"), "--case", "c1",
                 "--n", "15", "--seed", "5", "-o", str(data)]) == 0
    c1, c2 = ws / "k1.json", ws / "k2.json"
    args = ["train", "--model", "vanilla", "--grid", str(ws / "grid.json"),
            "--data", str(data), "--obs", "full", "--epochs", "120",
            "--lr", "1e-3", "--record-every", "60", "--seed", "2", "--out", str(ws)]
    assert main(args + ["-o", str(c1)]) == 0
    assert main(args + ["-o", str(c2)]) == 0
    assert sha(c1) == sha(c2)


def test_config_file_with_flag_override(ws):
    cfg = ws / "run.json"
    cfg.write_text(json.dumps({"case": "c1", "n": 8, "seed": 9,
                               "grid": str(ws / "grid.json")}))
    out = ws / "from_cfg.csv"
    rc = main(["generate", "--config", str(cfg), "--n", "6", "-o", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 7  # flag n=6 wins over config 8


def test_sweep_reg_writes_fig4(ws, capsys):
    data = ws / "d4.csv"
    assert main(["generate", "--grid", str(ws / "grid.json"), "--case", "c1",
                 "--n", "20", "--seed", "6", "-o", str(data)]) == 0
    rc = main(["sweep-reg", "--grid", str(ws / "grid.json"), "--data", str(data),
               "--obs", "generators", "--alphas", "0,1e-4", "--epochs", "60",
               "--lr", "5e-3", "--units-per-layer", "6", "--record-every", "60",
               "--init-r", "0.1", "--init-x", "0.6", "--init-shunt-g", "0.1",
               "--init-shunt-b", "0.01", "--out", str(ws)])
    assert rc == 0
    runs = [d for d in (ws / "runs").iterdir() if (d / "fig4.csv").exists()]
    assert runs


def test_recon_curve_writes_fig2(ws):
    rc = main(["recon-curve", "--grid", str(ws / "grid.json"), "--case", "c5",
               "--counts", "4,6", "--realizations", "2", "--epochs", "80",
               "--lr", "1e-2", "--record-every", "80", "--seed", "3",
               "--init-r", "1", "--init-x", "1", "--init-shunt-g", "1",
               "--init-shunt-b", "1", "--out", str(ws)])
    assert rc == 0
    runs = [d for d in (ws / "runs").iterdir() if (d / "fig2.csv").exists()]
    assert runs
    text = (runs[0] / "fig2.csv").read_text()
    assert text.splitlines()[0] == "n_train,err_min,err_mean,err_max,failures,normalization"
