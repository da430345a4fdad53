import csv
import json
import os

import numpy as np
import pytest

from dropdim.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_PASS, main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def cfg_path(name):
    return os.path.join(CONFIGS, name)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_linmodel_desk(tmp_path):
    out = tmp_path / "lin"
    assert main(["linmodel", "--config", cfg_path("linmodel.cfg"), "--out", str(out)]) == EXIT_PASS
    rows = read_csv(out / "visits.csv")
    assert rows[0] == ["i", "k", "distance"] and len(rows) == 6
    assert all(float(r[2]) < 0.1 for r in rows[1:])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == 0 and "report.txt" in manifest["files"]


def test_linmodel_sigma_too_large(tmp_path, capsys):
    path = write(tmp_path, "bad.cfg", "[linmodel]\nn = 2\nmu = 0.5\nlam = 2\nmu_p = 0.4\n"
                 "lam_f = 1.5\neps = 0.1\nsigma = 0.2\neta = 0.5\n")
    assert main(["linmodel", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "sigma < eps" in capsys.readouterr().err


def test_missing_file(tmp_path):
    status = main(["linmodel", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)])
    assert status == EXIT_IO


def test_config_error_line(tmp_path, capsys):
    path = write(tmp_path, "bad.cfg", "[triangular]\nregime = mu_dominant\nt_end = soon\n")
    assert main(["triangular", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_triangular_mu_dominant(tmp_path):
    out = tmp_path / "tri"
    assert main(["triangular", "--config", cfg_path("triangular_mu_dominant.cfg"), "--out", str(out)]) == EXIT_PASS
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "x1", "x2", "x3", "x4"]
    assert np.max(np.abs(np.array(rows[-1][1:], dtype=float) - 1)) < 1e-3
    times = [float(r[1]) for r in read_csv(out / "transitions.csv")[1:]]
    assert times == sorted(times) and len(set(times)) == 4


def test_triangular_zero_horizon(tmp_path):
    path = write(tmp_path, "t0.cfg", "[triangular]\nregime = lam_dominant\nt_end = 0\n")
    out = tmp_path / "t0"
    assert main(["triangular", "--config", path, "--out", str(out)]) == EXIT_PASS
    rows = read_csv(out / "trajectory.csv")
    assert len(rows) == 2
    assert [float(v) for v in rows[1][1:]] == [1e-1, 1e-2, 1e-3, 1e-4]


def test_toymodel_desk(tmp_path):
    out = tmp_path / "toy"
    assert main(["toymodel", "--config", cfg_path("toymodel.cfg"), "--out", str(out),
                 "--threads", "2"]) == EXIT_PASS
    report = (out / "report.txt").read_text()
    assert report.count("[certificate ") == 7
    assert len(read_csv(out / "params.csv")) == 5
    events = [r[3] for r in read_csv(out / "itinerary.csv")[1:]]
    assert events.count("closest") == 4


def test_toymodel_inadmissible_T(tmp_path, capsys):
    path = write(tmp_path, "t.cfg", "[toymodel]\nN = 3\nT = 4\n")
    assert main(["toymodel", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_FAIL
    assert "center-bound" in capsys.readouterr().err


def test_toymodel_single_chart(tmp_path):
    path = write(tmp_path, "t.cfg", "[toymodel]\nN = 0\n")
    assert main(["toymodel", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_PASS


def test_verify_doubling(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", cfg_path("doubling.chain"), "--out", str(out)]) == EXIT_PASS
    rows = read_csv(out / "solution.csv")
    assert float(rows[1][1]) == 0.0
    assert "passed = true" in (out / "report.txt").read_text()


def test_verify_drop_chain(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--config", cfg_path("saddle_drop.chain"), "--out", str(out)]) == EXIT_PASS
    assert "[solution]" in (out / "report.txt").read_text()


def test_verify_bad_alternation(tmp_path, capsys):
    path = write(tmp_path, "bad.chain", "hset N\n  center 0\n  block x 1 1 exit\nend\nchain\n  N\n  N\nend\n")
    assert main(["verify", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "line 7" in capsys.readouterr().err


def test_verify_failing_chain(tmp_path):
    path = write(tmp_path, "id.chain", "hset N\n  center 0\n  block x 1 1 exit\nend\n"
                 "affine f\n  row 1\nend\nchain\n  N\n  f\n  N\nend\n")
    assert main(["verify", path, "--out", str(tmp_path / "o")]) == EXIT_FAIL


@pytest.mark.parametrize("cmd, cfg", [("linmodel", "linmodel.cfg"), ("triangular", "triangular_balanced.cfg"),
                                      ("verify", "saddle_drop.chain")])
def test_outputs_are_reproducible(tmp_path, cmd, cfg):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        argv = [cmd, cfg_path(cfg)] if cmd == "verify" else [cmd, "--config", cfg_path(cfg)]
        assert main(argv + ["--out", str(out), "--seed", "7"]) == EXIT_PASS
        outs.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "manifest.json"})
    assert outs[0] == outs[1] and outs[0]


def test_bad_seed(tmp_path):
    assert main(["verify", cfg_path("doubling.chain"), "--out", str(tmp_path), "--seed", "-1"]) == EXIT_CONFIG
