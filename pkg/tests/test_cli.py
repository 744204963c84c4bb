import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from cordes_lab.cli import main

DATA = Path(__file__).parent / "data"


def run(tmp_path, name, *args):
    out = tmp_path / name
    status = main([*args, "--out", str(out)])
    return status, out


def same_tree(a: Path, b: Path) -> bool:
    fa = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    fb = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    return fa == fb and all(filecmp.cmp(a / f, b / f, shallow=False) for f in fa)


def test_exponents_values(tmp_path):
    status, out = run(tmp_path, "e", "exponents", "--N", "4", "--gamma", "1")
    assert status == 0
    res = json.loads((out / "summary.json").read_text())["result"]
    assert res["N_eff"] == 2.5 and res["cordes_condition"]
    assert res["cordes_ratio"] == pytest.approx(25 / 7, rel=1e-15)
    assert res["indicial"][1]["beta_plus"] == 1.0


def test_radial_matches_baseline(tmp_path):
    status, out = run(tmp_path, "r", "radial", "--N", "3", "--gamma", "0", "--p", "3")
    assert status == 0
    got = np.loadtxt(out / "radial.csv", delimiter=",", skiprows=1)
    ref = np.loadtxt(DATA / "lane_emden_N3_p3.csv", delimiter=",", skiprows=1)
    assert np.allclose(got[:, 0], ref[:, 0])
    assert np.max(np.abs(got[:, 1] - ref[:, 1])) / ref[0, 1] <= 1e-6


@pytest.mark.parametrize(
    "args",
    [
        ["exponents", "--N", "5", "--gamma", "2"],
        ["linear", "--N", "4", "--gamma", "1", "--sigma", "0.25", "--k-max", "3"],
        ["norms", "--N", "4", "--gamma", "1", "--sigma", "0.25", "--trials", "4", "--m", "4"],
    ],
)
def test_byte_determinism(tmp_path, args):
    s1, a = run(tmp_path, "a", *args)
    s2, b = run(tmp_path, "b", *args)
    assert s1 == s2 == 0
    assert same_tree(a, b)


def test_window_error_exit(tmp_path, capsys):
    status, _ = run(tmp_path, "w", "linear", "--N", "4", "--gamma", "1", "--sigma", "0.7")
    assert status == 2
    err = json.loads(capsys.readouterr().out)["error"]
    assert err["kind"] == "window" and "hypothesis" in err


def test_invalid_config_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"N": 4, "gamma": 1, "colour": "red"}))
    status, _ = run(tmp_path, "c", "exponents", "--config", str(cfg))
    assert status == 2
    assert json.loads(capsys.readouterr().out)["error"]["kind"] == "invalid_input"


def test_numerical_failure_exit(tmp_path, capsys):
    with np.errstate(all="ignore"):
        status, _ = run(
            tmp_path, "n", "perturb-zero", "--N", "4", "--gamma", "3", "--p", "3", "--delta", "5", "--max-iter", "10"
        )
    assert status == 3
    assert json.loads(capsys.readouterr().out)["error"]["kind"] == "numerical_failure"


def test_config_and_flags_merge(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 4, "gamma": 3.0}))
    status, out = run(tmp_path, "m", "exponents", "--config", str(cfg), "--gamma", "1")
    assert status == 0
    assert json.loads((out / "summary.json").read_text())["manifest"]["config"]["gamma"] == 1.0


def test_verify_quick(tmp_path):
    status, out = run(tmp_path, "v", "verify", "--quick")
    assert status == 0
    assert (out / "verify.csv").read_text().count('"pass"') >= 9
