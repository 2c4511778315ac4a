import json

import pytest

from legendrian_lab.cli import main, parse_radii
from legendrian_lab.io import read_csv


def _run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def test_parse_radii():
    assert parse_radii("0.4:0.05:dyadic") == [0.4, 0.2, 0.1, 0.05]
    assert len(parse_radii("0.01:1:geom:5")) == 5
    assert parse_radii("0.3,0.2") == [0.3, 0.2]
    with pytest.raises(ValueError):
        parse_radii("a:b:dyadic")


def test_winding_run_writes_manifest(tmp_path, capsys):
    code, out = _run(tmp_path, "w", "winding")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["summary"]["winding"] == [1]
    rows = read_csv(out / man["files"][0])
    assert rows and "config_hash" in rows[0] and rows[0]["config_hash"] == man["config_hash"]
    assert "winding" in capsys.readouterr().out


def test_degree_param_override(tmp_path):
    code, out = _run(tmp_path, "d", "degree", "--scenario", "zk-branch", "--param", "scenario_params={\"k\": 3}")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["params"]["scenario_params"] == {"k": 3}


def test_config_file_sections(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"calibrate-check": {"samples": 300, "refine_steps": 3}, "seed": 5}))
    code, out = _run(tmp_path, "c", "calibrate-check", "--config", str(cfg))
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["seed"] == 5 and man["config"]["params"]["samples"] == 300


def test_validation_errors(tmp_path, capsys):
    assert main(["nonsense"]) == 2
    assert _run(tmp_path, "x", "winding", "--scenario", "torus")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"frobnicate": {}}))
    assert _run(tmp_path, "y", "winding", "--config", str(bad))[0] == 2
    assert _run(tmp_path, "z", "winding", "--param", "noequals")[0] == 2
    assert _run(tmp_path, "t", "tangent-cone", "--radii", "0.04,0.03,0.02")[0] == 2
    assert "error" in capsys.readouterr().err


def _bytes(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".csv", ".svg")}


def test_reruns_are_byte_identical(tmp_path):
    args = ["calibrate-check", "--samples", "400", "--param", "refine_steps=3", "--seed", "7", "--plot"]
    _, a = _run(tmp_path, "a", *args)
    _, b = _run(tmp_path, "b", *args)
    assert _bytes(a) == _bytes(b) and _bytes(a)
    _, c = _run(tmp_path, "c", *args[:-3], "--seed", "8")
    assert _bytes(c) != _bytes(a)


def test_plot_is_deterministic(tmp_path):
    args = ["holder-fit", "--plot"]
    _, a = _run(tmp_path, "a", *args)
    _, b = _run(tmp_path, "b", *args)
    ba, bb = _bytes(a), _bytes(b)
    assert "decay.svg" in ba and ba == bb


def test_kronecker_command(tmp_path):
    code, out = _run(tmp_path, "k", "kronecker")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["summary"]["indices"] == [1, 2, 3]
