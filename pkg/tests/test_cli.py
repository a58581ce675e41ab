import filecmp
import json
import os

import numpy as np
import pytest

from glmeissner.cli import main, parse_config, run_subcommand
from glmeissner.errors import NotDivergenceFree, ParseError, ValidationError


MINIMAL = {
    "domain": {"shape": "ball", "R": 1.0},
    "spacing": 0.1,
    "eps": 0.05,
}


def write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


# -- config parsing -------------------------------------------------------------

def test_minimal_config_defaults_filled():
    cfg = parse_config(json.dumps(MINIMAL))
    assert cfg.applied_field == "uniform_z"
    assert cfg.pad == 20                       # domain diameter in cells
    assert cfg.tolerances["london"] == 1e-8
    assert cfg.seed == 0
    assert cfg.hex is None and cfg.hex_list is None


def test_config_parse_error_reports_position():
    with pytest.raises(ParseError) as err:
        parse_config("{bad json")
    assert "line" in str(err.value)


def test_hex_list_must_ascend():
    bad = dict(MINIMAL, hex_list=[3.0, 2.0, 1.0])
    with pytest.raises(ValidationError):
        parse_config(json.dumps(bad))


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError):
        parse_config(json.dumps(dict(MINIMAL, bogus=1)))
    with pytest.raises(ValidationError):
        parse_config(json.dumps(dict(MINIMAL, domain={"shape": "ball", "R": 1, "q": 2})))
    with pytest.raises(ValidationError):
        parse_config(json.dumps(dict(MINIMAL, tolerances={"nope": 1e-3})))


def test_custom_field_divergence_checked():
    ok = dict(MINIMAL, spacing=0.2,
              applied_field={"custom": ["0", "0", "cosh(x)"]})
    cfg = parse_config(json.dumps(ok))
    assert cfg.applied_field["custom"][2] == "cosh(x)"
    bad = dict(MINIMAL, spacing=0.2, applied_field={"custom": ["x", "0", "0"]})
    with pytest.raises(NotDivergenceFree):
        parse_config(json.dumps(bad))


def test_validation_messages_carry_field():
    with pytest.raises(ValidationError) as err:
        parse_config(json.dumps(dict(MINIMAL, spacing=-1)))
    assert "spacing" in str(err.value)
    with pytest.raises(ValidationError) as err:
        parse_config(json.dumps(dict(MINIMAL, eps=2.0)))
    assert "eps" in str(err.value)


# -- subcommands -----------------------------------------------------------------

def test_oracle_values(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dict(MINIMAL, eps=1e-3, output_dir=str(tmp_path / "o")))
    code = main(["oracle", "--config", cfg])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert abs(out["norm_star"] - 0.1505482) < 1e-6
    assert abs(out["hc1_leading"] - 22.939) < 0.01
    assert os.path.exists(tmp_path / "o" / "manifest.json")
    assert os.path.exists(tmp_path / "o" / "results.json")


def test_oracle_requires_ball(tmp_path, capsys):
    payload = dict(MINIMAL, domain={"shape": "box", "a": 1, "b": 1, "c": 1})
    cfg = write_cfg(tmp_path, payload)
    code = main(["oracle", "--config", cfg, "--output", str(tmp_path / "o")])
    assert code == 2


def test_london_subcommand(tmp_path, capsys):
    payload = dict(MINIMAL, spacing=0.125, pad=2)
    cfg = write_cfg(tmp_path, payload)
    code = main(["london", "--config", cfg, "--output", str(tmp_path / "L")])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert out["residual_norm"] <= 1e-8
    assert {"b0.vtk", "b0.csv", "manifest.json", "results.json"} <= set(
        os.listdir(tmp_path / "L"))
    assert "norm_star_exact" in out


def test_sweep_success_coarse(tmp_path, capsys):
    payload = dict(MINIMAL, spacing=0.15, eps=0.3, pad=2,
                   hex_list=[0.5, 20.0],
                   minimize={"max_iters": 40, "momentum": 0.9, "grad_tol": 1e-3})
    cfg = write_cfg(tmp_path, payload)
    code = main(["sweep", "--config", cfg, "--output", str(tmp_path / "sw")])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert len(out["rows"]) == 2
    assert (tmp_path / "sw" / "sweep.csv").read_text().count("\n") == 5
    assert "hc1_numeric_bracket" in out and "hc1_leading" in out and "ratio" in out


def test_sweep_too_coarse_exits_2(tmp_path, capsys):
    payload = dict(MINIMAL, spacing=0.2, eps=0.05, hex_list=[1.0, 2.0])
    cfg = write_cfg(tmp_path, payload)
    code = main(["sweep", "--config", cfg, "--output", str(tmp_path / "s")])
    assert code == 2
    out = json.loads(capsys.readouterr().out)
    assert "eps" in out["error"] or "MeshTooCoarse" in out.get("kind", "")


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["oracle", "--config", str(tmp_path / "nope.json")]) == 2


def test_splitcheck(tmp_path, capsys):
    payload = dict(MINIMAL, spacing=0.125, pad=2, eps=0.35, hex=1.2)
    cfg = write_cfg(tmp_path, payload)
    code = main(["splitcheck", "--config", cfg, "--output", str(tmp_path / "sc")])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    r = out["residuals"]
    assert r[1] < r[0] and r[2] < r[1]
    assert out["slope"] >= 1.8


def test_normstar_subcommand(tmp_path, capsys):
    payload = dict(MINIMAL, spacing=0.125, pad=2)
    cfg = write_cfg(tmp_path, payload)
    code = main(["normstar", "--config", cfg, "--output", str(tmp_path / "n")])
    out = json.loads(capsys.readouterr().out)
    assert code == 0
    assert out["value"] > 0
    assert abs(out["integral"] / out["length"] - out["value"]) < 1e-9
    lines = (tmp_path / "n" / "curve.csv").read_text().splitlines()
    assert lines[0].startswith("# value=")
    assert lines[1] == "x,y,z"


def test_energy_and_minimize_subcommands(tmp_path, capsys):
    payload = dict(MINIMAL, spacing=0.125, pad=2, eps=0.3, hex=0.5,
                   state={"kind": "meissner", "amplitude": 0.05},
                   minimize={"max_iters": 30, "record_history": True})
    cfg = write_cfg(tmp_path, payload)
    assert main(["energy", "--config", cfg, "--output", str(tmp_path / "e")]) == 0
    out_e = json.loads(capsys.readouterr().out)
    assert out_e["total"] > 0
    assert main(["minimize", "--config", cfg, "--output", str(tmp_path / "m")]) == 0
    out_m = json.loads(capsys.readouterr().out)
    assert out_m["total"] <= out_e["total"] + 1e-9
    assert (tmp_path / "m" / "trace.csv").exists()


# -- determinism -----------------------------------------------------------------

def _tree_bytes(root):
    out = {}
    for name in sorted(os.listdir(root)):
        with open(os.path.join(root, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_repeated_runs_bit_identical(tmp_path, capsys):
    payload = dict(MINIMAL, spacing=0.125, pad=2, eps=0.3, hex=0.5, seed=42,
                   state={"kind": "meissner", "amplitude": 0.1},
                   minimize={"max_iters": 15, "record_history": True})
    cfg = write_cfg(tmp_path, payload)
    for sub in ("london", "minimize"):
        a = str(tmp_path / f"{sub}_a")
        b = str(tmp_path / f"{sub}_b")
        assert main([sub, "--config", cfg, "--output", a]) == 0
        assert main([sub, "--config", cfg, "--output", b]) == 0
        capsys.readouterr()
        ta, tb = _tree_bytes(a), _tree_bytes(b)
        assert set(ta) == set(tb)
        for name in ta:
            if name == "manifest.json":
                continue
            assert ta[name] == tb[name], name
