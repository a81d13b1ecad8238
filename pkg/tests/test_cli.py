import json
import subprocess
import sys

import numpy as np
import pytest

from meroproj.algebra import RationalFunction, X
from meroproj.cli import main


def run(capsys, tmp_path, doc, *argv):
    path = tmp_path / "in.json"
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    code = main([argv[0], "--input", str(path), *argv[1:]])
    return code, json.loads(capsys.readouterr().out)


def test_schwarzian(capsys, tmp_path):
    code, out = run(capsys, tmp_path, {"f": (X**2).to_json()}, "schwarzian")
    assert code == 0
    assert RationalFunction.from_json(out["q"]).allclose(-1.5 / X**2)
    assert out["q_text"] == "(-1.5)/(x^2)"
    m = out["manifest"]
    assert m["command"] == "schwarzian" and len(m["input_sha256"]) == 64
    assert "wall_time_s" not in m


def test_output_is_deterministic(capsys, tmp_path):
    doc = {"f": ((X**3 + 1) / (X - 2)).to_json()}
    _, a = run(capsys, tmp_path, doc, "schwarzian")
    _, b = run(capsys, tmp_path, doc, "schwarzian")
    assert a == b


def test_timing_flag(capsys, tmp_path):
    _, out = run(capsys, tmp_path, {"f": (X**2).to_json()}, "schwarzian", "--timing")
    assert out["manifest"]["wall_time_s"] >= 0


def test_malformed_json(capsys, tmp_path):
    code, out = run(capsys, tmp_path, "{not json", "schwarzian")
    assert code == 2
    assert set(out["error"]) == {"code", "message"}


def test_missing_field(capsys, tmp_path):
    code, out = run(capsys, tmp_path, {"g": 1}, "schwarzian")
    assert code == 2 and "f" in out["error"]["message"]


def test_constant_map_error(capsys, tmp_path):
    code, out = run(capsys, tmp_path, {"f": RationalFunction.const(3).to_json()}, "schwarzian")
    assert code != 0 and out["error"]["code"] == "ConstantInput"


def test_normal_form_fixture(capsys):
    assert main(["normal-form", "--fixture", "hypergeometric"]) == 0
    out = json.loads(capsys.readouterr().out)
    res = sorted(v[0] for v in (out["formal"]["residue_plus"], out["formal"]["residue_minus"]))
    assert np.allclose(res, [-1 / 6, 1 / 6])


def test_formal_data_airy(capsys):
    assert main(["formal-data", "--fixture", "airy"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert "IrregularRamified" in json.dumps(out)


def test_monodromy_fixture(capsys):
    assert main(["monodromy", "--fixture", "hypergeometric", "--tol", "1e-10"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["generators"]) == 3


def test_stokes_fixture(capsys):
    assert main(["stokes", "--fixture", "airy"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["stokes"]) == 3
    assert out["product_check"] < 1e-6


def test_jacobian_fixture(capsys):
    assert main(["jacobian", "--fixture", "heun", "--threads", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rank"] == out["expected"] == 2 and out["pass"]


def test_check_subset(capsys, tmp_path):
    code, out = run(capsys, tmp_path, {}, "check", "--only", "1,9", "--scale", "0.1")
    assert code == 0 and out["all_pass"]
    assert [r["number"] for r in out["results"]] == [1, 9]


def test_bad_clearance(capsys):
    code = main(["monodromy", "--fixture", "hypergeometric", "--path-clearance", "0.7"])
    assert code == 2
    assert "error" in json.loads(capsys.readouterr().out)


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "meroproj", "schwarzian"], input="[]", capture_output=True, text=True)
    assert p.returncode == 2
    assert json.loads(p.stdout)["error"]["code"]
