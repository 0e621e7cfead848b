from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from cellavg.cli import main
from cellavg.scene import SceneError, load_scene, scene_from_dict

from conftest import GAMMA_DIAMOND_001, GAMMA_E3, W_IDENTITY

SCENES = Path(__file__).resolve().parent.parent / "scenes"

REFERENCE = {
    "version": 1,
    "domain": {"type": "named", "name": "unit_cube"},
    "potential": {"name": "quadratic_cutoff"},
    "deformation": {"type": "none"},
    "densities": [{"label": "W"}, {"label": "gamma", "normal": [0, 0, 1]},
                  {"label": "gamma_diamond", "miller": [0, 0, 1]}],
}


def write(tmp_path, obj, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2) if not isinstance(obj, str) else obj)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_density_reference(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["density", "--scene", write(tmp_path, REFERENCE), "--out", str(out)]) == 0
    rows = {r["label"]: float(r["value"]) for r in read_csv(out)}
    assert rows["W"] == pytest.approx(W_IDENTITY, rel=1e-14)
    assert rows["gamma"] == pytest.approx(GAMMA_E3, rel=1e-14)
    assert rows["gamma_diamond"] == pytest.approx(GAMMA_DIAMOND_001, rel=1e-14)
    assert out.read_text().splitlines()[0] == "label,F,normal,value"
    meta = json.loads((tmp_path / "d.meta.json").read_text())
    assert meta["scene"] == REFERENCE
    assert scene_from_dict(meta["scene"]).densities == scene_from_dict(REFERENCE).densities


def test_density_zero_potential(tmp_path):
    scene = dict(REFERENCE, potential={"name": "zero"})
    out = tmp_path / "z.csv"
    assert main(["density", "--scene", write(tmp_path, scene), "--out", str(out)]) == 0
    assert all(float(r["value"]) == 0.0 for r in read_csv(out))


def test_sigma_without_interface_is_invalid(tmp_path, capsys):
    scene = dict(REFERENCE, densities=["W", {"label": "sigma"}])
    assert main(["density", "--scene", write(tmp_path, scene)]) == 2
    assert "line " in capsys.readouterr().err


def test_unknown_field_reports_line(tmp_path, capsys):
    text = '{\n  "version": 1,\n  "domain": {"type": "named", "name": "unit_cube"},\n' \
           '  "potential": {"name": "quadratic_cutoff"},\n  "colour": "red"\n}\n'
    assert main(["density", "--scene", write(tmp_path, text)]) == 2
    assert "line 5" in capsys.readouterr().err


def test_line_numbers_in_nested_sections():
    text = '{\n "version": 1,\n "domain": {"type": "named", "name": "unit_cube"},\n' \
           ' "potential": {\n  "name": "quadratic_cutoff",\n  "param": {}\n }\n}'
    with pytest.raises(SceneError) as info:
        load_scene(text)
    assert info.value.line == 6


def test_version_and_syntax(tmp_path):
    assert main(["density", "--scene", write(tmp_path, dict(REFERENCE, version=2))]) == 2
    assert main(["density", "--scene", write(tmp_path, '{"version": 1,')]) == 2
    assert main(["density", "--scene", str(tmp_path / "missing.json")]) == 2


def test_piecewise_requires_interface(tmp_path):
    scene = dict(REFERENCE, deformation={"type": "piecewise", "F_minus": np.eye(3).tolist()})
    scene.pop("densities")
    assert main(["density", "--scene", write(tmp_path, scene)]) == 2


def test_non_invertible_is_numerical_failure(tmp_path):
    scene = {"version": 1, "domain": {"type": "named", "name": "cube"},
             "potential": {"name": "quadratic_cutoff"},
             "deformation": {"type": "piecewise", "F_minus": np.eye(3).tolist()},
             "interface": {"miller": [0, 0, 1], "a": [0, 0, -2]}}
    assert main(["density", "--scene", write(tmp_path, scene)]) == 1


def test_invalid_proposition(tmp_path):
    assert main(["expand", "--scene", str(SCENES / "cube_polyhedron.json"), "--proposition", "P9"]) == 2


def test_expand_columns_and_summary(tmp_path):
    scene = json.loads((SCENES / "cube_polyhedron.json").read_text())
    scene["schedule"] = {"kind": "reciprocal", "k_min": 4, "k_max": 12}
    out = tmp_path / "e.csv"
    assert main(["expand", "--scene", write(tmp_path, scene), "--proposition", "P4", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "k,eps,energy,prediction,scaled_residual"
    meta = json.loads((tmp_path / "e.meta.json").read_text())
    assert meta["summary"]["target_surface"] == pytest.approx(6 * GAMMA_DIAMOND_001, rel=1e-12)


def test_expand_json_format(tmp_path, capsys):
    scene = json.loads((SCENES / "cube_polyhedron.json").read_text())
    scene["schedule"] = {"kind": "reciprocal", "k_min": 4, "k_max": 8}
    assert main(["expand", "--scene", write(tmp_path, scene), "--proposition", "P4", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["rows"]) == 5 and "fitted_surface" in doc["summary"]


def test_threads_do_not_change_bytes(tmp_path):
    scene = json.loads((SCENES / "shear_interface.json").read_text())
    scene["schedule"] = {"kind": "reciprocal", "k_min": 4, "k_max": 9}
    path = write(tmp_path, scene)
    outs = []
    for t in ("1", "4"):
        out = tmp_path / f"t{t}.csv"
        assert main(["expand", "--scene", path, "--proposition", "P5", "--threads", t, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_miller_command(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["miller", "--scene", str(SCENES / "shear_interface.json"), "--j-max", "12", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0]["miller"] == "1 1 1"
    gaps = [float(r["tau_gap"]) for r in rows]
    assert gaps[-1] < gaps[0]


def test_remainder_half_open(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["remainder", "--scene", str(SCENES / "half_open_cube.json"), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert all(float(r["remainder"]) == 0.0 for r in rows)
    assert all(r["count_difference"] == "0" for r in rows)


def test_remainder_boundary_override(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["remainder", "--scene", str(SCENES / "half_open_cube.json"), "--boundary", "closed",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    k = int(rows[0]["k"])
    assert float(rows[0]["remainder"]) == pytest.approx(1 - (k + 1) ** 3 / k**3)


def test_theta_override_switches_schedule(tmp_path, capsys):
    scene = json.loads((SCENES / "half_open_cube.json").read_text())
    assert main(["remainder", "--scene", write(tmp_path, scene), "--theta", "0.37", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"][0]["eps"] == pytest.approx(1 / 2.37)


def test_oracle_command(tmp_path):
    scene = json.loads((SCENES / "affine_oracle.json").read_text())
    scene["domain"] = {"type": "box", "lo": [0, 0, 0], "hi": [4 / 3] * 3}
    out = tmp_path / "o.csv"
    assert main(["oracle", "--scene", write(tmp_path, scene), "--grid-n", "8", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r["label"] for r in rows] == ["cell_avg", "translate_average", "count"]
    assert list(rows[0]) == ["label", "eps", "value", "bulk", "surface", "interface", "residual"]
    meta = json.loads((tmp_path / "o.meta.json").read_text())
    assert meta["summary"]["relative_gap"] < 0.1


@pytest.mark.parametrize("name", sorted(p.name for p in SCENES.glob("*.json")))
def test_shipped_scenes_parse_and_roundtrip(name):
    scene = load_scene((SCENES / name).read_text())
    again = scene_from_dict(json.loads(json.dumps(scene.to_dict())))
    assert again.to_dict() == scene.to_dict()
    assert again.domain.volume == pytest.approx(scene.domain.volume)
