import csv
import json
import subprocess
import sys

import pytest

from rungekit.cli import RunConfig, main, run
from rungekit.errors import SceneError

BIDISC = {"pitch": 0.1,
          "coords": [{"shapes": [{"disc": {"c": [0, 0], "r": 1}}], "poles": ["inf"]},
                     {"shapes": [{"disc": {"c": [0, 0], "r": 1}}], "poles": ["inf"]}]}
ABS_SLICE = {"pitch": 0.02,
             "coords": [{"shapes": [{"points": [[0, 0]]}]},
                        {"shapes": [{"disc": {"c": [0, 0], "r": 1}}]}]}


@pytest.fixture
def scene(tmp_path):
    def write(doc, name="scene.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)
    return write


def test_approx_product_exit_zero(scene, tmp_path):
    out, table = tmp_path / "res.json", tmp_path / "ver.csv"
    code = main(["approx", "product", "--scene", scene(BIDISC), "--f", "1/(3 - z1 - z2)", "--eps", "1e-3",
                 "--out", str(out), "--csv", str(table)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1 and doc["status"] == "certified"
    assert doc["summary"]["sampled_sup_error"] <= 1e-3
    assert doc["poles"] == [["inf"], ["inf"]]
    with open(table) as fh:
        rows = list(csv.DictReader(fh))
    worst = max(float(r["abs_error"]) for r in rows)
    assert worst <= 1e-3 and abs(worst - doc["summary"]["csv_max_error"]) < 1e-15


def test_check_ad_abs_exit_two(scene, tmp_path):
    out = tmp_path / "ad.json"
    code = main(["check", "ad", "--scene", scene(ABS_SLICE), "--f", "abs(z2)", "--out", str(out)])
    assert code == 2
    doc = json.loads(out.read_text())
    w = doc["membership"]["witness"]
    assert w["fixed"][0] == [0.0, 0.0] and w["residual"] >= 0.5


def test_check_ad_pass(scene):
    assert main(["check", "ad", "--scene", scene(BIDISC), "--f", "z1*z2"]) == 0


def test_malformed_scene_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"pitch": 0.1, "coords": [')
    assert main(["approx", "product", "--scene", str(bad), "--f", "z1"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["code"] == "scene_error" and str(bad) in err["message"]


def test_unknown_shape_exit_one(scene):
    doc = {"coords": [{"shapes": [{"blob": {}}]}]}
    assert main(["inspect-geometry", "--scene", scene(doc)]) == 1


def test_missing_pole_exit_two(scene):
    doc = {"pitch": 0.1, "coords": [{"shapes": [{"annulus": {"c": [0, 0], "r_in": 0.5, "r_out": 1}}],
                                     "poles": ["inf"]}]}
    assert main(["approx", "product", "--scene", scene(doc), "--f", "1/z1"]) == 2


def test_inspect_geometry(scene, capsys):
    doc = {"pitch": 0.1, "coords": [{"shapes": [{"annulus": {"c": [0, 0], "r_in": 0.5, "r_out": 1}}],
                                     "poles": ["inf"]}]}
    assert main(["inspect-geometry", "--scene", scene(doc)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["poles"] == ["missing_pole_in_component"] and summary["bounded_components"] == [1]


def test_demos(capsys):
    assert main(["demo", "abs-counterexample"]) == 0
    s = json.loads(capsys.readouterr().out)
    assert s["bound"] == 0.5 and s["min_sup_error"] >= 0.49
    assert main(["demo", "circle-obstruction"]) == 0
    s = json.loads(capsys.readouterr().out)
    assert s["max_defect_on_boundary"] >= 0.99 and s["annulus_inf_only"] == "missing_pole_in_component"


def test_config_validation():
    code, doc = run(RunConfig("approx-product", eps=-1))
    assert code == 1 and doc["error"]["code"] == SceneError.code


def test_deterministic_output(scene, tmp_path):
    path = scene(BIDISC)
    outs = []
    out = tmp_path / "r.json"
    for _ in range(2):
        main(["approx", "product", "--scene", path, "--f", "exp(z1) * z2", "--eps", "1e-4", "--seed", "3",
              "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(scene):
    proc = subprocess.run([sys.executable, "-m", "rungekit.cli", "check", "ad", "--scene", scene(BIDISC),
                           "--f", "conj(z1)"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["verdict"] == "fail"
