import csv
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from qls.cli import main
from qls.config import ExperimentConfig, load_config, parse_config
from qls.errors import ConfigError
from qls.lsm_engine import field_from_csv


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


def run(tmp_path, command, doc=None, *extra, out="out"):
    args = [command, "--out", str(tmp_path / out)]
    if doc is not None:
        args += ["--config", write_cfg(tmp_path, doc, f"{out}.json")]
    return main(args + list(extra)), tmp_path / out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- config ----------------------------------------------------------------------------


def test_defaults():
    cfg = parse_config("{}")
    assert cfg == ExperimentConfig()
    assert cfg.oscillator.transition.start == (4, 5)


def test_rationals_parse_exactly():
    cfg = parse_config('{"oscillator": {"omega_x": "3/2", "omega_y": 2, "energies": ["1/2", 3]}}')
    assert cfg.oscillator.omega_x == Fraction(3, 2)
    assert cfg.oscillator.energies == (Fraction(1, 2), Fraction(3))


@pytest.mark.parametrize(
    "text, where",
    [
        ('{\n  "spectrum": [1, 2, 3]\n}', "cfg.json:2: field 'spectrum'"),
        ('{\n  "sample_count": 2\n}', "cfg.json:2: field 'sample_count'"),
        ('{\n  "grid": {\n    "h": -1\n  }\n}', "cfg.json:3: field 'grid.h'"),
        ('{\n  "lsm": {"initial": {"kind": "square"}}\n}', "field 'lsm.initial.kind'"),
        ('{\n  "oscillator": {\n    "omega_x": "a/b"\n  }\n}', "cfg.json:3: field 'oscillator.omega_x'"),
        ('{\n  "output": {"format": "xml"}\n}', "field 'output.format'"),
        ('{\n  "bogus": 1\n}', "cfg.json:2: field 'bogus': unknown field"),
        ('{"spectrum": [3, 2,', "cfg.json:1:"),
    ],
)
def test_config_errors_locate_the_field(text, where):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.json")
    assert where in str(info.value)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv("QLS_OUT", raising=False)
    assert str(ExperimentConfig().output_dir()) == "qls_out"
    monkeypatch.setenv("QLS_OUT", str(tmp_path / "env"))
    assert ExperimentConfig().output_dir() == tmp_path / "env"
    cfg = parse_config(json.dumps({"output": {"directory": str(tmp_path / "file")}}))
    assert cfg.output_dir() == tmp_path / "file"
    # flag beats file
    code = main(["oscillator", "--config", write_cfg(tmp_path, {"output": {"directory": str(tmp_path / "file")}}),
                 "--out", str(tmp_path / "flag")])
    assert code == 0 and (tmp_path / "flag" / "lattice.csv").exists()
    assert not (tmp_path / "file").exists()
    # env var when neither flag nor file names a directory
    assert main(["oscillator"]) == 0
    assert (tmp_path / "env" / "oscillator_summary.json").exists()


def test_flags_override_file(tmp_path):
    code, out = run(tmp_path, "contours", {"sample_count": 10}, "--samples", "12", "--format", "json")
    assert code == 0
    doc = json.loads((out / "contour_00.json").read_text())
    assert len(doc["rows"]) == 12


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "contours", {"spectrum": [1, 2, 3]})[0] == 2
    assert "config error" in capsys.readouterr().err
    doc = {"grid": {"nx": 20, "ny": 20, "h": 0.05, "origin": [-0.5, -0.5]}}
    code, _ = run(tmp_path, "lsm-demo", doc, out="small")
    assert code == 1
    assert "2h margin" in capsys.readouterr().err


# -- contours ----------------------------------------------------------------------------


def test_contours_default(tmp_path, spec321):
    code, out = run(tmp_path, "contours")
    assert code == 0
    summary = json.loads((out / "contours_summary.json").read_text())
    assert summary["schema_version"] == 1
    for k, target in enumerate([1.5, 2.0, 2.5]):
        rows = read_csv(out / f"contour_{k:02d}.csv")
        assert rows[0] == ["theta", "a1", "a2", "a3"]
        a = np.array(rows[1:], dtype=float)
        d1, d2 = summary["contours"][k]["e_prime"]
        assert np.abs(d1 * a[:, 1] ** 2 + d2 * a[:, 2] ** 2 - 1).max() < 1e-10
        energy = 3 * a[:, 1] ** 2 + 2 * a[:, 2] ** 2 + a[:, 3] ** 2
        assert np.abs(energy - target).max() < 1e-10


def test_contours_soft_errors(tmp_path, capsys):
    code, out = run(tmp_path, "contours", {"contour_targets": [1.0, 2.0]})
    assert code == 0
    summary = json.loads((out / "contours_summary.json").read_text())
    assert "error" in summary["contours"][0]
    assert (out / "contour_01.csv").exists() and not (out / "contour_00.csv").exists()
    assert "warning" in capsys.readouterr().err


def test_contours_empty_targets(tmp_path):
    code, out = run(tmp_path, "contours", {"contour_targets": [], "lsm": {"initial": {"target": 2.0}}})
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["contours_summary.json"]


# -- protocol ------------------------------------------------------------------------------


def test_protocol_eight_points(tmp_path):
    doc = {"contour_targets": [2.0, 2.5], "sample_count": 8}
    code, out = run(tmp_path, "protocol", doc)
    assert code == 0
    files = sorted(out.glob("trajectory_*.json"))
    assert len(files) == 8
    for f in files:
        t = json.loads(f.read_text())
        assert len(t["waypoints"]) == 4 and t["final_energy_error"] < 1e-9
    summary = json.loads((out / "protocol_summary.json").read_text())
    assert summary["max_final_energy_error"] < 1e-9
    rows = read_csv(out / "trajectories.csv")
    assert rows[0] == ["trajectory", "waypoint", "a1", "a2", "a3"] and len(rows) == 1 + 32


def test_protocol_anchor_only(tmp_path):
    doc = {"contour_targets": [2.0, 2.5], "protocol": {"source_angles": [0.0]}}
    code, out = run(tmp_path, "protocol", doc)
    assert code == 0
    t = json.loads((out / "trajectory_000.json").read_text())
    assert t["effective_hops"] == ["transfer"]


def test_protocol_direct_flags_chart_exit(tmp_path):
    doc = {"contour_targets": [2.0, 2.5], "sample_count": 4}
    code, out = run(tmp_path, "protocol", doc, "--mode", "direct")
    assert code == 0
    summary = json.loads((out / "protocol_summary.json").read_text())
    exits = {e["index"]: e["theta"] for e in summary["chart_exits"]}
    assert exits[1] == pytest.approx(math.pi / 2)
    assert summary["n_trajectories"] == 2


def test_protocol_needs_two_targets(tmp_path):
    assert run(tmp_path, "protocol", {"contour_targets": [2.0]})[0] == 2


# -- oscillator ------------------------------------------------------------------------------


def test_oscillator_fig2(tmp_path):
    code, out = run(tmp_path, "oscillator")
    assert code == 0
    rows = read_csv(out / "lattice.csv")
    assert rows[0] == ["n_x", "n_y", "E_num", "E_den", "set_id"]
    assert len(rows) - 1 == sum(n + 1 for n in range(1, 10)) == 54
    plan = json.loads((out / "plan.json").read_text())
    first = plan["plans"][0]
    assert [(s["axis"], s["delta_quanta"], s["frequency"]) for s in first["steps"]] == [("y", -4, "4"), ("x", -4, "4")]
    assert first["path"][-1] == [0, 1]


def test_oscillator_coprime(tmp_path):
    doc = {"oscillator": {"omega_x": 2, "omega_y": 3, "energies": [6], "transition": None}}
    code, out = run(tmp_path, "oscillator", doc)
    assert code == 0
    assert read_csv(out / "lattice.csv")[1:] == [["0", "2", "6", "1", "0"], ["3", "0", "6", "1", "0"]]
    assert not (out / "plan.json").exists()


def test_oscillator_unreachable(tmp_path):
    doc = {"oscillator": {"omega_x": 2, "omega_y": 2, "transition": {"from": [1, 1], "target_E": 1}}}
    code, out = run(tmp_path, "oscillator", doc)
    assert code == 0
    plan = json.loads((out / "plan.json").read_text())
    assert "error" in plan and plan["constraint_trace"]


# -- lsm demo -----------------------------------------------------------------------------------


def test_lsm_demo_circle(tmp_path):
    doc = {"lsm": {"initial": {"kind": "circle", "radius": 0.5}, "speed": 1.0, "t_final": 0.3,
                   "checkpoints": [0.0, 0.3]}}
    code, out = run(tmp_path, "lsm-demo", doc)
    assert code == 0
    s = json.loads((out / "lsm_summary.json").read_text())
    last = s["checkpoints"][-1]
    assert last["expected_radius"] == pytest.approx(0.8)
    assert last["radius_error"] <= 2 * s["grid"]["h"]
    f = field_from_csv((out / "field_01.csv").read_text())
    assert (f.nx, f.ny) == (200, 200)
    rows = read_csv(out / "interface_01.csv")
    assert rows[0] == ["polyline", "vertex", "x", "y", "closed"]
    labels = field_from_csv((out / "partition_01.csv").read_text()).values
    assert set(np.unique(labels)) == {0.0, 1.0, 2.0}


def test_lsm_demo_zero_speed(tmp_path):
    doc = {"grid": {"nx": 81, "ny": 81, "h": 0.05, "origin": [-2, -2]},
           "lsm": {"speed": 0.0, "t_final": 0.3, "checkpoints": [0.0, 0.1, 0.3]}}
    code, out = run(tmp_path, "lsm-demo", doc)
    assert code == 0
    base = (out / "field_00.csv").read_text()
    assert (out / "field_01.csv").read_text() == base == (out / "field_02.csv").read_text()


def test_lsm_demo_ellipse_roundtrip(tmp_path):
    doc = {"contour_targets": [2.0], "grid": {"nx": 101, "ny": 101, "h": 0.04, "origin": [-2, -2]}}
    code, out = run(tmp_path, "lsm-demo", doc)
    assert code == 0
    s = json.loads((out / "lsm_summary.json").read_text())
    assert s["roundtrip_hausdorff"] <= s["roundtrip_bound_2h"]


# -- determinism and atomic output -----------------------------------------------------------


@pytest.mark.parametrize(
    "command, doc",
    [
        ("contours", {"sample_count": 90}),
        ("protocol", {"sample_count": 16}),
        ("protocol", {"sample_count": 16, "protocol": {"mode": "direct"}}),
        ("oscillator", {}),
        ("lsm-demo", {"grid": {"nx": 61, "ny": 61, "h": 0.0667, "origin": [-2, -2]}}),
    ],
)
def test_byte_identical_reruns(tmp_path, command, doc):
    assert run(tmp_path, command, doc, out="a")[0] == 0
    assert run(tmp_path, command, doc, out="b")[0] == 0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert a == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_no_temp_files_left(tmp_path):
    code, out = run(tmp_path, "oscillator")
    assert code == 0
    assert not [p for p in out.iterdir() if p.name.startswith(".") or p.suffix == ".tmp"]
