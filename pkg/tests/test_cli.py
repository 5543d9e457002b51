"""CLI tests: config validation, command dispatch, outputs, determinism."""

import json
import math

import numpy as np

import geonets.cli as cli
from geonets.cycles import project_to_net
from geonets.manifolds import FlatTorus
from geonets.sweepout import latitude_sweepout


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


WRAP_CFG = {
    "schema_version": 1,
    "seed": 3,
    "manifold": {"kind": "flat_torus", "basis": [[1.0, 0.0], [0.0, 1.0]]},
    "cycle": {"kind": "torus_wrap", "winding": [1, 0], "noise": 0.04},
}


def test_unknown_key_rejected(tmp_path):
    cfg = dict(WRAP_CFG)
    cfg["bogus"] = 1
    rc = cli.main(["shorten", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path / "out")])
    assert rc == 2


def test_nested_unknown_key_rejected(tmp_path):
    cfg = json.loads(json.dumps(WRAP_CFG))
    cfg["manifold"]["bogus"] = True
    rc = cli.main(["shorten", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path / "out")])
    assert rc == 2


def test_missing_config_file(tmp_path):
    rc = cli.main(["shorten", "--config", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path / "out")])
    assert rc == 2


def test_bad_schema_version(tmp_path):
    cfg = dict(WRAP_CFG)
    cfg["schema_version"] = 99
    rc = cli.main(["shorten", "--config", write_config(tmp_path, cfg),
                   "--out", str(tmp_path / "out")])
    assert rc == 2


def test_shorten_torus_wrap_outputs(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["shorten", "--config", write_config(tmp_path, WRAP_CFG),
                   "--out", str(out), "--svg"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["outcome"]["status"] == "stationary"
    net = json.loads((out / "net.json").read_text())
    assert len(net["edges"]) == 1
    assert abs(net["total_mass"] - 1.0) <= 1e-4
    csv = (out / "trace.csv").read_text()
    assert csv.splitlines()[0] == "iteration,length,norm_sq,step_dt,event"
    svg = (out / "net.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_determinism_byte_identical(tmp_path):
    cfg_path = write_config(tmp_path, WRAP_CFG)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert cli.main(["shorten", "--config", cfg_path, "--out", str(out1), "--svg"]) == 0
    assert cli.main(["shorten", "--config", cfg_path, "--out", str(out2), "--svg"]) == 0
    rep1 = json.loads((out1 / "report.json").read_text())
    rep2 = json.loads((out2 / "report.json").read_text())
    rep1["wall_time_s"] = rep2["wall_time_s"] = 0.0
    assert cli.canonical_json(rep1) == cli.canonical_json(rep2)
    for name in ("trace.csv", "net.json", "net.svg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_seed_override_changes_run(tmp_path):
    cfg_path = write_config(tmp_path, WRAP_CFG)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    cli.main(["shorten", "--config", cfg_path, "--out", str(out1), "--seed", "3"])
    cli.main(["shorten", "--config", cfg_path, "--out", str(out2), "--seed", "4"])
    t1 = (out1 / "trace.csv").read_text()
    t2 = (out2 / "trace.csv").read_text()
    assert t1 != t2  # different noise, different trace


def test_gradcheck_command(tmp_path):
    cfg = {
        "schema_version": 1,
        "seed": 1,
        "manifold": {"kind": "round_sphere", "radius": 1.0},
        "gradcheck": {"samples": 8},
    }
    out = tmp_path / "out"
    rc = cli.main(["gradcheck", "--config", write_config(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["outcome"]["passed"]
    assert report["outcome"]["max_identity_rel_err"] <= 1e-6
    assert report["outcome"]["max_fd_rel_err"] <= 1e-4


def test_verify_pi1_command(tmp_path):
    cfg = {
        "schema_version": 1,
        "seed": 3,
        "manifold": {"kind": "flat_torus", "basis": [[1.0, 0.0], [0.0, 1.0]]},
        "cycle": {"noise": 0.04},
    }
    out = tmp_path / "out"
    rc = cli.main(["verify-pi1", "--config", write_config(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    row = report["bound_table"][0]
    assert row["passed"]
    assert abs(row["bound_value"] - math.sqrt(2.0)) < 1e-12
    assert abs(row["measured"] - 1.0) <= 1e-4


def test_minmax_command(tmp_path):
    cfg = {
        "schema_version": 1,
        "seed": 0,
        "manifold": {"kind": "round_sphere", "radius": 1.0},
        "family": {"slices": 17, "rounds": 4},
    }
    out = tmp_path / "out"
    rc = cli.main(["minmax", "--config", write_config(tmp_path, cfg),
                   "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert abs(report["outcome"]["width_estimate"] - 2 * math.pi) < 0.07


def test_bound_table_consistency(tmp_path):
    cfg = {
        "schema_version": 1,
        "seed": 3,
        "manifold": {"kind": "flat_torus", "basis": [[1.0, 0.0], [0.0, 1.0]]},
        "cycle": {"noise": 0.04},
    }
    out = tmp_path / "out"
    cli.main(["verify-pi1", "--config", write_config(tmp_path, cfg),
              "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    row = report["bound_table"][0]
    # the measured value in the table equals the embedded outcome's mass
    assert row["measured"] == report["outcome"]["certificate_mass"]
    assert row["passed"] == (row["measured"] <= row["bound_value"] + row["tolerance"])


def test_render_svg_empty_net():
    m = FlatTorus()
    from geonets.cycles import GeodesicNet

    net = GeodesicNet(m, np.zeros((0, 2)), [], 0.0, 0.0)
    svg = cli.render_svg(net)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_render_svg_great_circle_net(sphere):
    from geonets.cycles import great_circle_cycle

    net = project_to_net(great_circle_cycle(sphere, 8))
    svg = cli.render_svg(net, projection="orthographic")
    assert svg.count("<polyline") == 1
    assert "circle" in svg


def test_render_svg_family_snapshot(sphere):
    fam = latitude_sweepout(sphere, 9)
    svg = cli.render_svg(fam)
    assert svg.count("<polyline") >= 4


def test_verify_t1q2_command(tmp_path):
    cfg = {
        "schema_version": 1,
        "seed": 0,
        "manifold": {"kind": "round_sphere", "radius": 1.0},
        "family": {"members": 33, "rounds": 20},
    }
    out = tmp_path / "out"
    rc = cli.main(["verify-t1q2", "--config", write_config(tmp_path, cfg),
                   "--out", str(out), "--svg"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    row = report["bound_table"][0]
    assert row["name"] == "theorem1_q2" and row["passed"]
    assert abs(row["bound_value"] - 4.0 * math.pi) < 1e-12
    # report consistency: the table's measured value equals the embedded
    # outcome's certificate mass exactly
    assert row["measured"] == report["outcome"]["certificate_mass"]
    assert abs(row["measured"] - 2.0 * math.pi) <= 0.01 * 2.0 * math.pi
    assert (out / "net.svg").exists()
