import json
import re

import numpy as np
import pytest

from wulffdrop import cli, reduced, sets
from wulffdrop.tension import make_tension, tension_to_config


@pytest.fixture()
def tension_file(tmp_path, euclid):
    path = tmp_path / "tension.json"
    path.write_text(json.dumps(tension_to_config(euclid)))
    return str(path)


def run(argv):
    return cli.main(argv)


def test_solve_rejects_omega_out_of_range(tension_file, tmp_path, capsys):
    code = run(["solve", "--tension", tension_file, "--omega", "5.0",
                "--mass", "1.0", "--out", str(tmp_path / "p.csv")])
    assert code == 2
    err = capsys.readouterr().err
    assert "(-1.0, 1.0)" in err  # names the admissible interval


def test_solve_rejects_nonpositive_mass(tension_file, tmp_path):
    code = run(["solve", "--tension", tension_file, "--omega", "-0.5",
                "--mass", "0.0", "--out", str(tmp_path / "p.csv")])
    assert code == 2


def test_solve_shoot_writes_outputs(tension_file, tmp_path):
    out = tmp_path / "prof.csv"
    rep = tmp_path / "report.json"
    svg = tmp_path / "prof.svg"
    code = run(["solve", "--tension", tension_file, "--omega", "-0.5",
                "--mass", "1.0", "--method", "shoot",
                "--out", str(out), "--report", str(rep), "--plot", str(svg)])
    assert code == 0
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    assert rows[0, 0] == 0.0
    assert rows[-1, 1] == 0.0
    report = json.loads(rep.read_text())
    assert report["shoot"]["energy"]["volume"] == pytest.approx(1.0, rel=1e-6)

    # SVG plot contract: polyline endpoints (+-r_0, 0), apex (0, T_max).
    svg_text = svg.read_text()
    assert 'width="800" height="600"' in svg_text
    pts = re.search(r'points="([^"]+)"', svg_text).group(1).split()
    first = [float(v) for v in pts[0].split(",")]
    last = [float(v) for v in pts[-1].split(",")]
    r0, t_max = rows[0, 1], rows[-1, 0]
    assert first == pytest.approx([-r0, 0.0], abs=1e-12)
    assert last == pytest.approx([r0, 0.0], abs=1e-12)
    assert any(abs(float(p.split(",")[0])) < 1e-12
               and abs(float(p.split(",")[1]) - t_max) < 1e-12 for p in pts)


def test_solve_deterministic_outputs(tension_file, tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"p{tag}.csv"
        rep = tmp_path / f"r{tag}.json"
        assert run(["solve", "--tension", tension_file, "--omega", "-0.5",
                    "--mass", "1.0", "--method", "shoot",
                    "--out", str(out), "--report", str(rep)]) == 0
        report = json.loads(rep.read_text())
        report.pop("wall_time_s")  # the only volatile field
        outs.append((out.read_bytes(), json.dumps(report, sort_keys=True)))
    assert outs[0] == outs[1]


def test_solve_method_both_cross_difference(tension_file, tmp_path):
    out = tmp_path / "prof.csv"
    rep = tmp_path / "report.json"
    code = run(["solve", "--tension", tension_file, "--omega", "-0.5",
                "--mass", "1.0", "--method", "both", "--grid-size", "161",
                "--out", str(out), "--report", str(rep)])
    assert code == 0
    report = json.loads(rep.read_text())
    assert report["cross_difference_linf"] <= 0.01
    assert (tmp_path / "prof-direct.csv").exists()


def test_wulff_subcommand(tension_file, tmp_path):
    out = tmp_path / "body.json"
    svg = tmp_path / "body.svg"
    assert run(["wulff", "--tension", tension_file, "--out", str(out),
                "--svg", str(svg)]) == 0
    body = json.loads(out.read_text())
    assert body["lambda"] == pytest.approx(2.0, abs=1e-9)
    assert len(body["edges"]) == body["m_normals"]
    assert svg.exists()


def test_symmetrize_subcommand(tension_file, tmp_path, euclid):
    rng = np.random.default_rng(2)
    s = sets.random_sliced_set(rng, euclid)
    set_path = tmp_path / "set.json"
    set_path.write_text(json.dumps(sets.sliced_set_to_dict(s)))
    out = tmp_path / "sym.csv"
    rep = tmp_path / "sym.json"
    assert run(["symmetrize", "--tension", tension_file, "--omega", "-0.3",
                "--set", str(set_path), "--out", str(out),
                "--report", str(rep)]) == 0
    report = json.loads(rep.read_text())
    assert report["energy_drop"] >= -1e-9
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    assert rows.shape[0] == len(s.knots)


def test_repair_subcommand(tension_file, tmp_path, euclid, euclid_body):
    t = np.linspace(0.0, 1.0, 41)
    r = np.sqrt(np.maximum(1 - t**2, 0.0))
    r[12:20] *= 0.75
    prof_path = tmp_path / "dent.csv"
    prof = reduced.Profile(knots=t, r=r, tension=euclid, body=euclid_body,
                           omega=-0.5)
    cli.write_profile_csv(str(prof_path), prof)
    out = tmp_path / "fixed.csv"
    rep = tmp_path / "log.json"
    assert run(["repair", "--tension", tension_file, "--omega", "-0.5",
                "--profile", str(prof_path), "--out", str(out),
                "--report", str(rep)]) == 0
    log = json.loads(rep.read_text())
    assert log["repairs"]
    assert all("sigma" in entry for entry in log["repairs"]
               if "failed" not in entry)
    assert all(entry.get("energy_drop", 1.0) > 0 for entry in log["repairs"])
    assert log["concavity_defect"] <= 1e-6


def test_check_subcommand(tmp_path):
    rep = tmp_path / "summary.json"
    assert run(["check", "--suite", "wulff-identity",
                "--report", str(rep)]) == 0
    summary = json.loads(rep.read_text())
    assert summary["suites"]["wulff-identity"]["passed"]


def test_sweep_subcommand(tension_file, tmp_path):
    assert run(["sweep", "--tension", tension_file, "--omegas=-0.7,-0.4",
                "--mass", "1.0", "--out-dir", str(tmp_path / "sw")]) == 0
    summary = json.loads((tmp_path / "sw" / "sweep.json").read_text())
    assert len(summary["points"]) == 2
    # Less wetting energy gain: the drop beads up, so it gets taller.
    assert summary["points"][1]["T_max"] > summary["points"][0]["T_max"]
