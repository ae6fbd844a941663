"""Command-line front door.

Subcommands: solve, wulff, symmetrize, repair, check, sweep.  All file
outputs are written atomically (temp file + rename) and are byte-identical
for identical inputs and seed, except for the wall-time field of run
reports.

Exit codes: 0 success, 1 failed property suites, 2 validation error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import checks, competitor, odesolve, reduced, sets
from .errors import NonConvergence, WulffDropError
from .tension import SurfaceTension, tension_from_config, tension_to_config
from .wulff import build_wulff_body


# ---------------------------------------------------------------------------
# Atomic, deterministic emission
# ---------------------------------------------------------------------------

def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-wulffdrop-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def profile_to_csv(profile: reduced.Profile) -> str:
    lines = ["t,r"]
    for t, r in zip(profile.knots, profile.r):
        lines.append(f"{t:.17g},{r:.17g}")
    return "\n".join(lines) + "\n"


def write_profile_csv(path: str, profile: reduced.Profile) -> None:
    _atomic_write(path, profile_to_csv(profile))


def read_profile_csv(path: str, tension: SurfaceTension, body,
                     omega=None) -> reduced.Profile:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return reduced.Profile(knots=rows[:, 0], r=rows[:, 1], tension=tension,
                           body=body, omega=omega)


def profile_svg(profile: reduced.Profile) -> str:
    """Fixed 800x600 viewport; the polyline holds user-unit coordinates
    (t vertical, |x'| horizontal, even reflection across the axis)."""
    t_max = profile.t_max
    r_max = max(float(np.max(profile.r)), 1e-12)
    # Up the left branch from (-r_0, 0) through the apex, down the right
    # branch to (r_0, 0); the apex point is shared when the top is closed.
    left = [(-r, t) for r, t in zip(profile.r, profile.knots)]
    right = [(r, t) for r, t in zip(profile.r[::-1], profile.knots[::-1])]
    pts = left + right[1:] if profile.r[-1] == 0 else left + right
    points = " ".join(f"{x:.17g},{y:.17g}" for x, y in pts)
    sx = 760.0 / (2.2 * r_max)
    sy = 560.0 / (1.1 * max(t_max, 1e-12))
    scale = min(sx, sy)
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" '
        'viewBox="0 0 800 600">\n'
        f'  <g transform="translate(400 580) scale({scale:.12g} {-scale:.12g})">\n'
        f'    <polyline fill="none" stroke="black" '
        f'stroke-width="{2.0 / scale:.12g}" points="{points}"/>\n'
        f'    <line x1="{-1.05 * r_max:.12g}" y1="0" x2="{1.05 * r_max:.12g}" '
        f'y2="0" stroke="gray" stroke-width="{1.0 / scale:.12g}"/>\n'
        "  </g>\n"
        "</svg>\n"
    )


def profile_report(profile: reduced.Profile, omega: float) -> dict:
    breakdown = reduced.reduced_energy(profile, omega)
    res = reduced.el_residual(profile, reduced.lambda_estimate(profile))
    return {
        "Fs": breakdown.Fs,
        "Fc": breakdown.Fc,
        "Fp": breakdown.Fp,
        "total": breakdown.total,
        "volume": reduced.reduced_volume(profile),
        "young_residual": reduced.young_residual(profile, omega),
        "max_el_residual": res.max_abs(0.9 * profile.t_max),
        "lambda_est": reduced.lambda_estimate(profile),
    }


def _load_tension(path: str) -> SurfaceTension:
    with open(path) as handle:
        return tension_from_config(json.load(handle))


def _out_path(args, name: str) -> str:
    if getattr(args, "out_dir", None):
        os.makedirs(args.out_dir, exist_ok=True)
        return os.path.join(args.out_dir, name)
    return name


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    t_start = time.time()
    tension = _load_tension(args.tension)
    lo, hi = tension.omega_range
    if not (lo < args.omega < hi):
        print(f"error: omega={args.omega} outside the admissible interval "
              f"({lo}, {hi}) = (-f(e_N), f(-e_N))", file=sys.stderr)
        return 2
    if args.mass <= 0:
        print("error: mass must be positive", file=sys.stderr)
        return 2
    body = build_wulff_body(tension, args.m_normals)

    report = {
        "inputs": {
            "tension": tension_to_config(tension),
            "omega": args.omega,
            "mass": args.mass,
            "method": args.method,
            "grid_size": args.grid_size,
            "seed": args.seed,
        },
    }
    profiles = {}
    try:
        if args.method in ("shoot", "both"):
            if not (lo < args.omega < 0):
                print(f"error: shooting needs omega in the graph regime "
                      f"({lo}, 0); use --method direct", file=sys.stderr)
                return 2
            sol = odesolve.shoot(tension, args.omega, args.mass, body=body)
            profiles["shoot"] = sol.profile
            report["shoot"] = {
                "v0": sol.v0,
                "s_star": sol.s_star,
                "R_max": sol.r_max,
                "T_max": sol.t_max,
                "lambda": sol.lam,
                "volume_bridge_constant": sol.diagnostics["bridge_constant"],
                "energy": profile_report(sol.profile, args.omega),
                "young_residual": sol.diagnostics["young_residual"],
            }
        if args.method in ("direct", "both"):
            opts = reduced.MinimizeOptions(max_iter=args.max_iter)
            prof = reduced.minimize_direct(tension, args.omega, args.mass,
                                           grid_size=args.grid_size, opts=opts)
            profiles["direct"] = prof
            report["direct"] = {
                "iterations": prof.meta["iterations"],
                "converged": prof.meta["converged"],
                "T_max": prof.t_max,
                "energy": profile_report(prof, args.omega),
            }
    except NonConvergence as exc:
        print(f"error: solver failed to converge: {exc}", file=sys.stderr)
        return 3
    except WulffDropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.method == "both":
        ds, dd = profiles["shoot"], profiles["direct"]
        r_shoot = np.interp(dd.knots, ds.knots, ds.r)
        linf = float(np.max(np.abs(dd.r - r_shoot)) / np.max(ds.r))
        report["cross_difference_linf"] = linf

    primary = profiles.get("shoot", profiles.get("direct"))
    out_csv = args.out or _out_path(args, "profile.csv")
    write_profile_csv(out_csv, primary)
    if args.method == "both":
        stem, ext = os.path.splitext(out_csv)
        write_profile_csv(stem + "-direct" + ext, profiles["direct"])
    if args.plot:
        _atomic_write(args.plot, profile_svg(primary))
    report["wall_time_s"] = time.time() - t_start
    write_json(args.report or _out_path(args, "report.json"), report)
    return 0


def cmd_wulff(args) -> int:
    tension = _load_tension(args.tension)
    body = build_wulff_body(tension, args.m_normals)
    out = {
        "d": body.d,
        "vertices": np.asarray(body.geometry).tolist(),
        "edges": [
            {"length": float(l), "normal": n.tolist() if body.d == 2 else [float(n)],
             "h": float(h), "support": float(s)}
            for l, n, h, s in zip(body.edge_lengths, body.edge_normals,
                                  body.edge_h, body.edge_supports)
        ],
        "area": body.area,
        "aniso_perimeter": body.aniso_perimeter,
        "lambda": body.lam,
        "m_normals": body.m_normals,
    }
    write_json(args.out or _out_path(args, "body.json"), out)
    if args.svg and body.d == 2:
        verts = np.asarray(body.geometry)
        closed = np.vstack([verts, verts[:1]])
        r_max = float(np.max(np.abs(verts))) or 1.0
        scale = 280.0 / r_max
        points = " ".join(f"{x:.12g},{y:.12g}" for x, y in closed)
        svg = (
            '<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" '
            'viewBox="0 0 800 600">\n'
            f'  <g transform="translate(400 300) scale({scale:.12g} {-scale:.12g})">\n'
            f'    <polyline fill="none" stroke="black" '
            f'stroke-width="{2.0 / scale:.12g}" points="{points}"/>\n'
            "  </g>\n</svg>\n"
        )
        _atomic_write(args.svg, svg)
    return 0


def cmd_symmetrize(args) -> int:
    tension = _load_tension(args.tension)
    lo, hi = tension.omega_range
    if not (lo < args.omega < hi):
        print(f"error: omega={args.omega} outside ({lo}, {hi})", file=sys.stderr)
        return 2
    with open(args.set) as handle:
        sliced = sets.sliced_set_from_dict(json.load(handle), tension)
    body = build_wulff_body(tension, args.m_normals)
    before = sets.energy(sliced, tension, args.omega)
    prof = sets.symmetrize(sliced, body, omega=args.omega)
    after = reduced.reduced_energy(prof)
    write_profile_csv(args.out or _out_path(args, "symmetrized.csv"), prof)
    write_json(args.report or _out_path(args, "symmetrize.json"), {
        "original": {"Fs": before.Fs, "Fc": before.Fc, "Fp": before.Fp,
                     "total": before.total},
        "symmetrized": {"Fs": after.Fs, "Fc": after.Fc, "Fp": after.Fp,
                        "total": after.total},
        "energy_drop": before.total - after.total,
        "volume": sets.volume(sliced),
    })
    return 0


def cmd_repair(args) -> int:
    tension = _load_tension(args.tension)
    body = build_wulff_body(tension, args.m_normals)
    profile = read_profile_csv(args.profile, tension, body, omega=args.omega)
    log = []
    current = profile
    for _ in range(args.max_repairs):
        try:
            repaired = competitor.repair_profile(current, tension, args.omega,
                                                 epsilon=args.epsilon)
        except competitor.CompetitorFailure as exc:
            log.append({"failed": type(exc).__name__})
            break
        if repaired is None:
            break
        if repaired.meta["energy_drop"] <= 0:
            break  # remaining violations are at rounding level
        params = repaired.meta["params"]
        log.append({
            "t1": params.t1, "t2": params.t2,
            "sigma": params.sigma, "tau": params.tau, "side": params.side,
            "energy_drop": repaired.meta["energy_drop"],
        })
        current = repaired
    write_profile_csv(args.out or _out_path(args, "repaired.csv"), current)
    write_json(args.report or _out_path(args, "repair.json"), {
        "repairs": log,
        "final_energy": reduced.reduced_energy(current, args.omega).total,
        "concavity_defect": current.concavity_defect(),
    })
    return 0


def cmd_check(args) -> int:
    names = [args.suite] if args.suite else None
    results = checks.run_suites(names=names, seed=args.seed, trials=args.trials)
    summary = {"seed": args.seed, "suites": {}}
    all_passed = True
    for res in results:
        summary["suites"][res["name"]] = {
            "passed": bool(res["passed"]),
            "details": _jsonable(res["details"]),
        }
        all_passed = all_passed and bool(res["passed"])
        print(f"{'PASS' if res['passed'] else 'FAIL'}  {res['name']}")
    if args.report:
        write_json(args.report, summary)
    if not all_passed:
        failed = [n for n, s in summary["suites"].items() if not s["passed"]]
        print(f"failed suites: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args) -> int:
    tension = _load_tension(args.tension)
    body = build_wulff_body(tension, args.m_normals)
    omegas = [float(x) for x in args.omegas.split(",")]
    rows = []
    for k, omega in enumerate(omegas):
        sol = odesolve.shoot(tension, omega, args.mass, body=body)
        name = _out_path(args, f"sweep-{k:03d}.csv")
        write_profile_csv(name, sol.profile)
        rows.append({
            "omega": omega, "v0": sol.v0, "T_max": sol.t_max,
            "R_max": sol.r_max, "lambda": sol.lam,
            "energy": reduced.reduced_energy(sol.profile).total,
            "profile": os.path.basename(name),
        })
    write_json(_out_path(args, "sweep.json"),
               {"mass": args.mass, "points": rows})
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wulffdrop",
        description="Equilibrium shapes of anisotropic sessile drops under gravity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, omega=True):
        p.add_argument("--tension", required=True, help="tension JSON document")
        if omega:
            p.add_argument("--omega", type=float, required=True,
                           help="contact energy coefficient")
        p.add_argument("--m-normals", type=int, default=1024)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default=None)

    p = sub.add_parser("solve", help="solve for the minimizing profile")
    common(p)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--method", choices=("shoot", "direct", "both"),
                   default="shoot")
    p.add_argument("--grid-size", type=int, default=161)
    p.add_argument("--max-iter", type=int, default=24000,
                   help="direct-minimizer iteration budget")
    p.add_argument("--out", default=None, help="profile CSV path")
    p.add_argument("--plot", default=None, help="SVG output path")
    p.add_argument("--report", default=None, help="report JSON path")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("wulff", help="emit the slice Wulff body")
    common(p, omega=False)
    p.add_argument("--out", default=None)
    p.add_argument("--svg", default=None)
    p.set_defaults(fn=cmd_wulff)

    p = sub.add_parser("symmetrize", help="rearrange a sliced set")
    common(p)
    p.add_argument("--set", required=True, help="SlicedSet JSON document")
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_symmetrize)

    p = sub.add_parser("repair", help="competitor repair of a profile CSV")
    common(p)
    p.add_argument("--profile", required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--max-repairs", type=int, default=32)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_repair)

    p = sub.add_parser("check", help="run the property suites")
    p.add_argument("--suite", choices=sorted(checks.SUITES), default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("sweep", help="shoot across a list of omegas")
    common(p, omega=False)
    p.add_argument("--omegas", required=True, help="comma-separated values")
    p.add_argument("--mass", type=float, required=True)
    p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except WulffDropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
