"""Seeded property suites behind the ``check`` subcommand.

Each suite returns a dict with at least ``name``, ``passed`` and
``details``; the CLI aggregates them into a machine-readable summary.  The
acceptance tests call the same functions, so the release gate and the test
suite share one implementation.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import competitor as comp
from . import odesolve as od
from . import reduced
from . import sets
from .tension import SurfaceTension, make_tension
from .wulff import build_wulff_body

DEFAULT_SEED = 0


def builtin_tensions() -> list[SurfaceTension]:
    """The admissible built-in families exercised by the property suites."""
    return [
        make_tension("euclid"),
        make_tension("pnorm", p=3.0),
        make_tension("weighted", c=2.0),
    ]


def omega_samples(tension: SurfaceTension) -> list[float]:
    """Contact coefficients {-0.8, -0.3, 0, 0.5} scaled into the range."""
    return [f * tension.f_eN for f in (-0.8, -0.3, 0.0, 0.5)]


# ---------------------------------------------------------------------------
# Symmetrization, lower bound, Jensen
# ---------------------------------------------------------------------------

def suite_symmetrization(seed: int = DEFAULT_SEED, trials: int = 1000) -> dict:
    """F(A*) <= F(A) + 1e-9 (1 + |F(A)|) over seeded random sliced sets."""
    t0 = time.time()
    tensions = builtin_tensions()
    bodies = {t.tension_id: build_wulff_body(t, 1024) for t in tensions}
    rng = np.random.default_rng(seed)
    failures = []
    min_total = math.inf
    checked = 0
    for k in range(trials):
        geometry = sets.random_sliced_set(rng, tensions[0])
        for tension in tensions:
            s = sets.sliced_set(geometry.base_vertices, geometry.knots,
                                geometry.scales, geometry.centers, tension)
            body = bodies[tension.tension_id]
            for omega in omega_samples(tension):
                e_orig = sets.energy(s, tension, omega).total
                prof = sets.symmetrize(s, body, omega=omega)
                e_symm = reduced.reduced_energy(prof).total
                min_total = min(min_total, e_symm, e_orig)
                checked += 1
                if e_symm > e_orig + 1e-9 * (1.0 + abs(e_orig)):
                    failures.append((k, tension.tension_id, omega,
                                     e_orig, e_symm))
    return {
        "name": "symmetrization",
        "passed": not failures and min_total >= -1e-9,
        "details": {
            "trials": trials,
            "checked": checked,
            "failures": failures[:10],
            "min_energy_seen": min_total,
            "seconds": time.time() - t0,
        },
    }


def suite_jensen(seed: int = DEFAULT_SEED, cases: int = 200) -> dict:
    """Per-slab gap vanishes iff the slab is a drifting-free Wulff dilate."""
    rng = np.random.default_rng(seed)
    tension = make_tension("euclid")
    body = build_wulff_body(tension, 1024)
    square = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    bad = []
    for k in range(cases):
        scale0 = rng.uniform(0.3, 1.5)
        scale1 = rng.uniform(0.1, 1.5)
        dt = rng.uniform(0.2, 1.0)
        kind = k % 4
        if kind == 0:
            # Homothetic Wulff slab, constant center: gap must vanish.
            c = rng.uniform(0.5, 2.0)
            s = sets.sliced_set(c * body.geometry, [0.0, dt], [scale0, scale1],
                                np.zeros((2, 2)), tension)
            expect_zero = True
        elif kind == 1:
            # Wulff base but drifting center.
            s = sets.sliced_set(body.geometry, [0.0, dt], [scale0, scale1],
                                [[0.0, 0.0], list(rng.uniform(0.1, 0.5, 2))],
                                tension)
            expect_zero = False
        elif kind == 2:
            # Non-Wulff base (square under the Euclidean slice norm).
            s = sets.sliced_set(square, [0.0, dt], [scale0, scale1],
                                np.zeros((2, 2)), tension)
            expect_zero = False
        else:
            # Random convex base.
            poly = sets.random_convex_polygon(rng, int(rng.integers(3, 9)))
            s = sets.sliced_set(poly, [0.0, dt], [scale0, scale1],
                                np.zeros((2, 2)), tension)
            expect_zero = False
        gap = sets.jensen_gap(s, 0, tension, body)
        if gap < -1e-10:
            bad.append((k, "negative", gap))
        elif expect_zero and abs(gap) > 1e-10 * (1 + scale0):
            bad.append((k, "should vanish", gap))
        elif not expect_zero and gap <= 1e-10:
            bad.append((k, "should be positive", gap))
    return {
        "name": "jensen",
        "passed": not bad,
        "details": {"cases": cases, "failures": bad[:10]},
    }


def suite_wulff_identity() -> dict:
    """P_h(K_h) = (N-1)|K_h| at the documented refinement levels."""
    t0 = time.time()
    rows = []
    ok = True
    for h_family, h_kw in (("lp", {"h_p": 2.0}), ("l1reg", {"h_eps": 0.05}),
                           ("lp", {"h_p": 3.0})):
        tension = make_tension("euclid", h_family=h_family, **h_kw)
        for m_normals, tol in ((1024, 2e-3), (4096, 5e-4)):
            body = build_wulff_body(tension, m_normals)
            rel = abs(body.aniso_perimeter - 2.0 * body.area) / (2.0 * body.area)
            rows.append((tension.tension_id, m_normals, body.lam, rel))
            ok = ok and rel <= tol
    return {
        "name": "wulff-identity",
        "passed": ok,
        "details": {"rows": rows, "seconds": time.time() - t0},
    }


# ---------------------------------------------------------------------------
# ODE and solver suites
# ---------------------------------------------------------------------------

def suite_el_consistency() -> dict:
    """Interior EL residual of shooting profiles decays at order >= 1.8."""
    t0 = time.time()
    rows = []
    ok = True
    for tension in (make_tension("euclid"), make_tension("pnorm", p=3.0)):
        body = build_wulff_body(tension, 1024)
        sol = od.shoot(tension, -0.5, 1.0, body=body)
        residuals = []
        for n in (101, 201, 401):
            prof, lam_mult, _, t_max = od.reconstruct_profile(
                sol.trajectory, tension, body, omega=-0.5, n_knots=n
            )
            residuals.append(reduced.el_residual(prof, lam_mult).max_abs(0.9 * t_max))
        rates = [math.log2(residuals[i] / residuals[i + 1]) for i in range(2)]
        rows.append((tension.tension_id, residuals, rates))
        ok = ok and all(rate >= 1.8 for rate in rates)
    return {
        "name": "el-consistency",
        "passed": ok,
        "details": {"rows": rows, "seconds": time.time() - t0},
    }


def suite_young(direct_profile=None) -> dict:
    """Young's law: 1e-8 for shooting, 2x the grid slope error for direct."""
    t0 = time.time()
    tension = make_tension("euclid")
    body = build_wulff_body(tension, 1024)
    sol = od.shoot(tension, -0.5, 1.0, body=body)
    shoot_res = abs(sol.diagnostics["young_residual"])

    if direct_profile is None:
        direct_profile = reduced.minimize_direct(
            tension, -0.5, 1.0,
            opts=reduced.MinimizeOptions(raise_on_failure=False),
        )
    p = direct_profile
    grid_res = abs(reduced.young_residual(p))
    # One-sided slope error estimate |r''(0)| dt / 2 propagated through d2phi.
    s0 = (p.r[1] - p.r[0]) / (p.knots[1] - p.knots[0])
    s1 = (p.r[2] - p.r[1]) / (p.knots[2] - p.knots[1])
    curv = abs(s1 - s0) / (0.5 * (p.knots[2] - p.knots[0]))
    dslope = 0.5 * curv * (p.knots[1] - p.knots[0])
    nm1 = tension.dim - 1
    d2_lo = reduced.young_residual(p, contact_slope=s0 - dslope)
    d2_hi = reduced.young_residual(p, contact_slope=s0 + dslope)
    slope_err = max(abs(d2_lo - grid_res), abs(d2_hi - grid_res), 1e-12)
    ok = shoot_res < 1e-8 and grid_res <= 2.0 * slope_err
    return {
        "name": "young",
        "passed": bool(ok),
        "details": {
            "shoot_residual": shoot_res,
            "direct_grid_residual": grid_res,
            "direct_slope_error_bound": slope_err,
            "seconds": time.time() - t0,
        },
    }


def suite_cross_solver() -> dict:
    """shoot vs minimize_direct: 1% L-inf on profiles, 0.3% on energy."""
    t0 = time.time()
    rows = []
    ok = True
    cases = [
        (make_tension("euclid"), -0.5),
        (make_tension("pnorm", p=3.0), None),  # -0.5 * phi(0,1)
    ]
    for tension, omega in cases:
        if omega is None:
            omega = -0.5 * tension.f_eN
        tc0 = time.time()
        body = build_wulff_body(tension, 1024)
        sol = od.shoot(tension, omega, 1.0, body=body)
        prof = reduced.minimize_direct(
            tension, omega, 1.0,
            opts=reduced.MinimizeOptions(raise_on_failure=False),
        )
        r_shoot = np.interp(prof.knots, sol.profile.knots, sol.profile.r)
        linf = float(np.max(np.abs(prof.r - r_shoot)) / np.max(sol.profile.r))
        e_s = reduced.reduced_energy(sol.profile).total
        e_d = reduced.reduced_energy(prof).total
        e_rel = abs(e_d - e_s) / abs(e_s)
        elapsed = time.time() - tc0
        rows.append((tension.tension_id, linf, e_rel, elapsed))
        ok = ok and linf <= 0.01 and e_rel <= 0.003 and elapsed <= 30.0
    return {
        "name": "cross-solver",
        "passed": ok,
        "details": {"rows": rows, "seconds": time.time() - t0},
    }


def suite_monotonicity() -> dict:
    """dV/dv0 < 0 at 16 log-spaced v0 for every built-in tension."""
    t0 = time.time()
    rows = []
    ok = True
    for tension in builtin_tensions():
        omega = -0.5 * tension.f_eN
        s_st = od.s_star(tension, omega)
        vals = []
        for v0 in np.geomspace(0.1, 10.0, 16):
            vals.append(od.dV_dv0(tension, float(v0), s_st, h_fd=1e-4 * float(v0)))
        rows.append((tension.tension_id, vals))
        ok = ok and all(v < 0 for v in vals)
    return {
        "name": "monotonicity",
        "passed": ok,
        "details": {
            "rows": [(tid, ["%.3e" % v for v in vals]) for tid, vals in rows],
            "negative": sum(v < 0 for _, vals in rows for v in vals),
            "total": sum(len(vals) for _, vals in rows),
            "seconds": time.time() - t0,
        },
    }


def suite_convexity(seed: int = DEFAULT_SEED, cases: int = 100) -> dict:
    """Injected dents are repaired with a strict energy decrease."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    tension = make_tension("euclid")
    body = build_wulff_body(tension, 1024)
    failures = []
    for k in range(cases):
        n = 41
        tt = np.linspace(0.0, 1.0, n)
        base = np.sqrt(np.maximum(1.0 - tt**2, 0.0))
        i0 = int(rng.integers(4, 28))
        width = int(rng.integers(3, 10))
        depth = float(rng.uniform(0.5, 0.92))
        rr = base.copy()
        rr[i0:i0 + width] *= depth
        prof = reduced.Profile(knots=tt, r=rr, tension=tension, body=body,
                               omega=-0.5)
        try:
            repaired = comp.repair_profile(prof, tension, -0.5, epsilon=2.0)
        except comp.CompetitorFailure as exc:
            failures.append((k, type(exc).__name__))
            continue
        if repaired is None:
            failures.append((k, "no witness"))
            continue
        if not (repaired.meta["energy_drop"] > 1e-10):
            failures.append((k, "no strict decrease", repaired.meta["energy_drop"]))
        if repaired.meta["volume_error"] > 1e-8 * (1 + 1.0):
            failures.append((k, "volume drift", repaired.meta["volume_error"]))
    return {
        "name": "convexity-repair",
        "passed": not failures,
        "details": {"cases": cases, "failures": failures[:10],
                    "seconds": time.time() - t0},
    }


def suite_barycenter(seed: int = DEFAULT_SEED, perturbations: int = 20,
                     direct_profile=None) -> dict:
    """Non-constant center perturbations of a minimizer raise the energy."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    tension = make_tension("euclid")
    body = build_wulff_body(tension, 1024)
    omega = -0.5
    if direct_profile is None:
        direct_profile = reduced.minimize_direct(
            tension, omega, 1.0,
            opts=reduced.MinimizeOptions(raise_on_failure=False),
        )
    p = direct_profile
    # Lift to a SlicedSet on the Wulff base with centered slices.
    knots, r = p.knots, p.r
    base = sets.sliced_set(body.geometry, knots, r,
                           np.zeros((len(knots), 2)), tension)
    e0 = sets.energy(base, tension, omega).total
    pos = r > 0
    trimmed = sets.sliced_set(body.geometry, knots[pos], r[pos],
                              np.zeros((int(pos.sum()), 2)), tension)
    _, drift0 = sets.barycenter_path(trimmed, body)
    failures = []
    for k in range(perturbations):
        steps = rng.normal(0.0, 0.05, (len(knots) - 1, 2))
        centers = np.concatenate([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
        pert = sets.sliced_set(body.geometry, knots, r, centers, tension)
        e1 = sets.energy(pert, tension, omega).total
        if not (e1 > e0 + 1e-12):
            failures.append((k, e1 - e0))
    return {
        "name": "barycenter",
        "passed": not failures and drift0 < 1e-12,
        "details": {"perturbations": perturbations, "unperturbed_drift": drift0,
                    "failures": failures[:10], "seconds": time.time() - t0},
    }


def suite_gradient(seed: int = DEFAULT_SEED, cases: int = 50) -> dict:
    """Analytic reduced-energy gradient vs central differences, < 1e-5."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for tension in (make_tension("euclid"), make_tension("pnorm", p=3.0)):
        body = build_wulff_body(tension, 1024)
        for _ in range(cases // 2):
            knots = np.concatenate([[0.0], np.cumsum(rng.uniform(0.02, 0.08, 31))])
            r = rng.uniform(0.2, 1.5, 32)
            p = reduced.Profile(knots=knots, r=r, tension=tension, body=body,
                                omega=-0.5)
            g = reduced.reduced_energy_gradient(p)
            h = 1e-6
            for i in rng.integers(0, 32, 4):
                rp, rm = r.copy(), r.copy()
                rp[i] += h
                rm[i] -= h
                ep = reduced.reduced_energy(
                    reduced.Profile(knots=knots, r=rp, tension=tension,
                                    body=body, omega=-0.5)).total
                em = reduced.reduced_energy(
                    reduced.Profile(knots=knots, r=rm, tension=tension,
                                    body=body, omega=-0.5)).total
                fd = (ep - em) / (2 * h)
                worst = max(worst, abs(g[i] - fd) / (1.0 + abs(fd)))
    return {
        "name": "gradient",
        "passed": worst < 1e-5,
        "details": {"cases": cases, "worst_rel_error": worst,
                    "seconds": time.time() - t0},
    }


def suite_volume_bridge() -> dict:
    """|E| / V_{v0}(s*) is constant across v0 (fitted, within 0.1%)."""
    t0 = time.time()
    rows = []
    ok = True
    for tension in builtin_tensions():
        omega = -0.5 * tension.f_eN
        body = build_wulff_body(tension, 1024)
        s_st = od.s_star(tension, omega)
        ratios = []
        for v0 in np.geomspace(0.3, 3.0, 6):
            traj = od.integrate_v(tension, float(v0), s_stop=s_st)
            prof, _, _, _ = od.reconstruct_profile(traj, tension, body,
                                                   omega=omega)
            ratios.append(reduced.reduced_volume(prof) / od.V_of(traj, s_st))
        spread = (max(ratios) - min(ratios)) / np.mean(ratios)
        predicted = body.area * body.lam ** (tension.dim - 1) / od.unit_ball_volume(
            tension.dim - 1)
        rows.append((tension.tension_id, float(np.mean(ratios)), predicted,
                     float(spread)))
        ok = ok and spread < 1e-3
    return {
        "name": "volume-bridge",
        "passed": ok,
        "details": {"rows": rows, "seconds": time.time() - t0},
    }


SUITES = {
    "symmetrization": suite_symmetrization,
    "jensen": suite_jensen,
    "wulff-identity": suite_wulff_identity,
    "el-consistency": suite_el_consistency,
    "young": suite_young,
    "cross-solver": suite_cross_solver,
    "monotonicity": suite_monotonicity,
    "convexity-repair": suite_convexity,
    "barycenter": suite_barycenter,
    "gradient": suite_gradient,
    "volume-bridge": suite_volume_bridge,
}


def run_suites(names=None, seed: int = DEFAULT_SEED, trials=None) -> list[dict]:
    if names is None:
        names = list(SUITES)
    results = []
    for name in names:
        fn = SUITES[name]
        kwargs = {}
        import inspect

        params = inspect.signature(fn).parameters
        if "seed" in params:
            kwargs["seed"] = seed
        if trials is not None and "trials" in params:
            kwargs["trials"] = trials
        results.append(fn(**kwargs))
    return results
