"""Truncated-Wulff competitor machinery for repairing non-convex profiles.

All geometry is accessed through the radial profile alpha(t) of the full
Wulff shape K: every quantity of the construction (cap volumes, slice
measures, the (sigma, tau) parameter solves) depends only on slice measures,
so caps are one-dimensional profile segments and no polyhedral booleans are
needed.

Given a symmetric candidate E with a concavity violation on (t1, t2), the
construction replaces the middle section with a rescaled, truncated copy of
K whose cut slices match E's, translates the remainder, and strictly
decreases the energy (surface energy via the Wulff inequality, potential
energy because mass moves downward).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    HypothesisViolated,
    NoBracket,
    SigmaOutOfRange,
)
from ._quad import GAUSS_W, GAUSS_X
from .reduced import Profile, reduced_energy, reduced_volume
from .tension import SurfaceTension
from .wulff import (
    alpha_power_integral,
    alpha_spline,
    alpha_volume_table,
    build_wulff_body,
    vertical_extent,
    wulff_alpha,
)

# Exceptions that make a repair attempt unusable (callers may skip and retry).
CompetitorFailure = (HypothesisViolated, NoBracket, SigmaOutOfRange)

# Bisections shrink the parameter interval below this width (64-iteration cap).
BISECT_TOL = 1e-12
SCAN_POINTS = 64

# Default sampling density of cap profile segments.
CAP_SAMPLES = 513


@dataclass(frozen=True, eq=False)
class CapSegment:
    """Radial profile of a rescaled, truncated Wulff cap."""

    ts: np.ndarray
    rs: np.ndarray
    side: str
    sigma: float
    b: float


@dataclass(frozen=True, eq=False)
class CompetitorParams:
    """Solved parameters of the K_+/K_- construction for (E, t1, t2)."""

    side: str
    sigma: float
    tau: float
    b: float
    t1: float
    t2: float
    z_cut: float
    volume_match_error: float
    slice_match_error: float


# ---------------------------------------------------------------------------
# Profile section helpers
# ---------------------------------------------------------------------------

def section_volume(p: Profile, ta: float, tb: float) -> float:
    """|E cap {ta < x_N < tb}| for the piecewise-linear profile (exact)."""
    n = p.tension.dim - 1
    ts = np.unique(np.concatenate([[ta, tb], p.knots[(p.knots > ta) & (p.knots < tb)]]))
    rs = p.interp(ts)
    a, b = rs[:-1], rs[1:]
    acc = np.zeros_like(a)
    for k in range(n + 1):
        acc += a ** (n - k) * b**k
    return float(p.body.area * np.sum(np.diff(ts) * acc / (n + 1)))


def lateral_energy_between(p: Profile, ta: float, tb: float) -> float:
    """Lateral surface energy of the profile restricted to [ta, tb]."""
    nm1 = p.tension.dim - 1
    lam = p.body.lam
    ts = np.unique(np.concatenate([[ta, tb], p.knots[(p.knots > ta) & (p.knots < tb)]]))
    rs = p.interp(ts)
    dt = np.diff(ts)
    slope = np.diff(rs) / dt
    r_g = rs[:-1, None] + np.diff(rs)[:, None] * GAUSS_X[None, :]
    phi = p.tension.phi.value(lam, -nm1 * slope)
    s0 = (GAUSS_W[None, :] * r_g ** (nm1 - 1)).sum(axis=1)
    return float(p.body.area * np.sum(dt * s0 * phi))


def _slice_measure(p: Profile, t: float) -> float:
    n = p.tension.dim - 1
    return float(p.body.area * p.interp(t) ** n)


# ---------------------------------------------------------------------------
# Cap profiles
# ---------------------------------------------------------------------------

def _check_sigma(tension: SurfaceTension, sigma: float) -> tuple[float, float]:
    lo, hi = vertical_extent(tension)
    if not (lo < sigma < hi):
        raise SigmaOutOfRange(
            f"sigma={sigma} outside the vertical extent ({lo}, {hi}) of K"
        )
    return lo, hi


def cap_profile(tension: SurfaceTension, side: str, sigma: float,
                t_anchor: float, v_anchor: float,
                n_samples: int = CAP_SAMPLES,
                body=None) -> CapSegment:
    """Radial profile of K_+/K_- rescaled so the cut slice has measure v_anchor.

    side "+": the part of K above sigma, dilated by b and anchored so the cut
    lies at height t_anchor; side "-": the part below sigma, anchored from
    above.  The sampling grid clusters quadratically at the far pole where
    alpha has a vertical tangent.
    """
    lo, hi = _check_sigma(tension, sigma)
    if body is None:
        body = build_wulff_body(tension, 1024)
    nm1 = tension.dim - 1
    v_k_sigma = body.area * wulff_alpha(tension, sigma) ** nm1
    b = (v_anchor / v_k_sigma) ** (1.0 / nm1)
    xi = np.linspace(0.0, 1.0, n_samples)
    if side == "+":
        z = sigma + (hi - sigma) * np.sin(0.5 * math.pi * xi)
        ts = t_anchor + b * (z - sigma)
    elif side == "-":
        z = sigma - (sigma - lo) * np.sin(0.5 * math.pi * (1.0 - xi))
        ts = t_anchor + b * (z - sigma)
    else:
        raise ValueError("side must be '+' or '-'")
    rs = b * alpha_spline(tension)(z)
    return CapSegment(ts=ts, rs=rs, side=side, sigma=sigma, b=b)


def cap_section_volume(tension: SurfaceTension, area: float, b: float,
                       z_lo: float, z_hi: float) -> float:
    """Volume of the b-dilated cap between the heights z_lo..z_hi on K."""
    if z_hi <= z_lo:
        return 0.0
    table = alpha_volume_table(tension)
    if (z_hi - z_lo) > 0.05 * (table.t_top - table.t_bot):
        raw = float(table.cumulative(z_hi) - table.cumulative(z_lo))
    else:
        # Short spans would cancel in the cumulative table; integrate locally.
        raw = alpha_power_integral(tension, z_lo, z_hi)
    return area * b**tension.dim * raw


# ---------------------------------------------------------------------------
# Parameter solves
# ---------------------------------------------------------------------------

def _bisect(fn, lo: float, hi: float, f_lo: float) -> float:
    for _ in range(64):
        if hi - lo < BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if (fn(mid) > 0.0) == (f_lo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scan_bracket(fn, grid: np.ndarray):
    vals = np.array([fn(s) for s in grid])
    idx = np.nonzero(vals[:-1] * vals[1:] <= 0.0)[0]
    if len(idx) == 0:
        return None, vals
    k = idx[-1]
    return _bisect(fn, grid[k], grid[k + 1], vals[k]), vals


def _sample_cap(tension: SurfaceTension, b: float, t_anchor: float,
                sigma: float, z_cut: float, side: str,
                n_samples: int = CAP_SAMPLES):
    """Piecewise-linear sampling of the truncated cap, clustered at the far
    cut (which may sit at a pole of alpha).  Heights increase."""
    fa = alpha_spline(tension)
    xi = np.linspace(0.0, 1.0, n_samples)
    if side == "+":
        z = sigma + (z_cut - sigma) * np.sin(0.5 * math.pi * xi)
    else:
        z = z_cut + (sigma - z_cut) * (1.0 - np.cos(0.5 * math.pi * xi))
    ts = t_anchor + b * (z - sigma)
    return ts, b * fa(z)


def _pl_volume(area: float, nm1: int, ts: np.ndarray, rs: np.ndarray) -> float:
    a, b = rs[:-1], rs[1:]
    acc = np.zeros_like(a)
    for k in range(nm1 + 1):
        acc += a ** (nm1 - k) * b**k
    return float(area * np.sum(np.diff(ts) * acc / (nm1 + 1)))


def solve_params(e: Profile, t1: float, t2: float, side: str) -> CompetitorParams:
    """Solve the cut height sigma and truncation height tau of the cap.

    The cap is anchored at t1 (side "+") or t2 (side "-") with its cut slice
    matching E there.  The far slice match is enforced exactly by inverting
    alpha on the appropriate monotone branch; a single bisection in sigma
    then drives the enclosed cap volume to the middle volume of E.  Both the
    middle volume and the cap volume are evaluated on the same
    piecewise-linear discretization used for splicing, so the matches hold
    to bisection accuracy.  Candidate branches are scanned with 64-sample
    endpoint tables (the residual runs from the whole rescaled shape down to
    a vanishing cap, so a bracket exists).
    """
    if not (0.0 < t1 < t2):
        raise ValueError("need 0 < t1 < t2")
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    tension = e.tension
    nm1 = tension.dim - 1
    fa = alpha_spline(tension)
    lo, hi, peak = fa.t_bot, fa.t_top, fa.peak
    span = hi - lo
    eps = 1e-9 * span
    area = e.body.area
    v_mid = section_volume(e, t1, t2)
    if v_mid <= 0:
        raise HypothesisViolated("middle section of E has no volume")

    r1 = float(e.interp(t1))
    r2 = float(e.interp(t2))
    if side == "+":
        t_anchor, r_anchor, r_far = t1, r1, r2
    else:
        t_anchor, r_anchor, r_far = t2, r2, r1
    if r_anchor <= 0:
        raise HypothesisViolated(f"empty anchor slice at t={t_anchor}")
    ratio = r_far / r_anchor
    peak_val = fa(peak)

    def inc_branch(sig):
        return fa.solve_on_branch(fa(sig) * ratio, lo, peak)

    def dec_branch(sig):
        return fa.solve_on_branch(fa(sig) * ratio, peak, hi)

    def near_branch(sig):
        # The monotone piece between sigma and the peak, on sigma's side.
        if side == "+":
            return fa.solve_on_branch(fa(sig) * ratio, min(sig, peak), peak)
        return fa.solve_on_branch(fa(sig) * ratio, peak, max(sig, peak))

    if ratio <= 1.0:
        # Far slice no wider than the cut: z lies past the peak on the far
        # side, for every admissible sigma.
        candidates = [dec_branch] if side == "+" else [inc_branch]
        sig_lo, sig_hi = lo + eps, hi - eps
    else:
        # Far slice wider than the cut: alpha(sigma) * ratio must stay below
        # the peak width, and z may sit before or past the peak.
        if side == "+":
            sig_max = fa.solve_on_branch(peak_val / ratio, lo, peak)
            sig_lo, sig_hi = lo + eps, sig_max - eps
            candidates = [near_branch, dec_branch]
        else:
            sig_min = fa.solve_on_branch(peak_val / ratio, peak, hi)
            sig_lo, sig_hi = sig_min + eps, hi - eps
            candidates = [near_branch, inc_branch]

    def make_residual(z_of):
        def residual(sig):
            z = z_of(sig)
            b = r_anchor / fa(sig)
            ts, rs = _sample_cap(tension, b, t_anchor, sig, z, side)
            return _pl_volume(area, nm1, ts, rs) - v_mid
        return residual

    grid = np.linspace(sig_lo, sig_hi, SCAN_POINTS + 1)
    sigma = None
    last_table = None
    for z_of in candidates:
        resid = make_residual(z_of)
        sigma, vals = _scan_bracket(resid, grid)
        last_table = np.stack([grid, vals])
        if sigma is not None:
            z = z_of(sigma)
            break
    if sigma is None:
        raise NoBracket(f"cap volume residual (side {side}) never crosses zero",
                        table=last_table)

    b = r_anchor / fa(sigma)
    tau = t_anchor + b * (z - sigma)
    ts, rs = _sample_cap(tension, b, t_anchor, sigma, z, side)
    v_far = area * (b * fa(z)) ** nm1
    vol_err = abs(_pl_volume(area, nm1, ts, rs) - v_mid) / (1.0 + v_mid)
    slice_err = abs(v_far - area * r_far**nm1) / (1.0 + area * r_far**nm1)
    return CompetitorParams(side=side, sigma=float(sigma), tau=float(tau), b=float(b),
                            t1=t1, t2=t2, z_cut=float(z),
                            volume_match_error=vol_err, slice_match_error=slice_err)


# ---------------------------------------------------------------------------
# Surface-energy comparison and the competitor itself
# ---------------------------------------------------------------------------

def _cap_as_knots(e: Profile, params: CompetitorParams,
                  n_samples: int = CAP_SAMPLES):
    """Sample the solved truncated cap as piecewise-linear knot data.

    Returns (ts, rs) spanning [t1, tau] for side "+" and [tau, t2] for
    side "-", on exactly the grid the parameter solve used.
    """
    t_anchor = params.t1 if params.side == "+" else params.t2
    return _sample_cap(e.tension, params.b, t_anchor, params.sigma,
                       params.z_cut, params.side, n_samples)


def compare_surface_energy(e: Profile, params: CompetitorParams):
    """(cap_energy, original_energy) of the lateral surfaces being swapped.

    Both sides are evaluated with the same piecewise-linear reduced-energy
    quadrature, so the fixed-point case (E itself a cap) compares equal to
    rounding.
    """
    ts, rs = _cap_as_knots(e, params)
    shift = ts[0]
    cap = Profile(knots=ts - shift, r=rs, tension=e.tension, body=e.body)
    cap_energy = lateral_energy_between(cap, cap.knots[0], cap.knots[-1])
    original = lateral_energy_between(e, params.t1, params.t2)
    return cap_energy, original


def find_nonconvexity(e: Profile, epsilon: float):
    """Witness (t1', t2') of failed discrete concavity with gap < epsilon.

    Returns None when the profile is concave on its support.  Otherwise the
    worst chord violation seeds the sweep: the chord-deficit function is
    maximized, its superlevel interval at (1 - delta) of the maximum is
    mapped back to heights, and delta shrinks until the gap is below epsilon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    t, r = e.knots, e.r
    slopes = np.diff(r) / np.diff(t)
    kink = np.diff(slopes)
    scale = max(1.0, float(np.max(r)))
    cand = np.nonzero(kink > 1e-11 * scale)[0] + 1
    support = r > 0
    cand = [i for i in cand if support[i - 1] or support[i] or support[i + 1]]
    if not cand:
        return None
    ic = np.array(cand)
    w = (t[ic + 1] - t[ic]) / (t[ic + 1] - t[ic - 1])
    deficit = w * r[ic - 1] + (1 - w) * r[ic + 1] - r[ic]
    i = cand[int(np.argmax(deficit))]
    t1, t2 = float(t[i - 1]), float(t[i + 1])

    ta, tb = t1, t2
    for _ in range(8):
        if t2 - t1 < epsilon:
            return t1, t2
        inner = t[(t > t1) & (t < t2)]
        mu_knots = np.concatenate([[0.0], (t2 - inner[::-1]) / (t2 - t1), [1.0]])
        heights = t2 - mu_knots * (t2 - t1)
        f = (
            mu_knots * np.interp(t1, t, r)
            + (1 - mu_knots) * np.interp(t2, t, r)
            - np.interp(heights, t, r)
        )
        k = int(np.argmax(f))
        fmax = f[k]
        if fmax <= 0:
            return None
        delta = 0.5
        for _ in range(60):
            level = (1.0 - delta) * fmax
            left = mu_knots[k]
            for j in range(k, 0, -1):
                if f[j - 1] < level:
                    frac = (f[j] - level) / (f[j] - f[j - 1])
                    left = mu_knots[j] + frac * (mu_knots[j - 1] - mu_knots[j])
                    break
                left = mu_knots[j - 1]
            right = mu_knots[k]
            for j in range(k, len(f) - 1):
                if f[j + 1] < level:
                    frac = (f[j] - level) / (f[j] - f[j + 1])
                    right = mu_knots[j] + frac * (mu_knots[j + 1] - mu_knots[j])
                    break
                right = mu_knots[j + 1]
            ta = t2 - right * (t2 - t1)
            tb = t2 - left * (t2 - t1)
            if tb - ta < epsilon:
                return float(ta), float(tb)
            delta *= 0.5
        # Flat maximum: nudge the outer endpoint to break the tie.
        t2 = t2 - 1e-3 * (t2 - t1)
    return float(ta), float(tb)


def repair_profile(e: Profile, tension: SurfaceTension, omega: float,
                   epsilon: Optional[float] = None,
                   max_shrinks: int = 12) -> Optional[Profile]:
    """One competitor repair at the worst concavity violation.

    Returns None when the profile is already concave.  When the construction
    hypotheses fail for the witness interval (typically the case-2 mass
    condition near the apex), the witness gap is shrunk geometrically: the
    sweep guarantees arbitrarily small violating intervals, on which the
    hypotheses eventually hold.
    """
    if epsilon is None:
        epsilon = 0.5 * e.t_max
    last: Exception | None = None
    for _ in range(max_shrinks):
        witness = find_nonconvexity(e, epsilon=epsilon)
        if witness is None:
            return None
        try:
            return apply_competitor(e, witness[0], witness[1], tension, omega)
        except CompetitorFailure as exc:
            last = exc
            epsilon *= 0.25
    raise last  # type: ignore[misc]


def _check_hyp1(e: Profile, t1: float, t2: float) -> None:
    r1, r2 = float(e.interp(t1)), float(e.interp(t2))
    inner = e.knots[(e.knots > t1) & (e.knots < t2)]
    probes = np.unique(np.concatenate([inner, [0.5 * (t1 + t2)]]))
    chord = r1 + (probes - t1) / (t2 - t1) * (r2 - r1)
    if not np.all(e.interp(probes) < chord):
        raise HypothesisViolated(
            f"profile does not lie strictly below the chord on ({t1}, {t2})"
        )


def apply_competitor(e: Profile, t1: float, t2: float,
                     tension: SurfaceTension, omega: float) -> Profile:
    """Replace the non-convex section of E by a truncated Wulff cap.

    Case 1 (r(t1) <= r(t2)): splice in the upper cap K_+ and translate the
    top of E down by t2 - tau.  Case 2 (r(t1) > r(t2)): splice in the lower
    cap K_- and translate it and the top of E down by tau - t1; this
    additionally requires the mass above t2 to dominate, hypothesis
    t2 - t1 < |E cap {x_N >= t2}| / sup v_E.

    The returned profile has the volume of E to 1e-8 relative and strictly
    smaller energy; the achieved margin is stored in ``meta``.
    """
    _check_hyp1(e, t1, t2)
    nm1 = tension.dim - 1
    r1, r2 = float(e.interp(t1)), float(e.interp(t2))

    if r1 <= r2:
        params = solve_params(e, t1, t2, "+")
        tau = params.tau
        ts_cap, rs_cap = _cap_as_knots(e, params)
        low = e.knots < t1 - 1e-13
        high = e.knots > t2 + 1e-13
        new_t = np.concatenate([e.knots[low], ts_cap, e.knots[high] - (t2 - tau)])
        new_r = np.concatenate([e.r[low], rs_cap, e.r[high]])
    else:
        v_above = section_volume(e, t2, e.t_max)
        v_sup = e.body.area * float(np.max(e.r)) ** nm1
        if not (t2 - t1 < v_above / v_sup):
            raise HypothesisViolated(
                "case-2 mass hypothesis fails: not enough volume above t2"
            )
        params = solve_params(e, t1, t2, "-")
        tau = params.tau
        ts_cap, rs_cap = _cap_as_knots(e, params)
        shift = tau - t1
        low = e.knots < t1 - 1e-13
        high = e.knots > t2 + 1e-13
        new_t = np.concatenate([e.knots[low], ts_cap - shift, e.knots[high] - shift])
        new_r = np.concatenate([e.r[low], rs_cap, e.r[high]])

    order = np.argsort(new_t, kind="stable")
    new_t, new_r = new_t[order], new_r[order]
    good = np.concatenate([[True], np.diff(new_t) > 1e-13])
    new_t, new_r = new_t[good], new_r[good]
    result = Profile(knots=new_t, r=np.maximum(new_r, 0.0), tension=tension,
                     body=e.body, omega=omega)

    vol_old = reduced_volume(e)
    vol_new = reduced_volume(result)
    if abs(vol_new - vol_old) > 1e-8 * (1.0 + vol_old):
        raise NoBracket(
            f"competitor volume mismatch: {vol_new} vs {vol_old} "
            f"(params {params})"
        )
    e_old = reduced_energy(e, omega).total
    e_new = reduced_energy(result, omega).total
    meta = {"params": params, "energy_drop": e_old - e_new,
            "volume_error": abs(vol_new - vol_old)}
    return Profile(knots=result.knots, r=result.r, tension=tension,
                   body=e.body, omega=omega, meta=meta)
