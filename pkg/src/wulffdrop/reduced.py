"""Symmetric radial reduction of the drop energy.

A symmetric candidate is a profile t -> r(t): the slice at height t is
r(t) * K_h.  Dividing the energy by |K_h| gives the reduced functional

    omega r(0)^(N-1)
      + int r^(N-2) phi(Lambda, -(N-1) r') dt
      + int t r^(N-1) dt,

plus a flat-top contribution phi(0,1) r(T)^(N-1) when the profile is
truncated at positive radius.  Here Lambda = P_h(K_h)/|K_h|, which equals
N-1 exactly for the polytopal bodies built by :mod:`wulffdrop.wulff`.

The module provides the profile type, exact volume, energy with analytic
gradients, Euler-Lagrange and contact-slope (Young) residuals, and a
volume-constrained first-order minimizer with competitor repair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateRadius,
    EmptyBase,
    NonConvergence,
    OmegaOutOfRange,
)
from ._quad import GAUSS_W, GAUSS_X
from .tension import SurfaceTension, phi_partials
from .wulff import WulffBody, build_wulff_body


@dataclass(frozen=True, eq=False)
class EnergyBreakdown:
    """Surface, contact and potential contributions plus their sum."""

    Fs: float
    Fc: float
    Fp: float
    total: float


@dataclass(frozen=True, eq=False)
class Profile:
    """Radial description of a symmetric candidate drop.

    ``knots`` are strictly increasing heights starting at 0; ``r`` the
    radii (slice at height t is r(t) K_h, piecewise linear in t).
    """

    knots: np.ndarray
    r: np.ndarray
    tension: SurfaceTension
    body: WulffBody
    omega: Optional[float] = None
    meta: Optional[dict] = None

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        r = np.asarray(self.r, dtype=float)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "r", r)
        if knots.ndim != 1 or knots.shape != r.shape:
            raise ValueError("knots and r must be 1-D arrays of equal length")
        if knots[0] != 0.0:
            raise ValueError("profiles start at height 0")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(r < 0):
            raise ValueError("radii must be non-negative")

    @property
    def tension_id(self) -> str:
        return self.tension.tension_id

    @property
    def t_max(self) -> float:
        return float(self.knots[-1])

    def interp(self, t):
        return np.interp(t, self.knots, self.r)

    def concavity_defect(self) -> float:
        """Largest dip of r below a local chord on its support (<= 0: concave)."""
        t, a = self.knots, self.r
        if len(t) < 3:
            return 0.0
        pos = a > 0
        w = (t[2:] - t[1:-1]) / (t[2:] - t[:-2])
        chord = w * a[:-2] + (1 - w) * a[2:]
        # Knots in the support, plus zero knots pinched between positive ones.
        interior = pos[1:-1] | (pos[:-2] & pos[2:])
        if not interior.any():
            return 0.0
        return float(np.max((chord - a[1:-1])[interior]))

    def support_is_interval(self) -> bool:
        """True when {r > 0} is a single run of knots starting at 0."""
        pos = np.nonzero(self.r > 0)[0]
        if len(pos) == 0:
            return True
        return pos[-1] - pos[0] + 1 == len(pos) and pos[0] == 0


def check_omega(tension: SurfaceTension, omega: float) -> None:
    lo, hi = tension.omega_range
    if not (lo < omega < hi):
        raise OmegaOutOfRange(
            f"omega={omega} outside the admissible interval ({lo}, {hi})"
        )


def _resolve_omega(p: Profile, omega):
    if omega is None:
        omega = p.omega
    if omega is None:
        raise OmegaOutOfRange("no contact coefficient attached to this profile")
    check_omega(p.tension, omega)
    return float(omega)


# ---------------------------------------------------------------------------
# Volume and energy
# ---------------------------------------------------------------------------

def reduced_volume(p: Profile) -> float:
    """|E| = |K_h| * int r(t)^(N-1) dt, slab-exact for piecewise-linear r."""
    n = p.tension.dim - 1
    a, b = p.r[:-1], p.r[1:]
    dt = np.diff(p.knots)
    acc = np.zeros_like(a)
    for k in range(n + 1):
        acc += a ** (n - k) * b**k
    return float(p.body.area * np.sum(dt * acc / (n + 1)))


def _lateral_pieces(p: Profile, with_d2: bool = False):
    """Per-slab quantities of the lateral integrand (vectorized)."""
    nm1 = p.tension.dim - 1
    lam = p.body.lam
    a, b = p.r[:-1], p.r[1:]
    dt = np.diff(p.knots)
    slope = (b - a) / dt
    r_g = a[:, None] + (b - a)[:, None] * GAUSS_X[None, :]
    s_arg = -nm1 * slope
    phi = p.tension.phi.value(lam, s_arg)
    d2 = None
    if with_d2:
        _, d2, _ = phi_partials(p.tension, np.full_like(slope, lam), s_arg)
    return nm1, lam, a, b, dt, slope, r_g, phi, d2


def reduced_energy(p: Profile, omega: Optional[float] = None,
                   gravity: float = 1.0) -> EnergyBreakdown:
    """Energy of the symmetric candidate (absolute, i.e. times |K_h|).

    ``gravity`` rescales the potential term only (plumbing; defaults to the
    model value 1 and is excluded from acceptance).
    """
    om = _resolve_omega(p, omega)
    nm1, lam, a, b, dt, slope, r_g, phi, _ = _lateral_pieces(p)
    area = p.body.area
    s0 = (GAUSS_W[None, :] * r_g ** (nm1 - 1)).sum(axis=1)
    fs = float(area * np.sum(dt * s0 * phi))
    if p.r[-1] > 0:
        fs += p.tension.f_eN * area * p.r[-1] ** nm1
    fc = om * area * float(p.r[0] ** nm1)
    t_g = p.knots[:-1, None] + dt[:, None] * GAUSS_X[None, :]
    fp = gravity * float(
        area * np.sum(dt * (GAUSS_W[None, :] * t_g * r_g**nm1).sum(axis=1)))
    return EnergyBreakdown(Fs=fs, Fc=fc, Fp=fp, total=fs + fc + fp)


def reduced_energy_gradient(p: Profile, omega: Optional[float] = None) -> np.ndarray:
    """Analytic gradient of the total reduced energy w.r.t. the nodal radii."""
    om = _resolve_omega(p, omega)
    nm1, lam, a, b, dt, slope, r_g, phi, d2 = _lateral_pieces(p, with_d2=True)
    area = p.body.area
    grad = np.zeros_like(p.r)
    wx = GAUSS_W * (1.0 - GAUSS_X)
    wy = GAUSS_W * GAUSS_X

    # Lateral: d/da [dt * S0 * phi] and the slope channel through phi.
    if nm1 >= 2:
        rp = (nm1 - 1) * r_g ** (nm1 - 2)
        sa = (wx[None, :] * rp).sum(axis=1)
        sb = (wy[None, :] * rp).sum(axis=1)
    else:
        sa = sb = np.zeros_like(dt)
    s0 = (GAUSS_W[None, :] * r_g ** (nm1 - 1)).sum(axis=1)
    grad_a = area * (dt * sa * phi + s0 * nm1 * d2)
    grad_b = area * (dt * sb * phi - s0 * nm1 * d2)
    np.add.at(grad, np.arange(len(dt)), grad_a)
    np.add.at(grad, np.arange(1, len(dt) + 1), grad_b)

    # Gravity.
    t_g = p.knots[:-1, None] + dt[:, None] * GAUSS_X[None, :]
    gg = nm1 * r_g ** (nm1 - 1) * t_g
    np.add.at(grad, np.arange(len(dt)), area * dt * (wx[None, :] * gg).sum(axis=1))
    np.add.at(grad, np.arange(1, len(dt) + 1), area * dt * (wy[None, :] * gg).sum(axis=1))

    # Contact and flat top.
    grad[0] += om * area * nm1 * p.r[0] ** (nm1 - 1)
    if p.r[-1] > 0:
        grad[-1] += p.tension.f_eN * area * nm1 * p.r[-1] ** (nm1 - 1)
    return grad


def volume_gradient(p: Profile) -> np.ndarray:
    nm1 = p.tension.dim - 1
    a, b = p.r[:-1], p.r[1:]
    dt = np.diff(p.knots)
    r_g = a[:, None] + (b - a)[:, None] * GAUSS_X[None, :]
    rp = nm1 * r_g ** (nm1 - 1)
    wx = GAUSS_W * (1.0 - GAUSS_X)
    wy = GAUSS_W * GAUSS_X
    grad = np.zeros_like(p.r)
    np.add.at(grad, np.arange(len(dt)), p.body.area * dt * (wx[None, :] * rp).sum(axis=1))
    np.add.at(grad, np.arange(1, len(dt) + 1), p.body.area * dt * (wy[None, :] * rp).sum(axis=1))
    return grad


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ElResidual:
    """Euler-Lagrange residual at the interior knots (zero-radius knots skipped)."""

    ts: np.ndarray
    values: np.ndarray
    skipped: np.ndarray

    def max_abs(self, t_cut: Optional[float] = None) -> float:
        """Max |residual|, optionally restricted to knots with t <= t_cut."""
        mask = np.ones(len(self.ts), dtype=bool) if t_cut is None else self.ts <= t_cut
        if not mask.any():
            return math.nan
        return float(np.max(np.abs(self.values[mask])))


def el_residual(p: Profile, lam_mult: float) -> ElResidual:
    """Discrete residual of the Euler-Lagrange equation with multiplier lam_mult.

    Uses the conservative flux form: the flux (N-1) r^(N-2) d2phi at interval
    midpoints, differenced across each interior knot, minus the zero-order
    and gravity terms evaluated with centered slopes.
    """
    nm1 = p.tension.dim - 1
    lam = p.body.lam
    t, r = p.knots, p.r
    dt = np.diff(t)
    slope = np.diff(r) / dt
    r_mid = 0.5 * (r[:-1] + r[1:])
    _, d2_mid, _ = phi_partials(p.tension, np.full_like(slope, lam), -nm1 * slope)
    flux = nm1 * r_mid ** (nm1 - 1) * d2_mid

    i = np.arange(1, len(t) - 1)
    denom = 0.5 * (t[i + 1] - t[i - 1])
    dflux = (flux[i] - flux[i - 1]) / denom
    slope_c = (r[i + 1] - r[i - 1]) / (t[i + 1] - t[i - 1])
    phi_c = p.tension.phi.value(lam, -nm1 * slope_c)
    if nm1 >= 2:
        zero_order = (nm1 - 1) * r[i] ** (nm1 - 2) * phi_c
    else:
        zero_order = np.zeros_like(phi_c)
    gravity = nm1 * (t[i] + lam_mult) * r[i] ** (nm1 - 1)
    res = -dflux - zero_order - gravity

    good = r[i] > 0
    return ElResidual(ts=t[i][good], values=res[good], skipped=i[~good])


def young_residual(p: Profile, omega: Optional[float] = None,
                   contact_slope: Optional[float] = None) -> float:
    """-d2phi(Lambda, -(N-1) r'(0)) - omega with the one-sided grid slope.

    ``contact_slope`` overrides the grid slope (the shooting solver knows the
    exact slope through its contact parameter).
    """
    om = _resolve_omega(p, omega)
    if p.r[0] <= 0:
        raise EmptyBase("contact radius vanishes; Young's condition undefined")
    nm1 = p.tension.dim - 1
    if contact_slope is None:
        contact_slope = (p.r[1] - p.r[0]) / (p.knots[1] - p.knots[0])
    _, d2, _ = phi_partials(p.tension, p.body.lam, -nm1 * contact_slope)
    return float(-d2 - om)


def lambda_estimate(p: Profile, interior_frac: float = 0.9) -> float:
    """Least-squares multiplier from the interior Euler-Lagrange residuals."""
    res0 = el_residual(p, 0.0)
    cut = interior_frac * p.t_max
    mask = res0.ts <= cut
    if not mask.any():
        raise DegenerateRadius("no usable interior knots for the multiplier fit")
    r_at = np.interp(res0.ts[mask], p.knots, p.r)
    nm1 = p.tension.dim - 1
    c = nm1 * r_at ** (nm1 - 1)
    return float(np.dot(c, res0.values[mask]) / np.dot(c, c))


# ---------------------------------------------------------------------------
# Direct minimization
# ---------------------------------------------------------------------------

@dataclass
class MinimizeOptions:
    max_iter: int = 24000
    tol_energy: float = 1e-10
    tol_grad: float = 1e-4
    sweep: int = 80
    repair_every: int = 500
    polish_every: int = 200
    armijo: float = 1e-4
    max_backtracks: int = 50
    step_min: float = 1e-7
    step_max: float = 1e3
    raise_on_failure: bool = True


def _winterbottom_init(tension: SurfaceTension, body: WulffBody, omega: float,
                       m: float, xi: np.ndarray):
    """Truncated-Wulff initial guess scaled to volume m.

    The zero-gravity minimizer is the Wulff shape truncated at the height
    where its contact slope satisfies Young's condition; for Lambda = N-1
    that height is simply -omega (clipped into the vertical extent).
    """
    from .wulff import alpha_volume_table, vertical_extent, wulff_alpha

    lo, hi = vertical_extent(tension)
    sigma0 = min(max(-omega, lo + 0.02 * (hi - lo)), hi - 0.05 * (hi - lo))
    table = alpha_volume_table(tension)
    cap = table.above(sigma0)
    bscale = (m / (body.area * cap)) ** (1.0 / tension.dim)
    t_top = bscale * (hi - sigma0)
    knots = xi * t_top
    r = bscale * wulff_alpha(tension, sigma0 + knots / bscale)
    r[-1] = 0.0
    return knots, np.maximum(r, 0.0), t_top


class _SliceMeasureFunctional:
    """Reduced energy in the slice-measure unknown rho = r^(N-1).

    For admissible tensions the lateral integrand phi(Lambda rho^kappa,
    -rho') with kappa = (N-2)/(N-1) is smooth through the apex (the pole
    flatness d1phi(0, +-1) = 0 removes the sqrt term), the constraint and
    the potential are linear in rho, and the profile meets its top at a
    simple root of rho.  This removes the vertical-tangent stiffness of the
    radial parametrization.
    """

    def __init__(self, tension, body, omega, xi):
        self.tension = tension
        self.body = body
        self.omega = omega
        self.xi = xi
        self.dxi = np.diff(xi)
        self.nm1 = tension.dim - 1
        self.kappa = (tension.dim - 2) / (tension.dim - 1)
        self.lam = body.lam
        self.d22_zero = _d22_at_zero(tension, self.lam)

    def pieces(self, rho, t_top):
        dt = self.dxi * t_top
        slope = np.diff(rho) / dt
        rho_g = rho[:-1, None] + np.diff(rho)[:, None] * GAUSS_X[None, :]
        dead = (rho[:-1] == 0.0) & (rho[1:] == 0.0)
        a_g = self.lam * rho_g**self.kappa
        b_g = np.broadcast_to((-slope)[:, None], a_g.shape)
        return dt, slope, rho_g, dead, a_g, b_g

    def energy(self, rho, t_top):
        dt, slope, rho_g, dead, a_g, b_g = self.pieces(rho, t_top)
        area = self.body.area
        phi_g = self.tension.phi.value(a_g, b_g)
        phi_g[dead] = 0.0
        fs = float(area * np.sum(dt * (GAUSS_W[None, :] * phi_g).sum(axis=1)))
        # Flat-top term, linear in rho (vanishes with the top slice).
        fs += self.tension.f_eN * area * float(rho[-1])
        fc = self.omega * area * float(rho[0])
        t_g = self.xi[:-1, None] * t_top + dt[:, None] * GAUSS_X[None, :]
        fp = float(area * np.sum(dt * (GAUSS_W[None, :] * t_g * rho_g).sum(axis=1)))
        return fs + fc + fp, fs, fc, fp

    def volume(self, rho, t_top):
        return float(self.body.area * t_top
                     * np.sum(self.dxi * 0.5 * (rho[:-1] + rho[1:])))

    def grads(self, rho, t_top):
        """(E, g_rho, dE_dT, vol, gv_rho, dV_dT, h_rho, h_T)."""
        dt, slope, rho_g, dead, a_g, b_g = self.pieces(rho, t_top)
        area = self.body.area
        n_cells = len(dt)
        live = ~dead

        phi_g = self.tension.phi.value(a_g, b_g)
        d1_g = np.zeros_like(a_g)
        d2_g = np.zeros_like(a_g)
        d11_g = np.zeros_like(a_g)
        if live.any():
            d1_g[live], d2_g[live], d11_g[live] = phi_partials(
                self.tension, a_g[live], b_g[live]
            )
        phi_g[dead] = 0.0

        # Value channel d1 * Lambda * kappa * rho^(kappa-1); stays bounded
        # through the apex because d1 vanishes with its first argument, and
        # Gauss nodes of live cells have rho_g > 0 strictly.
        if self.kappa > 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                vchan = d1_g * self.lam * self.kappa * rho_g ** (self.kappa - 1.0)
            vchan[dead] = 0.0
        else:
            vchan = np.zeros_like(a_g)

        wx = GAUSS_W[None, :] * (1.0 - GAUSS_X[None, :])
        wy = GAUSS_W[None, :] * GAUSS_X[None, :]
        g = np.zeros_like(rho)
        # Lateral: value channel plus the slope channel through -rho'.
        ga = (dt[:, None] * wx * vchan).sum(axis=1) + (GAUSS_W[None, :] * d2_g).sum(axis=1)
        gb = (dt[:, None] * wy * vchan).sum(axis=1) - (GAUSS_W[None, :] * d2_g).sum(axis=1)
        np.add.at(g, np.arange(n_cells), area * ga)
        np.add.at(g, np.arange(1, n_cells + 1), area * gb)
        # Gravity (linear in rho).
        t_g = self.xi[:-1, None] * t_top + dt[:, None] * GAUSS_X[None, :]
        np.add.at(g, np.arange(n_cells), area * dt * (wx * t_g).sum(axis=1))
        np.add.at(g, np.arange(1, n_cells + 1), area * dt * (wy * t_g).sum(axis=1))
        # Contact and flat top (one-sided derivative at rho_M = 0 included).
        g[0] += self.omega * area
        g[-1] += self.tension.f_eN * area

        e_total, fs, fc, fp = self.energy(rho, t_top)
        vol = self.volume(rho, t_top)

        # T-derivatives on knots = xi * T (nodal rho fixed).
        de_lat = area * float(np.sum(
            self.dxi * (GAUSS_W[None, :] * (phi_g + slope[:, None] * d2_g)).sum(axis=1)
        ))
        de_dT = de_lat + 2.0 * fp / t_top
        dv_dT = vol / t_top

        gv = np.zeros_like(rho)
        half = area * t_top * 0.5 * self.dxi
        np.add.at(gv, np.arange(n_cells), half)
        np.add.at(gv, np.arange(1, n_cells + 1), half)

        # Diagonal curvature estimate (slope channel dominates).
        with np.errstate(divide="ignore", invalid="ignore"):
            d22_g = np.where(np.abs(b_g) > 0, (a_g / b_g) ** 2 * d11_g, self.d22_zero)
        d22_g[dead] = 0.0
        stiff = area * (GAUSS_W[None, :] * d22_g).sum(axis=1) / dt
        stiff[dead] = 0.0
        h = np.zeros_like(rho)
        np.add.at(h, np.arange(n_cells), stiff)
        np.add.at(h, np.arange(1, n_cells + 1), stiff)
        h += 1e-4 * max(float(np.max(h)), 1e-30) + 1e-30
        h_T = float(np.sum(stiff * (slope * dt) ** 2) / t_top**2) + 2.0 * fp / t_top**2
        h_T = max(h_T, 1e-12)
        return e_total, g, de_dT, vol, gv, dv_dT, h, h_T


def minimize_direct(tension: SurfaceTension, omega: float, m: float,
                    grid_size: int = 161,
                    opts: Optional[MinimizeOptions] = None) -> Profile:
    """Volume-constrained first-order descent for the minimizing profile.

    The unknowns are the slice measures rho_i = r_i^(N-1) on a uniform grid
    of knots xi * T plus the movable top height T; rho is clamped at 0 from
    below and the iterate stays feasible (after every accepted step rho is
    rescaled onto the volume constraint, which is linear in rho).  Steps are
    diagonally preconditioned Barzilai-Borwein trials with Armijo
    backtracking; every ``repair_every`` iterations a competitor repair is
    attempted at the worst concavity violation.  The returned profile
    carries solver diagnostics in ``meta``.
    """
    from . import competitor as comp

    check_omega(tension, omega)
    if m <= 0:
        raise ValueError("volume must be positive")
    if opts is None:
        opts = MinimizeOptions()
    body = build_wulff_body(tension, 1024)
    nm1 = tension.dim - 1

    xi = np.linspace(0.0, 1.0, grid_size)
    knots, r0, t_top = _winterbottom_init(tension, body, omega, m, xi)
    rho = r0**nm1
    fn = _SliceMeasureFunctional(tension, body, omega, xi)
    rho *= m / fn.volume(rho, t_top)

    iterations = 0
    repairs = 0
    proj_norm = math.inf
    converged = False
    n_rho = len(rho)
    rho[-1] = 0.0

    def to_profile(rho_now, t_now):
        return Profile(knots=xi * t_now, r=rho_now ** (1.0 / nm1),
                       tension=tension, body=body, omega=omega)

    def rescaled(rho_try, t_try):
        v = fn.volume(rho_try, t_try)
        if v <= 0:
            return None, math.inf
        rho_new = rho_try * (m / v)
        return (rho_new, t_try), fn.energy(rho_new, t_try)[0]

    def snapped(rho_now, t_now):
        """Shrink T so that only the final knot carries a zero radius.

        Extending the support by lifting a zero knot inside a fixed grid
        costs surface area like sqrt(height), so trailing zeros freeze; the
        support boundary is moved by rescaling the grid instead.
        """
        pos = np.nonzero(rho_now > 0.0)[0]
        if len(pos) == 0 or pos[-1] >= n_rho - 2:
            return rho_now, t_now
        t_eff = float(xi[pos[-1] + 1] * t_now)
        rho_new = np.interp(xi * t_eff, xi * t_now, rho_now)
        rho_new[-1] = 0.0
        state, _ = rescaled(rho_new, t_eff)
        if state is None:
            return rho_now, t_now
        return state

    def t_polish(rho_now, t_now, e_now):
        """Golden-section line search along the volume-preserving stretch
        family (the slowly converging global aspect-ratio mode)."""
        inv = (math.sqrt(5.0) - 1.0) / 2.0

        def psi(t_new):
            state, e_new = rescaled(rho_now, t_new)
            return e_new, state

        a, b = 0.95 * t_now, 1.05 * t_now
        c = b - inv * (b - a)
        dpt = a + inv * (b - a)
        fc, _ = psi(c)
        fd, _ = psi(dpt)
        while b - a > 1e-12 * t_now:
            if fc < fd:
                b, dpt, fd = dpt, c, fc
                c = b - inv * (b - a)
                fc, _ = psi(c)
            else:
                a, c, fc = c, dpt, fd
                dpt = a + inv * (b - a)
                fd, _ = psi(dpt)
        t_best = 0.5 * (a + b)
        e_best, state = psi(t_best)
        if state is not None and e_best < e_now:
            return state
        return rho_now, t_now

    rho, t_top = snapped(rho, t_top)
    energy_hist = []
    prev_x = prev_d = None
    bb_step = 1.0
    failures = 0
    for _ in range(opts.max_iter):
        iterations += 1
        e_now, g, de_dT, vol, gv, dv_dT, h, h_T = fn.grads(rho, t_top)
        energy_hist.append(e_now)

        gg = np.concatenate([g, [de_dT]])
        gvv = np.concatenate([gv, [dv_dT]])
        proj = gg - (gg @ gvv) / (gvv @ gvv) * gvv
        # The top knot is structurally pinned at zero (admissible Wulff tops
        # are flat, so minimizers meet the apex with r = 0), and interior
        # zero radii with outward gradients stay pinned.
        pinned = (rho == 0.0) & (proj[:-1] > 0.0)
        pinned[-1] = True
        proj[:-1][pinned] = 0.0
        proj_norm = float(np.max(np.abs(proj)))

        d = np.concatenate([proj[:-1] / h, [proj[-1] / h_T]])
        d[:-1][pinned] = 0.0

        x = np.concatenate([rho, [t_top]])
        if prev_x is not None:
            dx = x - prev_x
            dd = d - prev_d
            denom = dx @ dd
            if denom > 0:
                bb_step = float(np.clip((dx @ dx) / denom,
                                        opts.step_min, opts.step_max))
            else:
                bb_step = 1.0
        prev_x, prev_d = x, d

        slope = float(proj @ d)
        step = bb_step
        accepted = False
        for _ in range(opts.max_backtracks):
            rho_try = np.maximum(rho - step * d[:-1], 0.0)
            rho_try[-1] = 0.0
            t_try = max(t_top - step * d[-1], 1e-8)
            state, e_try = rescaled(rho_try, t_try)
            if state is not None and e_try <= e_now - opts.armijo * step * max(slope, 0.0):
                rho, t_top = state
                rho, t_top = snapped(rho, t_top)
                accepted = True
                failures = 0
                break
            step *= 0.5
        if not accepted:
            failures += 1

        if iterations % opts.repair_every == 0 or (not accepted and failures == 1):
            prof = to_profile(rho, t_top)
            witness = comp.find_nonconvexity(prof, epsilon=0.5 * t_top)
            if witness is not None:
                try:
                    repaired = comp.apply_competitor(
                        prof, witness[0], witness[1], tension, omega
                    )
                    t_new = repaired.t_max
                    rho_new = np.interp(xi * t_new, repaired.knots,
                                        repaired.r) ** nm1
                    rho_new[-1] = 0.0
                    state, e_try = rescaled(rho_new, t_new)
                    if state is not None and e_try < e_now:
                        rho, t_top = state
                        repairs += 1
                        accepted = True
                        failures = 0
                except comp.CompetitorFailure:
                    pass

        if iterations % opts.polish_every == 0 or not accepted:
            rho, t_top = t_polish(rho, t_top, fn.energy(rho, t_top)[0])
            rho, t_top = snapped(rho, t_top)

        if len(energy_hist) > opts.sweep:
            drop = energy_hist[-opts.sweep - 1] - energy_hist[-1]
            scale = 1.0 + abs(energy_hist[-1])
            if drop < opts.tol_energy * scale and proj_norm < opts.tol_grad:
                converged = True
                break
        if not accepted and proj_norm < opts.tol_grad:
            converged = True
            break
        if failures >= 4:
            break

    final = to_profile(rho, t_top)
    # The iterate satisfies the constraint exactly in the slice-measure
    # representation; rescale once so the returned radial profile does too.
    vol_r = reduced_volume(final)
    final = Profile(knots=final.knots, r=final.r * (m / vol_r) ** (1.0 / nm1),
                    tension=tension, body=body, omega=omega)
    diag = {
        "iterations": iterations,
        "converged": converged,
        "energy": reduced_energy(final).total,
        "volume": reduced_volume(final),
        "projected_grad": proj_norm,
        "repairs": repairs,
        "lambda_est": lambda_estimate(final),
        "young_residual": young_residual(final),
    }
    final = Profile(knots=final.knots, r=final.r, tension=tension, body=body,
                    omega=omega, meta=diag)
    if not converged and opts.raise_on_failure:
        raise NonConvergence(
            f"descent did not converge in {opts.max_iter} iterations "
            f"(projected gradient {proj_norm:.3e})",
            state=final,
        )
    return final


def _d22_at_zero(tension, lam: float) -> float:
    """Finite-difference d22phi(lam, 0) for the flat-slope cells."""
    d = 1e-5
    v = tension.phi.value
    return float((v(lam, d) - 2.0 * v(lam, 0.0) + v(lam, -d)) / (d * d))
