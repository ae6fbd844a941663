import math

import numpy as np
import pytest

from wulffdrop import reduced, sets
from wulffdrop.errors import EmptySlice, IndexOutOfRange, OmegaOutOfRange
from wulffdrop.tension import make_tension
from wulffdrop.wulff import build_wulff_body


def cylinder(body, tension, radius, height):
    return sets.sliced_set(body.geometry, [0.0, height],
                           [radius, radius], np.zeros((2, 2)), tension)


def test_volume_cylinder(euclid, euclid_body):
    s = cylinder(euclid_body, euclid, 1.0, 2.0)
    assert sets.volume(s) == pytest.approx(2.0 * euclid_body.area, rel=1e-14)


def test_volume_cone(euclid, euclid_body):
    s = sets.sliced_set(euclid_body.geometry, [0.0, 3.0], [1.0, 0.0],
                        np.zeros((2, 2)), euclid)
    # int_0^3 (1 - t/3)^2 |S| dt = |S| (shape of pi for the exact disk).
    assert sets.volume(s) == pytest.approx(euclid_body.area, rel=1e-14)


def test_volume_empty(euclid, euclid_body):
    s = sets.sliced_set(euclid_body.geometry, [0.0, 1.0], [0.0, 0.0],
                        np.zeros((2, 2)), euclid)
    assert sets.volume(s) == 0.0


def test_energy_cylinder_closed_form(euclid, euclid_body):
    r, height, omega = 0.7, 1.3, -0.5
    s = cylinder(euclid_body, euclid, r, height)
    br = sets.energy(s, euclid, omega)
    area, perim = euclid_body.area, euclid_body.aniso_perimeter
    expected = (area * r * r * (omega + 1.0)
                + r * perim * height
                + area * r * r * height**2 / 2.0)
    assert br.total == pytest.approx(expected, rel=1e-14)


def test_energy_omega_validation(euclid, euclid_body):
    s = cylinder(euclid_body, euclid, 1.0, 1.0)
    with pytest.raises(OmegaOutOfRange):
        sets.energy(s, euclid, 1.5)


def test_energy_matches_reduced_parametrization(euclid, euclid_body):
    # A symmetric set and its radial profile are two parametrizations of
    # the same drop; for bases on the support planes the energies coincide.
    rng = np.random.default_rng(4)
    knots = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 0.4, 6))])
    scales = rng.uniform(0.2, 1.2, 7)
    s = sets.sliced_set(euclid_body.geometry, knots, scales,
                        np.zeros((7, 2)), euclid)
    prof = reduced.Profile(knots=knots, r=scales, tension=euclid,
                           body=euclid_body, omega=-0.4)
    assert sets.energy(s, euclid, -0.4).total == pytest.approx(
        reduced.reduced_energy(prof).total, rel=1e-12)


def test_energy_nonnegative_random(euclid):
    rng = np.random.default_rng(11)
    for _ in range(50):
        s = sets.random_sliced_set(rng, euclid)
        for omega in (-0.8, -0.3, 0.0, 0.5):
            assert sets.energy(s, euclid, omega).total >= -1e-9


def test_symmetrize_fixed_point(euclid, euclid_body):
    s = cylinder(euclid_body, euclid, 0.8, 1.0)
    prof = sets.symmetrize(s, euclid_body, omega=-0.5)
    assert np.allclose(prof.r, 0.8, atol=1e-14)
    assert reduced.reduced_energy(prof).total == pytest.approx(
        sets.energy(s, euclid, -0.5).total, rel=1e-12)


def test_symmetrize_scaled_wulff_base_is_equality_case():
    # Square base under h = l_1: the base IS a scaled Wulff body, so the
    # symmetrized drop keeps the energy exactly (beta constant).
    t = make_tension("euclid", h_family="lp", h_p=1.0)
    body = build_wulff_body(t, 1024)
    knots = np.array([0.0, 0.5, 1.1])
    scales = np.array([1.0, 0.8, 0.3])
    s = sets.sliced_set(2.0 * body.geometry, knots, scales,
                        np.zeros((3, 2)), t)
    prof = sets.symmetrize(s, body, omega=-0.3)
    assert np.allclose(prof.r, scales * math.sqrt(s.base_area / body.area))
    assert reduced.reduced_energy(prof).total == pytest.approx(
        sets.energy(s, t, -0.3).total, rel=1e-12)
    assert reduced.reduced_volume(prof) == pytest.approx(sets.volume(s),
                                                         rel=1e-13)


def test_symmetrization_inequality_random(euclid, euclid_body):
    rng = np.random.default_rng(7)
    for _ in range(100):
        s = sets.random_sliced_set(rng, euclid)
        e0 = sets.energy(s, euclid, -0.3).total
        prof = sets.symmetrize(s, euclid_body, omega=-0.3)
        e1 = reduced.reduced_energy(prof).total
        assert e1 <= e0 + 1e-9 * (1.0 + abs(e0))
        assert reduced.reduced_volume(prof) == pytest.approx(
            sets.volume(s), rel=1e-12)


def test_jensen_gap_wulff_base_vanishes(euclid, euclid_body):
    s = sets.sliced_set(euclid_body.geometry, [0.0, 1.0], [1.0, 0.7],
                        np.zeros((2, 2)), euclid)
    assert abs(sets.jensen_gap(s, 0, euclid, euclid_body)) <= 1e-10


def test_jensen_gap_drifting_center_positive(euclid, euclid_body):
    s = sets.sliced_set(euclid_body.geometry, [0.0, 1.0], [1.0, 1.0],
                        [[0.0, 0.0], [0.3, 0.0]], euclid)
    assert sets.jensen_gap(s, 0, euclid, euclid_body) > 1e-4


def test_jensen_gap_square_base_positive(euclid, euclid_body):
    square = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    s = sets.sliced_set(square, [0.0, 1.0], [1.0, 0.7],
                        np.zeros((2, 2)), euclid)
    assert sets.jensen_gap(s, 0, euclid, euclid_body) > 1e-3


def test_jensen_gap_index_validation(euclid, euclid_body):
    s = cylinder(euclid_body, euclid, 1.0, 1.0)
    with pytest.raises(IndexOutOfRange):
        sets.jensen_gap(s, 5, euclid, euclid_body)


def test_fubini_consistency(euclid, euclid_body):
    rng = np.random.default_rng(9)
    knots = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.2, 20))])
    scales = rng.uniform(0.2, 1.0, 21)
    s = sets.sliced_set(euclid_body.geometry, knots, scales,
                        np.zeros((21, 2)), euclid)
    fp = sets.energy(s, euclid, 0.0).Fp
    # Midpoint x slab volume approximates Fp to O(dt^2).
    mids = 0.5 * (knots[:-1] + knots[1:])
    slab_vol = np.array([
        sets.volume(sets.sliced_set(euclid_body.geometry,
                                    [0.0, knots[i + 1] - knots[i]],
                                    scales[i:i + 2], np.zeros((2, 2)), euclid))
        for i in range(20)
    ])
    approx = float(np.sum(mids * slab_vol))
    assert fp == pytest.approx(approx, abs=5e-3 * abs(fp))
    # Gauss evaluation of the same slab integrals is exact for polynomials;
    # compare against an independent dense-trapezoid evaluation.
    tt = np.linspace(0, knots[-1], 200001)
    aa = np.interp(tt, knots, scales)
    dense = euclid_body.area * np.trapezoid(tt * aa**2, tt)
    assert fp == pytest.approx(dense, rel=1e-8)


def test_lateral_quadrature_convergence(euclid, euclid_body):
    # Doubling the Gauss order leaves Fs unchanged to 1e-9 (the per-edge
    # integrand is polynomial in t within a slab).
    rng = np.random.default_rng(13)
    s = sets.random_sliced_set(rng, euclid)
    fs8 = sets.energy(s, euclid, 0.0).Fs
    x16, w16 = np.polynomial.legendre.leggauss(16)
    x16 = 0.5 * (x16 + 1.0)
    w16 = 0.5 * w16
    n = s.d
    dt = np.diff(s.knots)
    wsp = sets._edge_speeds(s)
    phi_edges = euclid.phi.value(s.edge_h[None, :], -wsp)
    a_g = s.scales[:-1, None] + np.diff(s.scales)[:, None] * x16[None, :]
    coef = (s.edge_lengths[None, :] ** (n - 1) * phi_edges).sum(axis=1)
    fs16 = float(np.sum(dt * (coef[:, None] * a_g ** (n - 1) * w16[None, :]).sum(axis=1)))
    if s.scales[-1] > 0:
        fs16 += euclid.f_eN * s.scales[-1] ** n * s.base_area
    assert fs8 == pytest.approx(fs16, abs=1e-9)


def test_barycenter_constant_and_linear(euclid, euclid_body):
    s = sets.sliced_set(euclid_body.geometry, [0.0, 1.0], [1.0, 0.5],
                        [[1.0, 2.0], [1.0, 2.0]], euclid)
    _, drift = sets.barycenter_path(s, euclid_body)
    assert drift <= 1e-12
    s2 = sets.sliced_set(euclid_body.geometry, [0.0, 1.0], [1.0, 1.0],
                         [[0.0, 0.0], [1.0, 0.0]], euclid)
    _, drift2 = sets.barycenter_path(s2, euclid_body)
    assert drift2 == pytest.approx(1.0, abs=1e-12)
    s3 = sets.sliced_set(euclid_body.geometry, [0.0, 1.0], [1.0, 0.0],
                         np.zeros((2, 2)), euclid)
    with pytest.raises(EmptySlice):
        sets.barycenter_path(s3, euclid_body)


def test_serialization_roundtrip(euclid):
    rng = np.random.default_rng(21)
    s = sets.random_sliced_set(rng, euclid)
    d = sets.sliced_set_to_dict(s)
    s2 = sets.sliced_set_from_dict(d, euclid)
    assert np.allclose(s.base_vertices, s2.base_vertices)
    assert np.allclose(s.knots, s2.knots)
    assert np.allclose(s.scales, s2.scales)
    assert np.allclose(s.centers, s2.centers)
    assert sets.energy(s, euclid, -0.2).total == pytest.approx(
        sets.energy(s2, euclid, -0.2).total, rel=1e-15)


def test_interval_base_n2():
    t2 = make_tension("euclid", dim=2)
    body = build_wulff_body(t2)
    s = sets.sliced_set(np.array([-1.0, 1.0]), [0.0, 1.0], [1.0, 0.5],
                        np.zeros((2, 1)), t2)
    assert sets.volume(s) == pytest.approx(1.5)
    br = sets.energy(s, t2, -0.5)
    assert br.total >= -1e-9
    prof = sets.symmetrize(s, body, omega=-0.5)
    assert reduced.reduced_volume(prof) == pytest.approx(1.5, rel=1e-12)
    assert reduced.reduced_energy(prof).total <= br.total + 1e-9
