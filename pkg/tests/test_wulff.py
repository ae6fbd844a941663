import math

import numpy as np
import pytest
from scipy.special import gamma

from wulffdrop.errors import DimensionUnsupported
from wulffdrop.tension import make_tension
from wulffdrop.wulff import (
    alpha_volume_table,
    build_wulff_body,
    vertical_extent,
    wulff_alpha,
    wulff_alpha_slope,
    wulff_profile,
)


def test_euclid_body_is_disk(euclid_body):
    assert euclid_body.area == pytest.approx(math.pi, rel=1e-3)
    assert euclid_body.aniso_perimeter == pytest.approx(2 * math.pi, rel=1e-3)
    assert euclid_body.lam == pytest.approx(2.0, abs=1e-12)


def test_l1_body_is_square():
    t = make_tension("euclid", h_family="lp", h_p=1.0)
    body = build_wulff_body(t, 1024)
    assert body.area == pytest.approx(4.0, rel=1e-12)
    assert body.aniso_perimeter == pytest.approx(8.0, rel=1e-12)
    assert body.lam == pytest.approx(2.0, rel=1e-12)


def test_l3_body_area_matches_dual_ball_quadrature():
    # K_h for h = l_3 is the dual l_1.5 ball; its area has a closed Gamma
    # form |{x : |x|_q <= 1}| = (2 Gamma(1 + 1/q))^2 / Gamma(1 + 2/q).
    t = make_tension("euclid", h_family="lp", h_p=3.0)
    body = build_wulff_body(t, 1024)
    q = 1.5
    exact = (2 * gamma(1 + 1 / q)) ** 2 / gamma(1 + 2 / q)
    assert body.area == pytest.approx(exact, rel=1e-3)


def test_edges_lie_on_support_planes(euclid_body):
    assert np.max(np.abs(euclid_body.edge_supports - euclid_body.edge_h)) <= 1e-9


def test_body_is_convex(euclid_body):
    v = euclid_body.geometry
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    assert np.all(cross > -1e-12)


def test_monotone_refinement(euclid):
    areas, perims = [], []
    for m in (128, 256, 512, 1024):
        b = build_wulff_body(euclid, m)
        areas.append(b.area)
        perims.append(b.aniso_perimeter)
    # Cauchy differences shrink by at least 2x per doubling.
    da = np.abs(np.diff(areas))
    dp = np.abs(np.diff(perims))
    assert np.all(da[1:] <= da[:-1] / 2.0)
    assert np.all(dp[1:] <= dp[:-1] / 2.0)


@pytest.mark.parametrize("h_family,kw", [
    ("lp", {"h_p": 2.0}), ("lp", {"h_p": 3.0}), ("l1reg", {"h_eps": 0.05}),
])
def test_lambda_identity_at_4096(h_family, kw):
    t = make_tension("euclid", h_family=h_family, **kw)
    body = build_wulff_body(t, 4096)
    assert abs(body.lam - 2.0) <= 5e-3


def test_dimension_guards(euclid):
    with pytest.raises(ValueError):
        build_wulff_body(euclid, 4)
    t4 = make_tension("euclid", dim=4)
    with pytest.raises(DimensionUnsupported):
        build_wulff_body(t4)


def test_interval_body_n2():
    t = make_tension("euclid", dim=2)
    body = build_wulff_body(t)
    assert body.d == 1
    assert body.area == pytest.approx(2.0)
    assert body.lam == pytest.approx(1.0)


def test_alpha_euclid_closed_form(euclid):
    assert wulff_alpha(euclid, 0.0) == pytest.approx(1.0, abs=1e-9)
    assert wulff_alpha(euclid, 1.0) == 0.0
    assert wulff_alpha(euclid, 1.2) == 0.0
    assert wulff_alpha(euclid, 0.6) == pytest.approx(0.8, abs=1e-9)
    for t in (0.3, 0.9, 0.99, -0.7):
        assert wulff_alpha(euclid, t) == pytest.approx(
            math.sqrt(1 - t * t), abs=1e-8)


def test_alpha_slope_is_envelope_derivative(euclid):
    for t in (0.2, 0.6, -0.4):
        assert wulff_alpha_slope(euclid, t) == pytest.approx(
            -t / math.sqrt(1 - t * t), abs=1e-6)


@pytest.mark.parametrize("name,kw", [
    ("euclid", {}), ("pnorm", {"p": 3.0}), ("weighted", {"c": 2.0}),
])
def test_alpha_concavity_on_support(name, kw):
    t = make_tension(name, **kw)
    prof = wulff_profile(t, 512)
    assert prof.concavity_defect() <= 1e-9


def test_vertical_extent_weighted():
    t = make_tension("weighted", c=2.0)
    lo, hi = vertical_extent(t)
    assert hi == pytest.approx(math.sqrt(2.0))
    assert lo == pytest.approx(-math.sqrt(2.0))


def test_alpha_volume_table_euclid(euclid):
    table = alpha_volume_table(euclid)
    # int_{-1}^{1} (1 - t^2) dt = 4/3 for the unit-ball profile, N = 3.
    assert table.total == pytest.approx(4.0 / 3.0, rel=1e-10)
    exact_above = 4.0 / 3.0 - (0.6 - 0.6**3 / 3.0 + 2.0 / 3.0)
    assert table.above(0.6) == pytest.approx(exact_above, abs=1e-9)
    z = table.invert_cumulative(table.cumulative(0.37))
    assert z == pytest.approx(0.37, abs=1e-9)
