from __future__ import annotations

import math

import numpy as np
import pytest
from shapely.geometry import LineString

from streetgen.errors import SingularSpeed
from streetgen.junction import corner_center
from streetgen.kinematics import (
    RadiusEstimate, RadiusSource, clamp_radius_to_network, guess_radius, setra_radius,
)
from streetgen.settings import Settings


@pytest.mark.parametrize("imp,r", [("Major", 7.6), ("Medium", 4.9), ("Residential", 3.0)])
def test_guess_radius(imp, r):
    est = guess_radius(imp)
    assert est.radius == r and est.source is RadiusSource.GUESS


def test_guess_radius_overridable():
    s = Settings({"radius.by_importance.Major": 9.0})
    assert guess_radius("Major", s).radius == 9.0


def test_setra_values():
    assert setra_radius(50, 3.5).radius == pytest.approx(18.6)
    assert setra_radius(30, 5.0).radius == pytest.approx(18.6 * math.sqrt(30 / 85))
    assert setra_radius(30, 5.0).radius == pytest.approx(11.05, abs=0.01)
    with pytest.raises(SingularSpeed):
        setra_radius(100, 3.5)


def test_setra_monotone_in_speed():
    for w in (2.0, 3.5, 7.0):
        pole = 10 * w + 65
        speeds = np.linspace(0.5, pole - 0.5, 200)
        raw = [18.6 * math.sqrt(v / (pole - v)) for v in speeds]
        assert all(b > a for a, b in zip(raw, raw[1:]))
        clamped = Settings({"radius.max": 1000.0})
        vals = [setra_radius(v, w, clamped).radius for v in speeds]
        assert all(b > a for a, b in zip(vals, vals[1:]))


def test_radii_floor():
    s = Settings({"radius.max": 1000.0})
    assert setra_radius(0.001, 50.0, s).radius >= 0.15


def _perp(L, w):
    a1 = LineString([(0, 0), (L, 0)])
    a2 = LineString([(0, 0), (0, L)])
    return lambda r: corner_center(a1, w, a2, w, r, (0, 0)).abscissae


def test_clamp_feasible_unchanged():
    est = RadiusEstimate(3.0, RadiusSource.GUESS)
    out = clamp_radius_to_network(est, (50, 50), _perp(50, 1.0))
    assert out == est


def test_clamp_short_axes_matches_scan():
    w, L = 1.0, 4.0
    out = clamp_radius_to_network(RadiusEstimate(7.6, RadiusSource.GUESS), (L, L), _perp(L, w))
    # oracle: for perpendicular axes the centre projects at s = w + r
    grid = np.arange(0.15, 7.6, 0.001)
    r_star = grid[(w + grid) < L].max()
    assert out.source is RadiusSource.CLAMPED_MAX_FEASIBLE
    assert r_star - 0.011 <= out.radius <= r_star + 1e-9
    assert _perp(L, w)(out.radius)[0] <= L


def test_clamp_degenerate_min():
    out = clamp_radius_to_network(RadiusEstimate(3.0, RadiusSource.GUESS), (1, 1), _perp(1, 1.0))
    assert out.radius == 0.15 and out.source is RadiusSource.CLAMPED_MIN


def test_clamp_idempotent():
    f = _perp(4.0, 1.0)
    once = clamp_radius_to_network(RadiusEstimate(7.6, RadiusSource.GUESS), (4, 4), f)
    assert clamp_radius_to_network(once, (4, 4), f) == once
    lo = clamp_radius_to_network(RadiusEstimate(7.6, RadiusSource.GUESS), (1, 1), _perp(1, 1.0))
    assert clamp_radius_to_network(lo, (1, 1), _perp(1, 1.0)) == lo
