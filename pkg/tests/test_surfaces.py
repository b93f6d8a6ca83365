from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely import affinity
from shapely.geometry import LineString, Point

from oracles import raster_area, variable_buffer_predicate
from streetgen import geom
from streetgen.errors import InvalidParameter
from streetgen.junction import corner_arc, corner_center
from streetgen.network import RoadAxis, build_topology
from streetgen.surfaces import (
    border_line, city_blocks, cut_sections, intersection_surface, scrap, width_transition,
)

AX = LineString([(0, 0), (20, 0)])


def test_border_line_straight():
    bl = border_line(AX, 5, 4)
    (x0, y0), (x1, y1) = bl.coords
    assert x0 == pytest.approx(5) and x1 == pytest.approx(5)
    assert sorted([y0, y1]) == pytest.approx([-4.4, 4.4])
    inter = bl.intersection(geom.buffer(AX, 4).exterior)
    assert len(inter.geoms) == 2


def test_border_line_at_kink():
    kink = LineString([(0, 0), (10, 0), (10, 10)])
    bl = border_line(kink, 10, 2)
    (x0, y0), (x1, y1) = bl.coords
    # chord from (8,0) to (10,2) has direction (1,1)/sqrt2: the border is along (-1,1)
    d = np.array([x1 - x0, y1 - y0]) / math.hypot(x1 - x0, y1 - y0)
    assert abs(abs(d @ np.array([1, 1]) / math.sqrt(2))) < 1e-9


def test_cut_sections_rectangle():
    sec = cut_sections(AX, 4, 5, 5)
    assert not sec.degenerate
    assert sec.polygon.area == pytest.approx(80, abs=80 * 1e-3)
    assert sec.polygon.bounds == pytest.approx((5, -4, 15, 4), abs=1e-9)


def test_cut_sections_near_full():
    full = geom.buffer(AX, 4)
    sec = cut_sections(AX, 4, 1e-4, 1e-4)
    caps = full.area - 20 * 8
    assert sec.polygon.area == pytest.approx(full.area - caps, rel=1e-3)


def test_cut_sections_dead_end_single_line():
    sec = cut_sections(AX, 4, 5, None)
    assert sec.border_lines[1] is None
    cap = scrap(AX, 4, 5)
    assert sec.polygon.area + cap.area == pytest.approx(geom.buffer(AX, 4).area, rel=1e-9)


def test_cut_sections_degenerate():
    sec = cut_sections(AX, 4, 12, 12)
    assert sec.degenerate and sec.polygon.area == pytest.approx(geom.buffer(AX, 4).area)


def _cross_surface(w=4.0, r=2.0, drop=()):
    arms = [LineString([(0, 0), (30 * math.cos(k * math.pi / 2), 30 * math.sin(k * math.pi / 2))])
            for k in range(4)]
    arcs, border = [], {}
    for k in range(4):
        a1, a2 = arms[k], arms[(k + 1) % 4]
        sol = corner_arc(corner_center(a1, w, a2, w, r, (0, 0)), (0, 0))
        if k not in drop:
            arcs.append(sol.arc)
        for i, s in zip((k, (k + 1) % 4), sol.abscissae):
            border[i] = max(border.get(i, 0), s)
    scraps = [scrap(arms[k], w, border[k]) for k in range(4)]
    return intersection_surface("n", (0, 0), scraps, arcs), border


def _cross_oracle(w, r, s):
    c = w + r

    def pred(X, Y):
        ax, ay = np.abs(X), np.abs(Y)
        arms = ((ay <= w) & (ax <= s)) | ((ax <= w) & (ay <= s))
        fillet = (ax >= w) & (ax <= c) & (ay >= w) & (ay <= c) & (np.hypot(ax - c, ay - c) >= r)
        return arms | fillet
    return pred


def test_intersection_cross_matches_raster():
    surf, border = _cross_surface()
    assert all(s == pytest.approx(6) for s in border.values())
    expected = raster_area(_cross_oracle(4, 2, 6), (-7, -7, 7, 7), h=0.05)
    assert surf.polygon.area == pytest.approx(expected, rel=0.01)
    assert surf.polygon.contains(Point(0, 0))
    assert surf.polygon.is_valid and surf.polygon.geom_type == "Polygon"


def test_intersection_missing_arc_still_simple():
    surf, _ = _cross_surface(drop=(1,))
    assert surf.polygon.is_valid and surf.polygon.geom_type == "Polygon"
    assert surf.polygon.contains(Point(0, 0))


def test_intersection_dead_end_is_scrap():
    cap = scrap(AX, 4, 4)
    surf = intersection_surface("n", (0, 0), [cap], [])
    assert surf.polygon.symmetric_difference(cap).area < 1e-9


@settings(max_examples=15, deadline=None)
@given(st.floats(-200, 200), st.floats(-200, 200), st.floats(0, 2 * math.pi))
def test_intersection_rigid_motion(tx, ty, rot):
    base, _ = _cross_surface()
    w, r = 4.0, 2.0
    arms = [affinity.translate(affinity.rotate(
        LineString([(0, 0), (30 * math.cos(k * math.pi / 2), 30 * math.sin(k * math.pi / 2))]),
        rot, origin=(0, 0), use_radians=True), tx, ty) for k in range(4)]
    arcs, border = [], {}
    for k in range(4):
        sol = corner_arc(corner_center(arms[k], w, arms[(k + 1) % 4], w, r, (tx, ty)), (tx, ty))
        arcs.append(sol.arc)
        for i, s in zip((k, (k + 1) % 4), sol.abscissae):
            border[i] = max(border.get(i, 0), s)
    moved = intersection_surface("n", (tx, ty), [scrap(arms[k], w, border[k]) for k in range(4)], arcs)
    expect = affinity.translate(affinity.rotate(base.polygon, rot, origin=(0, 0), use_radians=True), tx, ty)
    assert moved.polygon.area == pytest.approx(base.polygon.area, rel=1e-6)
    assert moved.polygon.symmetric_difference(expect).area < 1e-3 * base.polygon.area


def test_width_transition_symmetric_raster():
    axis = LineString([(0, 0), (10, 0)])
    poly = width_transition(axis, 2, 4, "symmetric", length=10)
    expected = raster_area(variable_buffer_predicate([(0, 0), (10, 0)], [2, 4]), (-5, -5, 15, 5))
    assert poly.area == pytest.approx(expected, rel=0.01)


def test_width_transition_equal_is_buffer():
    axis = LineString([(0, 0), (10, 0)])
    assert width_transition(axis, 3, 3).symmetric_difference(geom.buffer(axis, 3)).area < 1e-9


def test_width_transition_length_checked():
    with pytest.raises(InvalidParameter):
        width_transition(LineString([(0, 0), (10, 0)]), 2, 4, length=11)


@pytest.mark.parametrize("mode,held", [("right", 2.0), ("left", -2.0)])
def test_width_transition_held_side(mode, held):
    axis = LineString([(0, 0), (40, 0)])
    poly = width_transition(axis, 2, 4, mode, length=8)
    # the held boundary stays on the line y = held over the body of the road
    probe = LineString([(1, held), (39, held)])
    assert poly.exterior.distance(Point(20, held)) < 1e-6
    assert probe.difference(poly.buffer(1e-6)).length < 1e-6
    beyond = 1.0 if held > 0 else -1.0
    assert not poly.contains(Point(20, held + beyond * 0.01))
    # the flared side reaches 2*w_end - w_start after the window
    far = -held / abs(held) * (2 * 4 - 2)
    assert poly.exterior.distance(Point(30, far)) < 1e-6


def test_city_block_square():
    sq = [(0, 0), (100, 0), (100, 100), (0, 100)]
    axes = [RoadAxis(str(i), LineString([sq[i], sq[(i + 1) % 4]]), 4) for i in range(4)]
    topo = build_topology(axes)
    (fid,) = [f for f, face in topo.faces.items() if not face.universal]
    assert city_blocks(topo, [])[fid].polygon.area == pytest.approx(10000)
    surfaces = [geom.buffer(e.geometry, 4) for e in topo.edges.values()]
    blk = city_blocks(topo, surfaces)[fid].polygon
    assert blk.area == pytest.approx(92 * 92, rel=1e-9)
    for s in surfaces:
        assert blk.intersection(s).area < 1e-6
    assert all(fid != "F_universal" for fid in city_blocks(topo, surfaces))
