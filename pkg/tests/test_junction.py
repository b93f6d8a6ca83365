from __future__ import annotations

import math

import pytest
from hypothesis import given, settings, strategies as st
from shapely import affinity
from shapely.geometry import LineString

from streetgen.junction import (
    CornerStatus, border_points, corner_arc, corner_center, detect_misplaced, solve_junction,
)
from streetgen.network import RoadAxis, build_topology

A1 = LineString([(0, 0), (20, 0)])
A2 = LineString([(0, 0), (0, 20)])


def test_perpendicular_center():
    sol = corner_center(A1, 4, A2, 3, 2, (0, 0))
    assert sol.status is CornerStatus.OK
    assert sol.center == pytest.approx((5, 6), abs=1e-9)


def test_contained_buffer_no_center():
    inner = LineString([(0, 0), (5, 0.5)])
    assert corner_center(A1, 8, inner, 1, 2, (0, 0)).status is CornerStatus.NO_CENTER


def test_symmetric_case_and_swap():
    sol = corner_center(A1, 3, A2, 3, 2, (0, 0))
    assert sol.center == pytest.approx((5, 5), abs=1e-9)
    sw = corner_center(A2, 3, A1, 3, 2, (0, 0))
    assert math.dist(sol.center, sw.center) <= 1e-9


def test_corner_arc_tangents():
    sol = corner_arc(corner_center(A1, 4, A2, 3, 2, (0, 0)), (0, 0))
    t1, t2 = sol.tangents
    assert t1 == pytest.approx((5, 4), abs=1e-9)
    assert t2 == pytest.approx((3, 6), abs=1e-9)
    assert sol.arc.sweep == pytest.approx(math.pi / 2)
    for p in (sol.arc.start_point, sol.arc.end_point):
        assert abs(math.dist(p, sol.center) - 2) <= 1e-3
    # the arc bulges toward the junction
    mid = sol.arc.point_at(sol.arc.mid_angle)
    assert math.dist(mid, (0, 0)) < math.dist(sol.center, (0, 0))


def test_flat_angle_no_center():
    sol = corner_center(A1, 3, LineString([(0, 0), (-20, 0)]), 3, 2, (0, 0))
    assert sol.status is CornerStatus.NO_CENTER
    assert corner_arc(sol).arc is None


def test_misplaced_nominal_unchanged():
    sol = corner_arc(corner_center(A1, 4, A2, 3, 2, (0, 0)), (0, 0))
    assert detect_misplaced(sol, (0, 0)) == sol


def test_misplaced_sliver():
    a2 = LineString([(0, 0), (200, 10)])
    a1 = LineString([(0, 0), (200, 0)])
    sol = corner_arc(corner_center(a1, 1, a2, 1, 2, (0, 0)), (0, 0))
    assert sol.status is CornerStatus.OK
    # the arc lies far beyond ten times (w + r) from the junction
    assert math.dist(sol.tangents[0], (0, 0)) > 10 * 3
    out = detect_misplaced(sol, (0, 0))
    assert out.status is CornerStatus.MISPLACED and out.radius == 0.15


def test_misplaced_boundary_strict():
    sol = corner_arc(corner_center(A1, 4, A2, 3, 2, (0, 0)), (0, 0))
    # distance from the arc to jc: |(5,6)| - 2
    d = math.hypot(5, 6) - 2
    factor = d / (4 + 2)
    assert detect_misplaced(sol, (0, 0), factor=factor).status is CornerStatus.OK
    assert detect_misplaced(sol, (0, 0), factor=factor * 0.999).status is CornerStatus.MISPLACED


def test_border_points_perpendicular():
    sol = corner_center(A1, 4, A2, 3, 2, (0, 0), edges=("a", "b"))
    bp = border_points("n", (0, 0), {"a": A1, "b": A2}, {"a": 4, "b": 3}, [sol])
    assert bp["a"].s == pytest.approx(5) and bp["a"].point == pytest.approx((5, 0))
    assert bp["b"].s == pytest.approx(6) and bp["b"].point == pytest.approx((0, 6))


def test_border_keeps_farthest():
    class Fake:
        def __init__(self, s):
            self.center, self.abscissae, self.edges = (0, 0), (s, 1.0), ("a", "b")
    bp = border_points("n", (0, 0), {"a": A1, "b": A2}, {"a": 1, "b": 1}, [Fake(3.0), Fake(5.0)])
    assert bp["a"].s == 5.0 and len(bp) == 2


def test_symmetric_cross_equal_borders():
    topo = build_topology([RoadAxis("h", LineString([(-30, 0), (30, 0)]), 3),
                           RoadAxis("v", LineString([(0, -30), (0, 30)]), 3)])
    node = next(n for n in topo.nodes if topo.degree(n) == 4)
    js = solve_junction(topo, node)
    ss = [b.s for b in js.borders.values()]
    assert len(ss) == 4 and max(ss) - min(ss) < 1e-9
    assert all(c.status is CornerStatus.OK for c in js.corners)
    for c in js.corners:
        for a, w in zip(c.axes, c.half_widths):
            assert abs(a.distance(_pt(c.center)) - (w + c.radius)) <= 1e-3


@settings(max_examples=40, deadline=None)
@given(
    st.floats(math.radians(20), math.radians(160)),
    st.floats(0.5, 5), st.floats(0.5, 5), st.floats(0.2, 8),
    st.floats(-100, 100), st.floats(-100, 100), st.floats(0, 2 * math.pi),
)
def test_corner_invariants(theta, w1, w2, r, tx, ty, rot):
    a1 = LineString([(0, 0), (400, 0)])
    a2 = LineString([(0, 0), (400 * math.cos(theta), 400 * math.sin(theta))])
    sol = corner_center(a1, w1, a2, w2, r, (0, 0))
    assert sol.status is CornerStatus.OK
    assert abs(a1.distance(_pt(sol.center)) - (w1 + r)) <= 1e-3
    assert abs(a2.distance(_pt(sol.center)) - (w2 + r)) <= 1e-3
    sw = corner_center(a2, w2, a1, w1, r, (0, 0))
    assert math.dist(sw.center, sol.center) <= 1e-9

    def move(g):
        return affinity.translate(affinity.rotate(g, rot, origin=(0, 0), use_radians=True), tx, ty)
    moved = corner_center(move(a1), w1, move(a2), w2, r, (tx, ty))
    expect = move(_pt(sol.center))
    assert math.dist(moved.center, (expect.x, expect.y)) <= 1e-6
    assert moved.abscissae == pytest.approx(sol.abscissae, abs=1e-6)


def _pt(p):
    from shapely.geometry import Point
    return Point(p)
