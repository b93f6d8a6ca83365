"""Corner arcs and border points at junction nodes.

A corner circle of radius ``r`` between two axes sits at distance
``w_i + r`` from each axis, i.e. on the boundary of both enlarged buffers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from shapely.geometry import LineString

from . import geom
from .errors import InternalInconsistency
from .geom import CircleArc, Orientation, Point2
from .kinematics import MIN_RADIUS, RadiusEstimate, clamp_radius_to_network, estimate_radius
from .network import Topology
from .settings import DEFAULT_SETTINGS, Settings

_END_EPS = 1e-6


class CornerStatus(str, Enum):
    OK = "Ok"
    NO_CENTER = "NoCenter"
    MISPLACED = "Misplaced->MinRadius"


@dataclass(frozen=True)
class CornerSolution:
    edges: tuple[str, str]
    axes: tuple[LineString, LineString]  # oriented away from the junction
    half_widths: tuple[float, float]
    radius: float
    status: CornerStatus
    center: Point2 | None = None
    abscissae: tuple[float, float] | None = None
    arc: CircleArc | None = None
    tangents: tuple[Point2, Point2] | None = None

    @property
    def has_arc(self) -> bool:
        return self.arc is not None


@dataclass(frozen=True)
class BorderPoint:
    edge_id: str
    node_id: str
    s: float
    point: Point2
    fallback: bool = False


@dataclass(frozen=True)
class JunctionSolution:
    node_id: str
    center: Point2
    corners: tuple[CornerSolution, ...]
    borders: dict[str, BorderPoint]
    diagnostics: tuple[str, ...] = field(default=())


def _orient_from(line: LineString, jc: Point2) -> LineString:
    c = line.coords
    if math.dist(c[-1][:2], jc) < math.dist(c[0][:2], jc):
        return LineString(c[::-1])
    return line


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _initial_direction(line: LineString) -> tuple[float, float]:
    (x0, y0), (x1, y1) = line.coords[0][:2], line.coords[1][:2]
    n = math.hypot(x1 - x0, y1 - y0)
    return ((x1 - x0) / n, (y1 - y0) / n)


def _proj(c: list[tuple[float, float]], p) -> tuple[Point2, float, float]:
    """Closest point on a small polyline, in plain Python (hot path)."""
    px, py = float(p[0]), float(p[1])
    best = None
    s0 = 0.0
    for (ax, ay), (bx, by) in zip(c[:-1], c[1:]):
        dx, dy = bx - ax, by - ay
        l2 = dx * dx + dy * dy
        t = 0.0 if l2 == 0 else min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / l2))
        qx, qy = ax + dx * t, ay + dy * t
        d = math.hypot(px - qx, py - qy)
        seg = math.sqrt(l2)
        if best is None or d < best[1]:
            best = ((qx, qy), d, s0 + t * seg)
        s0 += seg
    return best


def _refine(c: np.ndarray, axes, targets, iters: int = 30) -> np.ndarray | None:
    """Newton iteration on (dist(c, a_i) - d_i) = 0."""
    x, y = float(c[0]), float(c[1])
    for _ in range(iters):
        (q1, e1, _), (q2, e2, _) = _proj(axes[0], (x, y)), _proj(axes[1], (x, y))
        if e1 == 0 or e2 == 0:
            return None
        f1, f2 = e1 - targets[0], e2 - targets[1]
        if max(abs(f1), abs(f2)) < 1e-12:
            break
        j11, j12 = (x - q1[0]) / e1, (y - q1[1]) / e1
        j21, j22 = (x - q2[0]) / e2, (y - q2[1]) / e2
        det = j11 * j22 - j12 * j21
        if abs(det) < 1e-12:
            return None
        x -= (j22 * f1 - j12 * f2) / det
        y -= (-j21 * f1 + j11 * f2) / det
    return np.array([x, y])


def _candidates(b1, b2) -> list[Point2]:
    inter = b1.boundary.intersection(b2.boundary)
    out: list[Point2] = []
    stack = [inter]
    while stack:
        g = stack.pop()
        if g.is_empty:
            continue
        if hasattr(g, "geoms"):
            stack.extend(g.geoms)
        elif g.geom_type == "Point":
            out.append((g.x, g.y))
        else:  # overlapping boundary pieces: keep every vertex
            out.extend(c[:2] for c in g.coords)
    return out


def corner_center(a1: LineString, w1: float, a2: LineString, w2: float, r: float, jc: Point2,
                  edges: tuple[str, str] = ("a1", "a2"),
                  tol: float = geom.ARC_TOLERANCE) -> CornerSolution:
    """Corner circle centre between two axes meeting at ``jc``."""
    jc = geom.xy(jc)
    a1, a2 = _orient_from(a1, jc), _orient_from(a2, jc)
    base = CornerSolution(edges, (a1, a2), (w1, w2), r, CornerStatus.NO_CENTER)
    d1, d2 = w1 + r, w2 + r
    b1, b2 = geom.buffer(a1, d1, tol), geom.buffer(a2, d2, tol)
    L1, L2 = a1.length, a2.length
    u1, u2 = _initial_direction(a1), _initial_direction(a2)
    turn = _cross(u1, u2)
    if abs(turn) < 1e-12:
        return base  # flat or folded pair: boundaries are parallel at the junction
    found: list[tuple[float, Point2, tuple[float, float]]] = []
    c1 = [tuple(xy[:2]) for xy in a1.coords]
    c2 = [tuple(xy[:2]) for xy in a2.coords]
    for p in _candidates(b1, b2):
        if _proj(c1, p)[2] <= _END_EPS and _proj(c2, p)[2] <= _END_EPS:
            continue  # shared cap around the junction: rejected after refinement anyway
        c = _refine(np.asarray(p, dtype=float), (c1, c2), (d1, d2))
        if c is None:
            continue
        _, e1, s1 = _proj(c1, c)
        _, e2, s2 = _proj(c2, c)
        if abs(e1 - d1) > 1e-6 or abs(e2 - d2) > 1e-6:
            continue
        if s1 >= L1 - _END_EPS or s2 >= L2 - _END_EPS or (s1 <= _END_EPS and s2 <= _END_EPS):
            continue
        pt = (float(c[0]), float(c[1]))
        rel = (pt[0] - jc[0], pt[1] - jc[1])
        if _cross(u1, rel) * turn <= 0 or _cross(u2, rel) * turn >= 0:
            continue  # outside the convex cone between the two axes
        if any(math.dist(pt, q) < 1e-7 for _, q, _ in found):
            continue
        found.append((math.dist(pt, jc), pt, (s1, s2)))
    if not found:
        return base
    dmin = min(f[0] for f in found)
    best = min((f for f in found if f[0] <= dmin + 1e-9), key=lambda f: f[1])
    return replace(base, status=CornerStatus.OK, center=best[1], abscissae=best[2])


def _arc_distance(arc: CircleArc, p: Point2) -> float:
    ang = math.atan2(p[1] - arc.center[1], p[0] - arc.center[0])
    if arc.orientation is Orientation.CCW:
        within = (ang - arc.start_angle) % (2 * math.pi) <= arc.sweep
    else:
        within = (arc.start_angle - ang) % (2 * math.pi) <= arc.sweep
    if within:
        return abs(math.dist(arc.center, p) - arc.radius)
    return min(math.dist(arc.start_point, p), math.dist(arc.end_point, p))


def corner_arc(sol: CornerSolution, jc: Point2 | None = None) -> CornerSolution:
    """Attach tangent points and the arc facing the junction."""
    if sol.status is CornerStatus.NO_CENTER or sol.center is None:
        return sol
    c = sol.center
    tangents = []
    for a, w in zip(sol.axes, sol.half_widths):
        q, d, _ = geom.project(a, c)
        t = (q[0] + w * (c[0] - q[0]) / d, q[1] + w * (c[1] - q[1]) / d)
        if abs(math.dist(t, c) - sol.radius) > 1e-3:
            raise InternalInconsistency(
                f"tangent point {t} at {math.dist(t, c):.6f} from centre, expected {sol.radius}")
        tangents.append(t)
    ref = geom.xy(jc) if jc is not None else sol.axes[0].coords[0][:2]
    best = None
    for orient in (Orientation.CCW, Orientation.CW):
        arc = CircleArc.from_points(c, tangents[0], tangents[1], sol.radius, orient)
        dist = math.dist(arc.point_at(arc.mid_angle), ref)
        if best is None or dist < best[0] - 1e-12:
            best = (dist, arc)
    return replace(sol, arc=best[1], tangents=(tangents[0], tangents[1]))


def detect_misplaced(sol: CornerSolution, jc: Point2, factor: float = 1.5,
                     tol: float = geom.ARC_TOLERANCE) -> CornerSolution:
    """Recompute at the minimum radius when the arc lies far from the junction."""
    if sol.arc is None:
        return sol
    threshold = factor * (max(sol.half_widths) + sol.radius)
    if not _arc_distance(sol.arc, geom.xy(jc)) > threshold:
        return sol
    (a1, a2), (w1, w2) = sol.axes, sol.half_widths
    redo = corner_center(a1, w1, a2, w2, MIN_RADIUS, jc, sol.edges, tol)
    if redo.status is CornerStatus.OK:
        redo = replace(corner_arc(redo, jc), status=CornerStatus.MISPLACED)
    return redo


def border_points(node_id: str, center: Point2, incident: dict[str, LineString],
                  half_widths: dict[str, float], corners,
                  max_fraction: float = 1.0) -> dict[str, BorderPoint]:
    """One border per incident edge: the farthest projected corner centre.

    ``incident`` maps edge ids to axes oriented away from the node.
    """
    cand: dict[str, float] = {}
    for sol in corners:
        if sol.center is None or sol.abscissae is None:
            continue
        for eid, s in zip(sol.edges, sol.abscissae):
            cand[eid] = max(cand.get(eid, 0.0), s)
    fallback_s = max(half_widths[e] for e in incident) if incident else 0.0
    out = {}
    for eid in sorted(incident):
        line = incident[eid]
        L = line.length
        s = cand.get(eid)
        fb = s is None
        if fb:
            s = fallback_s
        s = min(s, max_fraction * L)
        s = max(s, min(1e-3, 0.5 * L))
        out[eid] = BorderPoint(eid, node_id, s, geom.interpolate(line, s), fb)
    return out


def solve_junction(topo: Topology, node_id: str,
                   settings: Settings = DEFAULT_SETTINGS) -> JunctionSolution:
    """Corners and borders at a node; dead ends get a single fallback border."""
    jn = topo.junction(node_id)
    tol = settings["geom.arc_tolerance"]
    frac = settings["junction.max_border_fraction"]
    factor = settings["junction.misplaced_factor"]
    loops = sorted({ie.edge_id for ie in jn.incident
                    if topo.edges[ie.edge_id].start == topo.edges[ie.edge_id].end})
    inc = tuple(ie for ie in jn.incident if ie.edge_id not in loops)
    axes = {ie.edge_id: ie.geometry for ie in inc}
    hw = {ie.edge_id: topo.axis_of(ie.edge_id).half_width for ie in inc}
    if len(inc) < 2:  # dead end: only the fallback border
        borders = border_points(node_id, jn.center, axes, hw, (), frac)
        return JunctionSolution(node_id, jn.center, (), borders,
                                tuple(f"{node_id}: loop edge {e} has no border" for e in loops))
    pairs = [(0, 1)] if len(inc) == 2 else [(k, (k + 1) % len(inc)) for k in range(len(inc))]
    corners = []
    diags = [f"{node_id}: loop edge {e} has no border" for e in loops]
    for i, j in pairs:
        e1, e2 = inc[i].edge_id, inc[j].edge_id
        ax1, ax2 = topo.axis_of(e1), topo.axis_of(e2)
        est = [estimate_radius(a.importance, a.avg_speed, a.width, settings) for a in (ax1, ax2)]
        r0 = min(est, key=lambda e: e.radius)
        g1, g2 = axes[e1], axes[e2]

        memo: dict[float, CornerSolution] = {}

        def center_at(r, g1=g1, g2=g2, e1=e1, e2=e2, memo=memo):
            if r not in memo:
                memo[r] = corner_center(g1, hw[e1], g2, hw[e2], r, jn.center, (e1, e2), tol)
            return memo[r]

        est_c: RadiusEstimate = clamp_radius_to_network(
            r0, (frac * g1.length, frac * g2.length), lambda r: center_at(r).abscissae, settings)
        sol = center_at(est_c.radius)
        if sol.status is CornerStatus.OK:
            sol = detect_misplaced(corner_arc(sol, jn.center), jn.center, factor, tol)
        u1, u2 = _initial_direction(g1), _initial_direction(g2)
        straight = u1[0] * u2[0] + u1[1] * u2[1] < -1.0 + 1e-12
        if sol.status is CornerStatus.NO_CENTER and not straight:
            diags.append(f"{node_id}: no corner centre between {e1} and {e2}")
        elif sol.status is CornerStatus.MISPLACED:
            diags.append(f"{node_id}: misplaced arc between {e1} and {e2}, minimum radius used")
        corners.append(sol)
    borders = border_points(node_id, jn.center, axes, hw, corners, frac)
    return JunctionSolution(node_id, jn.center, tuple(corners), borders, tuple(diags))
