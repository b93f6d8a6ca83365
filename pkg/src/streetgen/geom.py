"""2D geometric primitives: buffers, offsets, booleans, polygonization,
curvilinear referencing, circle fitting, arcs and Bezier curves.

Polylines and polygons are shapely ``LineString`` / ``Polygon`` objects and
points are ``(x, y)`` tuples.  Every function is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import (
    GeometryCollection,
    LinearRing,
    LineString,
    MultiLineString,
    MultiPolygon,
    Point,
    Polygon,
)
from shapely.geometry.polygon import orient
from shapely.ops import linemerge, polygonize, unary_union

from .errors import (
    DegenerateInput,
    EmptyResult,
    InvalidGeometry,
    InvalidParameter,
    NoCircle,
)

Point2 = tuple[float, float]

ARC_TOLERANCE = 0.01
SNAP_GRID = 1e-6
_MAX_QUAD_SEGS = 512


class Orientation(str, Enum):
    CW = "CW"
    CCW = "CCW"


@dataclass(frozen=True)
class CircleArc:
    center: Point2
    radius: float
    start_angle: float
    end_angle: float
    orientation: Orientation = Orientation.CCW

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameter(f"arc radius must be > 0, got {self.radius}")

    @classmethod
    def from_points(cls, center: Point2, start: Point2, end: Point2, radius: float,
                    orientation: Orientation) -> "CircleArc":
        a0 = math.atan2(start[1] - center[1], start[0] - center[0])
        a1 = math.atan2(end[1] - center[1], end[0] - center[0])
        return cls(tuple(center), radius, a0, a1, Orientation(orientation))

    @property
    def sweep(self) -> float:
        """Swept angle in (0, 2*pi]."""
        if self.orientation is Orientation.CCW:
            s = (self.end_angle - self.start_angle) % (2 * math.pi)
        else:
            s = (self.start_angle - self.end_angle) % (2 * math.pi)
        return s if s > 1e-15 else 2 * math.pi

    def point_at(self, angle: float) -> Point2:
        return (self.center[0] + self.radius * math.cos(angle),
                self.center[1] + self.radius * math.sin(angle))

    @property
    def start_point(self) -> Point2:
        return self.point_at(self.start_angle)

    @property
    def end_point(self) -> Point2:
        return self.point_at(self.end_angle)

    @property
    def mid_angle(self) -> float:
        sign = 1.0 if self.orientation is Orientation.CCW else -1.0
        return self.start_angle + sign * self.sweep / 2


@dataclass(frozen=True)
class VariableWidthPolyline:
    vertices: tuple[Point2, ...]
    radii: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if len(self.vertices) != len(self.radii):
            raise InvalidParameter("radii count must equal vertex count")
        if not self.vertices:
            raise InvalidParameter("variable-width polyline needs at least one vertex")
        if any(r < 0 or not math.isfinite(r) for r in self.radii):
            raise InvalidParameter("radii must be finite and >= 0")


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------

def xy(p) -> Point2:
    if isinstance(p, Point):
        return (p.x, p.y)
    return (float(p[0]), float(p[1]))


def quad_segs_for(radius: float, tol: float = ARC_TOLERANCE) -> int:
    """Segments per quarter circle keeping chord sagitta <= tol."""
    if radius <= 0:
        return 1
    if tol >= radius:
        return 1
    theta = 2.0 * math.acos(1.0 - tol / radius)
    return int(min(_MAX_QUAD_SEGS, max(1, math.ceil((math.pi / 2) / theta))))


def polygons_of(geom) -> list[Polygon]:
    """Flatten any geometry to its non-empty polygon parts, oriented CCW."""
    if geom is None or geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [orient(geom, 1.0)] if geom.area > 0 else []
    if isinstance(geom, (MultiPolygon, GeometryCollection)):
        out: list[Polygon] = []
        for g in geom.geoms:
            out.extend(polygons_of(g))
        return out
    return []


def as_polygon(geom) -> Polygon | MultiPolygon:
    parts = polygons_of(geom)
    if not parts:
        return Polygon()
    if len(parts) == 1:
        return parts[0]
    return MultiPolygon(parts)


def _coords(line) -> np.ndarray:
    if isinstance(line, (LineString, LinearRing)):
        return shapely.get_coordinates(line)
    return np.asarray(line, dtype=float)[:, :2]


_SMALL = 64  # below this many vertices plain Python beats numpy call overhead


def _seglens(c: list) -> list[float]:
    return [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(c[:-1], c[1:])]


def line_length(line) -> float:
    c = _coords(line)
    return float(np.hypot(*np.diff(c, axis=0).T).sum())


def make_polyline(points: Sequence[Point2]) -> LineString:
    """Build a polyline dropping consecutive duplicate vertices."""
    pts: list[Point2] = []
    for p in points:
        p = xy(p)
        if not pts or pts[-1] != p:
            pts.append(p)
    if len(pts) < 2:
        raise DegenerateInput("polyline needs two distinct vertices")
    return LineString(pts)


# ---------------------------------------------------------------------------
# buffers and offsets
# ---------------------------------------------------------------------------

def buffer(line, d: float, tol: float = ARC_TOLERANCE) -> Polygon:
    """Region within distance ``d`` of ``line``, round caps and joins."""
    if not d > 0:
        raise InvalidParameter(f"buffer distance must be > 0, got {d}")
    return as_polygon(line.buffer(d, quad_segs=quad_segs_for(d, tol)))


def shrink(poly, d: float, tol: float = ARC_TOLERANCE) -> list[Polygon]:
    """Negative buffer; may vanish or split into several parts."""
    if not d > 0:
        raise InvalidParameter(f"shrink distance must be > 0, got {d}")
    return polygons_of(poly.buffer(-d, quad_segs=quad_segs_for(d, tol)))


def _trapezoid(p0: Point2, p1: Point2, r0: float, r1: float) -> Polygon | None:
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    n = math.hypot(dx, dy)
    if n == 0 or (r0 == 0 and r1 == 0):
        return None
    nx, ny = -dy / n, dx / n
    ring = [
        (p0[0] - nx * r0, p0[1] - ny * r0),
        (p1[0] - nx * r1, p1[1] - ny * r1),
        (p1[0] + nx * r1, p1[1] + ny * r1),
        (p0[0] + nx * r0, p0[1] + ny * r0),
    ]
    poly = Polygon(ring)
    return poly if poly.area > 0 else None


def variable_buffer(vline: VariableWidthPolyline, tol: float = ARC_TOLERANCE):
    """Buffer whose radius varies linearly between vertices.

    Built as the union of one disk per vertex and one isosceles trapezoid
    per segment.
    """
    if not any(r > 0 for r in vline.radii):
        raise DegenerateInput("variable buffer needs at least one positive radius")
    pieces = []
    for p, r in zip(vline.vertices, vline.radii):
        if r > 0:
            pieces.append(Point(p).buffer(r, quad_segs=quad_segs_for(r, tol)))
    for i in range(len(vline.vertices) - 1):
        t = _trapezoid(vline.vertices[i], vline.vertices[i + 1], vline.radii[i], vline.radii[i + 1])
        if t is not None:
            pieces.append(t)
    return as_polygon(unary_union(pieces))


def offset_curve(line: LineString, d: float, tol: float = ARC_TOLERANCE) -> LineString:
    """Curve at signed distance ``d`` (positive = left), same direction."""
    if d == 0:
        return LineString(line.coords)
    out = line.offset_curve(d, quad_segs=quad_segs_for(abs(d), tol), join_style="round")
    if out.is_empty:
        raise EmptyResult(f"offset at {d} vanishes")
    if isinstance(out, MultiLineString):
        merged = linemerge(out)
        if isinstance(merged, MultiLineString):
            merged = max(merged.geoms, key=lambda g: g.length)
        out = merged
    if out.length <= 0:
        raise EmptyResult(f"offset at {d} vanishes")
    return out


# ---------------------------------------------------------------------------
# boolean operations and polygonization
# ---------------------------------------------------------------------------

def _as_geometry_list(x) -> list:
    if x is None:
        return []
    if isinstance(x, (Polygon, MultiPolygon, GeometryCollection)):
        return [x]
    return list(x)


def _snap(geom, grid: float):
    return shapely.set_precision(geom, grid) if grid > 0 else geom


def boolean(a, b, op: str, grid: float = SNAP_GRID) -> list[Polygon]:
    """Regularized union / intersection / difference of two polygon sets."""
    ga, gb = _as_geometry_list(a), _as_geometry_list(b)
    for g in ga + gb:
        if not g.is_valid:
            raise InvalidGeometry(shapely.is_valid_reason(g))
    ua = _snap(unary_union(ga), grid) if ga else Polygon()
    ub = _snap(unary_union(gb), grid) if gb else Polygon()
    if op == "union":
        res = ua.union(ub)
    elif op == "intersection":
        res = ua.intersection(ub)
    elif op == "difference":
        res = ua.difference(ub)
    else:
        raise InvalidParameter(f"unknown boolean op {op!r}")
    return polygons_of(res)


def _linework(parts) -> list:
    lines = []
    for g in parts:
        if g is None or g.is_empty:
            continue
        if isinstance(g, Polygon):
            lines.append(LineString(g.exterior.coords))
            lines.extend(LineString(r.coords) for r in g.interiors)
        elif isinstance(g, LinearRing):
            lines.append(LineString(g.coords))
        elif isinstance(g, LineString):
            lines.append(g)
        elif hasattr(g, "geoms"):
            lines.extend(_linework(g.geoms))
    return lines


def build_area(parts: Iterable, grid: float = SNAP_GRID) -> list[Polygon]:
    """Node all linework and return every enclosed face, largest first."""
    lines = _linework(parts)
    if not lines:
        return []
    noded = unary_union(_snap(MultiLineString(lines), grid))
    faces = [orient(f, 1.0) for f in polygonize(noded) if f.area > 0]
    faces.sort(key=lambda f: (-round(f.area, 9), f.bounds))
    return faces


# ---------------------------------------------------------------------------
# curvilinear referencing
# ---------------------------------------------------------------------------

def _project_coords(c: np.ndarray, p: Point2, s0: float = 0.0):
    a, b = c[:-1], c[1:]
    ab = b - a
    seg_len2 = (ab ** 2).sum(axis=1)
    seg_len = np.sqrt(seg_len2)
    ap = np.asarray(p, dtype=float) - a
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(seg_len2 > 0, (ap * ab).sum(axis=1) / seg_len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + ab * t[:, None]
    d = np.hypot(*(q - np.asarray(p, dtype=float)).T)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])[:-1] + s0
    s = cum + t * seg_len
    return q, d, s, float(seg_len.sum())


def _project_small(c: list, p: Point2, s0: float, best):
    px, py = p
    for a, b in zip(c[:-1], c[1:]):
        dx, dy = b[0] - a[0], b[1] - a[1]
        l2 = dx * dx + dy * dy
        t = ((px - a[0]) * dx + (py - a[1]) * dy) / l2 if l2 > 0 else 0.0
        t = min(max(t, 0.0), 1.0)
        qx, qy = a[0] + dx * t, a[1] + dy * t
        d = math.hypot(qx - px, qy - py)
        L = math.sqrt(l2)
        s = s0 + t * L
        if best is None or d < best[1] - 1e-12 or (d <= best[1] + 1e-12 and s < best[2]):
            best = ((qx, qy), d, s)
        s0 += L
    return best, s0


def project(g, p) -> tuple[Point2, float, float]:
    """Closest point on polyline/ring ``g``: (point, distance, abscissa).

    Ties are broken toward the smallest abscissa.
    """
    p = xy(p)
    if isinstance(g, Polygon):
        rings = [g.exterior, *g.interiors]
    else:
        rings = [g]
    arrays = [_coords(r) for r in rings]
    if sum(len(a) for a in arrays) <= _SMALL:
        best, s0 = None, 0.0
        for a in arrays:
            best, s0 = _project_small(a.tolist(), p, s0, best)
        return best
    qs, ds, ss = [], [], []
    s0 = 0.0
    for c in arrays:
        q, d, s, total = _project_coords(c, p, s0)
        qs.append(q)
        ds.append(d)
        ss.append(s)
        s0 += total
    q = np.concatenate(qs)
    d = np.concatenate(ds)
    s = np.concatenate(ss)
    dmin = d.min()
    cand = np.flatnonzero(d <= dmin + 1e-12)
    i = cand[np.argmin(s[cand])]
    return (float(q[i, 0]), float(q[i, 1])), float(d[i]), float(s[i])


def closest_point(g, p) -> tuple[Point2, float]:
    """Point of ``g`` nearest ``p`` and its distance.

    Polygons are treated as regions: interior points map to themselves.
    """
    p = xy(p)
    if isinstance(g, Polygon) and g.covers(Point(p)):
        return p, 0.0
    q, d, _ = project(g, p)
    return q, d


def locate_along(line: LineString, p) -> float:
    return project(line, p)[2]


def interpolate(line: LineString, s: float, eps: float = 1e-9) -> Point2:
    c = _coords(line)
    if len(c) > _SMALL:
        return _interpolate_np(c, s, eps)
    c = c.tolist()
    seg = _seglens(c)
    total = sum(seg)
    if s < -eps or s > total + eps:
        raise InvalidParameter(f"abscissa {s} outside [0, {total}]")
    s = min(max(s, 0.0), total)
    if s == 0:
        return (c[0][0], c[0][1])
    if s == total:
        return (c[-1][0], c[-1][1])
    acc = 0.0
    for i, L in enumerate(seg):
        if s < acc + L or i == len(seg) - 1:
            break
        acc += L
    t = (s - acc) / seg[i] if seg[i] > 0 else 0.0
    return (c[i][0] + t * (c[i + 1][0] - c[i][0]), c[i][1] + t * (c[i + 1][1] - c[i][1]))


def _interpolate_np(c: np.ndarray, s: float, eps: float) -> Point2:
    seg = np.hypot(*np.diff(c, axis=0).T)
    total = float(seg.sum())
    if s < -eps or s > total + eps:
        raise InvalidParameter(f"abscissa {s} outside [0, {total}]")
    s = min(max(s, 0.0), total)
    if s == 0:
        return (float(c[0, 0]), float(c[0, 1]))
    if s == total:
        return (float(c[-1, 0]), float(c[-1, 1]))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    i = int(np.searchsorted(cum, s, side="right") - 1)
    i = min(i, len(seg) - 1)
    t = (s - cum[i]) / seg[i] if seg[i] > 0 else 0.0
    x = c[i, 0] + t * (c[i + 1, 0] - c[i, 0])
    y = c[i, 1] + t * (c[i + 1, 1] - c[i, 1])
    return (float(x), float(y))


def direction_at(line: LineString, s: float) -> tuple[float, float]:
    """Unit tangent of the segment holding abscissa ``s``."""
    c = _coords(line).tolist()
    seg = _seglens(c)
    acc, i = 0.0, 0
    for i, L in enumerate(seg):
        if s < acc + L or i == len(seg) - 1:
            break
        acc += L
    if s < 0:
        i = 0
    while seg[i] == 0 and i > 0:
        i -= 1
    dx, dy = c[i + 1][0] - c[i][0], c[i + 1][1] - c[i][1]
    n = math.hypot(dx, dy)
    return (dx / n, dy / n)


def substring(line: LineString, s0: float, s1: float) -> LineString:
    """Portion of ``line`` between abscissae s0 < s1."""
    c = _coords(line)
    seg = np.hypot(*np.diff(c, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    pts = [interpolate(line, s0)]
    for k in range(1, len(c) - 1):
        if s0 < cum[k] < s1:
            pts.append((float(c[k, 0]), float(c[k, 1])))
    pts.append(interpolate(line, s1))
    return make_polyline(pts)


# ---------------------------------------------------------------------------
# circles, arcs, curves
# ---------------------------------------------------------------------------

def fit_circle_3pts(p1, p2, p3, collinear_tol: float = 1e-9) -> tuple[Point2, float]:
    (x1, y1), (x2, y2), (x3, y3) = xy(p1), xy(p2), xy(p3)
    bx, by = x2 - x1, y2 - y1
    cx, cy = x3 - x1, y3 - y1
    det = 2.0 * (bx * cy - by * cx)
    scale = max(bx * bx + by * by, cx * cx + cy * cy, 1e-300)
    if abs(det) <= collinear_tol * scale:
        raise NoCircle("points are collinear")
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / det
    uy = (bx * c2 - cx * b2) / det
    return (x1 + ux, y1 + uy), math.hypot(ux, uy)


def bezier_quadratic(p0, c, p1, n_samples: int) -> LineString:
    if n_samples < 2:
        raise InvalidParameter("n_samples must be >= 2")
    p0, c, p1 = (np.asarray(xy(q)) for q in (p0, c, p1))
    t = np.linspace(0.0, 1.0, n_samples)[:, None]
    pts = (1 - t) ** 2 * p0 + 2 * t * (1 - t) * c + t ** 2 * p1
    pts[0], pts[-1] = p0, p1
    return LineString(pts)


def arc_to_polyline(arc: CircleArc, tol: float = ARC_TOLERANCE) -> LineString:
    """Chord approximation with sagitta <= tol, at least 4 chords per full turn."""
    if not tol > 0:
        raise InvalidParameter("tol must be > 0")
    sweep = arc.sweep
    if tol < arc.radius:
        theta = 2.0 * math.acos(1.0 - tol / arc.radius)
    else:
        theta = math.pi / 2
    n = max(math.ceil(sweep / theta), math.ceil(4 * sweep / (2 * math.pi) - 1e-12), 1)
    sign = 1.0 if arc.orientation is Orientation.CCW else -1.0
    angles = arc.start_angle + sign * sweep * np.linspace(0.0, 1.0, n + 1)
    pts = np.column_stack([arc.center[0] + arc.radius * np.cos(angles),
                           arc.center[1] + arc.radius * np.sin(angles)])
    pts[0] = arc.start_point
    pts[-1] = arc.end_point
    return LineString(pts)
