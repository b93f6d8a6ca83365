"""Road surfaces: sections, intersections, width transitions, city blocks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString, MultiLineString, Point, Polygon
from shapely.ops import split, unary_union
from shapely.strtree import STRtree

from . import geom
from .errors import InvalidParameter
from .geom import CircleArc, Point2
from .network import Topology

_ARC_STUB = 1e-3  # radial extension so arc ends get noded against scrap edges


@dataclass(frozen=True)
class SectionSurface:
    edge_id: str
    polygon: Polygon
    border_lines: tuple[LineString | None, LineString | None]
    start_s: float
    end_s: float
    degenerate: bool = False


@dataclass(frozen=True)
class IntersectionSurface:
    node_id: str
    polygon: Polygon
    arcs: tuple[CircleArc, ...] = ()
    fallback: bool = False


@dataclass(frozen=True)
class CityBlock:
    face_id: str
    polygon: Polygon
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def empty(self) -> bool:
        return self.polygon.is_empty


def border_line(axis: LineString, s: float, w: float, window: float = 2.0,
                overcut: float = 0.1) -> LineString:
    """Segment through the point at ``s``, normal to the local chord.

    The chord spans ``s +- window`` (clipped to the axis); the segment's
    half-length is ``w * (1 + overcut)`` so it crosses the buffered axis.
    """
    L = axis.length
    s = min(max(s, 0.0), L)
    p = geom.interpolate(axis, s)
    a = geom.interpolate(axis, max(0.0, s - window))
    b = geom.interpolate(axis, min(L, s + window))
    dx, dy = b[0] - a[0], b[1] - a[1]
    n = math.hypot(dx, dy)
    if n < 1e-12:
        dx, dy = geom.direction_at(axis, s)
        n = 1.0
    nx, ny = -dy / n, dx / n
    h = w * (1.0 + overcut)
    return LineString([(p[0] - nx * h, p[1] - ny * h), (p[0] + nx * h, p[1] + ny * h)])


def _pick_piece(pieces, probe: Point2) -> Polygon:
    pt = Point(probe)
    return min(pieces, key=lambda g: (g.distance(pt), -g.area))


def _split(poly: Polygon, lines) -> list[Polygon]:
    lines = [l for l in lines if l is not None]
    if not lines:
        return [poly]
    blade = lines[0] if len(lines) == 1 else MultiLineString(lines)
    return [g for g in split(poly, blade).geoms if g.geom_type == "Polygon" and g.area > 0]


def scrap(axis: LineString, w: float, s: float, line: LineString | None = None,
          tol: float = geom.ARC_TOLERANCE, window: float = 2.0, overcut: float = 0.1) -> Polygon:
    """Junction-side piece of ``buffer(axis, w)`` cut at ``s`` (axis oriented from the node)."""
    line = line or border_line(axis, s, w, window, overcut)
    pieces = _split(geom.buffer(axis, w, tol), [line])
    if len(pieces) < 2:
        return geom.buffer(LineString([axis.coords[0], geom.interpolate(axis, s)]), w, tol) \
            if s > 0 else Point(axis.coords[0]).buffer(w, quad_segs=geom.quad_segs_for(w, tol))
    return geom.as_polygon(_pick_piece(pieces, geom.interpolate(axis, s / 2)))


def cut_sections(axis: LineString, w: float, s_start: float | None, s_end: float | None,
                 tol: float = geom.ARC_TOLERANCE, window: float = 2.0,
                 overcut: float = 0.1, edge_id: str = "") -> SectionSurface:
    """Cut the buffered axis at border abscissae measured from each end.

    ``s_end`` is measured from the end of the axis.  None means no border
    at that end.
    """
    L = axis.length
    l0 = border_line(axis, s_start, w, window, overcut) if s_start is not None else None
    l1 = border_line(axis, L - s_end, w, window, overcut) if s_end is not None else None
    a = s_start or 0.0
    b = L - (s_end or 0.0)
    full = geom.buffer(axis, w, tol)
    pieces = _split(full, [l0, l1])
    expected = 1 + (l0 is not None) + (l1 is not None)
    if b <= a or len(pieces) < expected:
        return SectionSurface(edge_id, full, (l0, l1), a, b, degenerate=True)
    sec = _pick_piece(pieces, geom.interpolate(axis, 0.5 * (a + b)))
    return SectionSurface(edge_id, geom.as_polygon(sec), (l0, l1), a, b)


def _arc_linework(arc: CircleArc, tol: float) -> LineString:
    pts = list(geom.arc_to_polyline(arc, tol).coords)
    cx, cy = arc.center

    def push(p):
        d = math.dist(p, (cx, cy))
        k = (d + _ARC_STUB) / d
        return (cx + (p[0] - cx) * k, cy + (p[1] - cy) * k)

    return LineString([push(pts[0])] + pts + [push(pts[-1])])


def intersection_surface(node_id: str, center: Point2, scraps: list[Polygon],
                         arcs: list[CircleArc], tol: float = geom.ARC_TOLERANCE,
                         grid: float = geom.SNAP_GRID) -> IntersectionSurface:
    """Assemble the junction surface from scraps and corner fillets.

    Faces of the arrangement of scrap outlines and arcs are kept when they
    lie inside a scrap, or when they border an arc on the outside of its
    circle (the fillet between two roads).
    """
    scraps = [s for s in scraps if s is not None and not s.is_empty]
    if not scraps:
        raise InvalidParameter(f"{node_id}: no scraps")
    scrap_union = unary_union(scraps)
    arcs = list(arcs)
    arc_lines = [_arc_linework(a, tol) for a in arcs]
    faces = geom.build_area(scraps + arc_lines, grid)
    kept = []
    for f in faces:
        rp = f.representative_point()
        if scrap_union.covers(rp):
            kept.append(f)
            continue
        for arc, al in zip(arcs, arc_lines):
            if f.distance(al) < 1e-5 and math.dist((rp.x, rp.y), arc.center) > arc.radius:
                kept.append(f)
                break
    fallback = False
    surf = unary_union(kept) if kept else scrap_union
    if surf.is_empty:
        surf, fallback = scrap_union, True
    parts = geom.polygons_of(surf)
    if len(parts) > 1:
        c = Point(center)
        parts.sort(key=lambda p: (p.distance(c), -p.area))
    poly = parts[0]
    return IntersectionSurface(node_id, geom.as_polygon(poly), tuple(arcs), fallback)


def _stations(axis: LineString, extra: list[float]) -> list[float]:
    c = np.asarray(axis.coords)[:, :2]
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(c, axis=0).T))])
    L = cum[-1]
    ss = sorted(set(cum.tolist()) | {min(max(e, 0.0), L) for e in extra})
    out = [ss[0]]
    for s in ss[1:]:
        if s - out[-1] > 1e-9:
            out.append(s)
    return out


def width_transition(axis: LineString, w_start: float, w_end: float, mode: str = "symmetric",
                     length: float | None = None, center_s: float | None = None,
                     tol: float = geom.ARC_TOLERANCE, length_factor: float = 4.0):
    """Buffer whose half-width moves from ``w_start`` to ``w_end`` over ``length``.

    Symmetric mode widens both sides. ``left``/``right`` hold the opposite
    side at ``w_start`` and flare only the named side by buffering an axis
    offset by ``w(s) - w_start`` toward that side with radius ``w(s)``.
    """
    if mode not in ("symmetric", "left", "right"):
        raise InvalidParameter(f"unknown transition mode {mode!r}")
    if w_start <= 0 or w_end <= 0:
        raise InvalidParameter("widths must be > 0")
    L = axis.length
    if w_start == w_end:
        return geom.buffer(axis, w_start, tol)
    if length is None:
        length = length_factor * abs(w_end - w_start)
    if not length > 0:
        raise InvalidParameter("transition length must be > 0")
    if length > L:
        raise InvalidParameter(f"transition length {length} exceeds axis length {L}")
    if center_s is None:
        center_s = L / 2
    a = min(max(center_s - length / 2, 0.0), L - length)
    b = a + length
    ss = _stations(axis, [a, b])

    def w_at(s):
        t = min(max((s - a) / length, 0.0), 1.0)
        return w_start + t * (w_end - w_start)

    pts = [geom.interpolate(axis, s) for s in ss]
    radii = [w_at(s) for s in ss]
    if mode == "symmetric":
        return geom.variable_buffer(geom.VariableWidthPolyline(pts, radii), tol)
    sign = 1.0 if mode == "left" else -1.0
    shifted, held = [], []
    for k, p in enumerate(pts):
        nx, ny = _vertex_normal(pts, k)
        d = sign * (radii[k] - w_start)
        shifted.append((p[0] + nx * d, p[1] + ny * d))
        held.append((p[0] - sign * nx * w_start, p[1] - sign * ny * w_start))
    body = geom.variable_buffer(geom.VariableWidthPolyline(shifted, radii), tol)
    # trapezoids of a tilted segment dip inside the held line; the strip
    # between the held line and the shifted axis restores it exactly
    strip = Polygon(held + shifted[::-1]).buffer(0)
    return geom.as_polygon(unary_union([body, strip]))


def _vertex_normal(pts, k) -> tuple[float, float]:
    dirs = []
    for i, j in ((k - 1, k), (k, k + 1)):
        if 0 <= i and j < len(pts):
            dx, dy = pts[j][0] - pts[i][0], pts[j][1] - pts[i][1]
            n = math.hypot(dx, dy)
            dirs.append((dx / n, dy / n))
    tx, ty = sum(d[0] for d in dirs), sum(d[1] for d in dirs)
    n = math.hypot(tx, ty) or 1.0
    return -ty / n, tx / n


def city_blocks(topo: Topology, surfaces: list[Polygon], face_ids=None,
                grid: float = geom.SNAP_GRID) -> dict[str, CityBlock]:
    """Bounded faces minus every road surface overlapping them."""
    surfaces = [s for s in surfaces if s is not None and not s.is_empty]
    tree = STRtree(surfaces) if surfaces else None
    out = {}
    for fid, face in topo.faces.items():
        if face.universal or (face_ids is not None and fid not in face_ids):
            continue
        poly = face.polygon
        hits = sorted(tree.query(poly, predicate="intersects").tolist()) if tree is not None else []
        if hits:
            cut = geom.boolean(poly, unary_union([surfaces[i] for i in hits]), "difference", grid)
            block = unary_union(cut) if cut else Polygon()
        else:
            block = poly
        diags = () if not block.is_empty else (f"{fid}: block emptied by road surfaces",)
        out[fid] = CityBlock(fid, geom.as_polygon(block) if not block.is_empty else Polygon(), diags)
    return out
