"""Lanes, lane groups and intersection trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from shapely.geometry import LineString, Polygon

from . import geom
from .errors import EmptyResult
from .geom import Point2
from .network import Direction, JunctionNode, RoadAxis


class Side(str, Enum):
    RIGHT = "Right"
    LEFT = "Left"


@dataclass(frozen=True)
class Lane:
    edge_id: str
    index: int
    side: Side
    offset: float
    geometry: LineString  # in travel direction
    direction_matches_axis: bool

    @property
    def id(self) -> str:
        return f"{self.edge_id}:L{self.index}"


@dataclass(frozen=True)
class LaneGroup:
    edge_id: str
    direction_matches_axis: bool
    lane_ids: tuple[str, ...]


@dataclass(frozen=True)
class Interconnection:
    node_id: str
    from_lane: str
    to_lane: str
    trajectory: LineString

    @property
    def id(self) -> str:
        return f"{self.node_id}:{self.from_lane}>{self.to_lane}"


def lane_offsets(n: int, half_width: float) -> list[float]:
    """Lane centre offsets from the axis, right (negative) to left.

    Odd counts put a lane on the axis and step outward by the lane width;
    even counts start half a lane width off the axis.
    """
    lam = 2.0 * half_width / n
    first = 0.0 if n % 2 else lam / 2
    half = [first]
    while len(half) < (n + 1) // 2:
        half.append(half[-1] + lam)
    out = sorted({-o for o in half} | set(half))
    return [o + 0.0 for o in out]


def generate_lanes(axis: RoadAxis, geometry: LineString | None = None, edge_id: str | None = None,
                   tol: float = geom.ARC_TOLERANCE, min_length: float = 0.01):
    """Lanes and separators for an axis (or one of its edges).

    Returns ``(lanes, separators, diagnostics)``; lanes are ordered by index.
    """
    g = geometry if geometry is not None else axis.geometry
    eid = edge_id if edge_id is not None else axis.id
    n = int(axis.lane_count)
    offs = lane_offsets(n, axis.half_width)
    diagnostics: list[str] = []
    made = []
    for off in offs:
        right = off <= 0
        if axis.direction is Direction.DIRECT:
            along = True
        elif axis.direction is Direction.REVERSE:
            along = False
        else:
            along = right
        try:
            line = geom.offset_curve(g, off, tol)
        except EmptyResult:
            diagnostics.append(f"{eid}: lane at offset {off:.3f} collapsed")
            continue
        if line.length < min_length:
            diagnostics.append(f"{eid}: lane at offset {off:.3f} shorter than {min_length}")
            continue
        if not along:
            line = LineString(line.coords[::-1])
        made.append((abs(off), 0 if right else 1, off, along, line))
    made.sort(key=lambda m: (round(m[0], 9), m[1]))
    lanes = [Lane(eid, k + 1, Side.RIGHT if m[1] == 0 else Side.LEFT, m[2], m[4], m[3])
             for k, m in enumerate(made)]
    seps = []
    for a, b in zip(offs, offs[1:]):
        try:
            seps.append(geom.offset_curve(g, 0.5 * (a + b), tol))
        except EmptyResult:
            diagnostics.append(f"{eid}: separator at offset {0.5 * (a + b):.3f} collapsed")
    return lanes, seps, diagnostics


def lane_groups(edge_id: str, lanes: list[Lane]) -> list[LaneGroup]:
    """Maximal runs of adjacent same-direction lanes, right to left."""
    ordered = sorted((l for l in lanes if l.edge_id == edge_id), key=lambda l: l.offset)
    groups: list[LaneGroup] = []
    run: list[Lane] = []
    for lane in ordered:
        if run and lane.direction_matches_axis != run[-1].direction_matches_axis:
            groups.append(LaneGroup(edge_id, run[0].direction_matches_axis, tuple(l.id for l in run)))
            run = []
        run.append(lane)
    if run:
        groups.append(LaneGroup(edge_id, run[0].direction_matches_axis, tuple(l.id for l in run)))
    return groups


def _crossings(line: LineString, boundary) -> list[float]:
    inter = line.intersection(boundary)
    pts = []
    stack = [inter]
    while stack:
        g = stack.pop()
        if g.is_empty:
            continue
        if hasattr(g, "geoms"):
            stack.extend(g.geoms)
        elif g.geom_type == "Point":
            pts.append((g.x, g.y))
        else:
            pts.extend(c[:2] for c in g.coords)
    return sorted(geom.locate_along(line, p) for p in pts)


def entry_point(lane: LineString, surface: Polygon | None, jc: Point2, incoming: bool) -> Point2:
    """Where the lane enters (incoming) or leaves (outgoing) the junction surface."""
    g = lane
    L = g.length
    if surface is not None and not surface.is_empty:
        near = geom.substring(g, L / 2, L) if incoming else geom.substring(g, 0.0, L / 2)
        ss = _crossings(near, surface.boundary)
        if ss:
            return geom.interpolate(near, ss[0] if incoming else ss[-1])
    a, b = g.coords[0][:2], g.coords[-1][:2]
    return a if math.dist(a, jc) <= math.dist(b, jc) else b


def _travel_direction(line: LineString, p: Point2) -> tuple[float, float]:
    return geom.direction_at(line, geom.locate_along(line, p))


def control_point(p0: Point2, d0, p1: Point2, d1, jc: Point2, parallel_deg: float = 5.0) -> Point2:
    """Middle Bezier control point for a trajectory p0 -> p1.

    Non-parallel travel lines: barycentre of their intersection and the
    junction centre.  Parallel, same travel direction: entry/exit midpoint
    (straight trajectory).  Parallel, opposite direction: barycentre of the
    entry/exit midpoint and the junction centre.
    """
    cross = d0[0] * d1[1] - d0[1] * d1[0]
    dot = d0[0] * d1[0] + d0[1] * d1[1]
    mid = (0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1]))
    if abs(cross) <= math.sin(math.radians(parallel_deg)):
        if dot > 0:
            return mid
        return (0.5 * (mid[0] + jc[0]), 0.5 * (mid[1] + jc[1]))
    # p0 + t d0 = p1 + u d1
    rx, ry = p1[0] - p0[0], p1[1] - p0[1]
    t = (rx * d1[1] - ry * d1[0]) / cross
    x = (p0[0] + t * d0[0], p0[1] + t * d0[1])
    return (0.5 * (x[0] + jc[0]), 0.5 * (x[1] + jc[1]))


def generate_interconnections(junction: JunctionNode, lanes_by_edge: dict[str, list[Lane]],
                              surface: Polygon | None, samples: int = 16,
                              parallel_deg: float = 5.0) -> list[Interconnection]:
    """Every incoming lane joined to every outgoing lane of another edge."""
    jc = junction.center
    incoming: list[tuple[Lane, Point2]] = []
    outgoing: list[tuple[Lane, Point2]] = []
    seen = set()
    for ie in junction.incident:
        if ie.edge_id in seen:
            continue  # loop edges are listed twice
        seen.add(ie.edge_id)
        for lane in lanes_by_edge.get(ie.edge_id, []):
            # travels toward the node: along an edge ending here, or against one starting here
            if lane.direction_matches_axis != ie.at_start:
                incoming.append((lane, entry_point(lane.geometry, surface, jc, True)))
            else:
                outgoing.append((lane, entry_point(lane.geometry, surface, jc, False)))
    out = []
    for lin, p0 in incoming:
        d0 = _travel_direction(lin.geometry, p0)
        for lout, p1 in outgoing:
            if lout.edge_id == lin.edge_id:
                continue
            d1 = _travel_direction(lout.geometry, p1)
            c = control_point(p0, d0, p1, d1, jc, parallel_deg)
            traj = geom.bezier_quadratic(p0, c, p1, samples)
            out.append(Interconnection(junction.node_id, lin.id, lout.id, traj))
    out.sort(key=lambda ic: (ic.from_lane, ic.to_lane))
    return out
