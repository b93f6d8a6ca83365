"""Road axes and their snapped planar topology."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import LineString, Point
from shapely.ops import polygonize
from shapely.strtree import STRtree

from . import geom
from .errors import InvalidParameter, NotFound

Point2 = geom.Point2
UNIVERSAL_FACE = "F_universal"


class Importance(str, Enum):
    MAJOR = "Major"
    MEDIUM = "Medium"
    RESIDENTIAL = "Residential"


class Direction(str, Enum):
    DIRECT = "Direct"
    REVERSE = "Reverse"
    BOTH = "Both"


@dataclass(frozen=True)
class Diagnostic:
    item: str
    message: str
    level: str = "warning"

    def __str__(self) -> str:
        return f"{self.level}: {self.item}: {self.message}"


@dataclass(frozen=True)
class RoadAxis:
    id: str
    geometry: LineString
    half_width: float
    importance: Importance = Importance.RESIDENTIAL
    avg_speed: float = 30.0
    lane_count: int = 2
    direction: Direction = Direction.BOTH
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "importance", Importance(self.importance))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not isinstance(self.geometry, LineString):
            object.__setattr__(self, "geometry", geom.make_polyline(self.geometry))
        if not 0 < self.half_width <= 50:
            raise InvalidParameter(f"axis {self.id}: half_width {self.half_width} outside (0, 50]")
        if not 1 <= int(self.lane_count) <= 12:
            raise InvalidParameter(f"axis {self.id}: lane_count {self.lane_count} outside [1, 12]")
        if not self.avg_speed > 0:
            raise InvalidParameter(f"axis {self.id}: avg_speed must be > 0")
        if len(self.geometry.coords) < 2 or self.geometry.length <= 0:
            raise InvalidParameter(f"axis {self.id}: geometry has zero length")

    @property
    def width(self) -> float:
        return 2.0 * self.half_width

    def content_hash(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(repr((self.id, self.half_width, self.importance.value, self.avg_speed,
                       self.lane_count, self.direction.value, self.name)).encode())
        h.update(shapely.to_wkb(self.geometry))
        return h.hexdigest()

    def with_changes(self, **changes) -> "RoadAxis":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return RoadAxis(**data)


@dataclass(frozen=True)
class Edge:
    id: str
    axis_id: str
    start: str
    end: str
    geometry: LineString

    @property
    def length(self) -> float:
        return self.geometry.length

    def other(self, node: str) -> str:
        return self.end if node == self.start else self.start


@dataclass(frozen=True)
class IncidentEdge:
    edge_id: str
    at_start: bool
    azimuth: float
    geometry: LineString  # oriented away from the node


@dataclass(frozen=True)
class JunctionNode:
    node_id: str
    center: Point2
    incident: tuple[IncidentEdge, ...]

    @property
    def degree(self) -> int:
        return len(self.incident)


@dataclass(frozen=True)
class Face:
    id: str
    polygon: object  # shapely Polygon; None for the universal face
    edge_ids: tuple[str, ...]
    universal: bool = False


@dataclass
class Topology:
    nodes: dict[str, Point2]
    edges: dict[str, Edge]
    axes: dict[str, RoadAxis]
    snap_tol: float
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @cached_property
    def node_edges(self) -> dict[str, list[tuple[str, bool]]]:
        out: dict[str, list[tuple[str, bool]]] = {n: [] for n in self.nodes}
        for eid in sorted(self.edges):
            e = self.edges[eid]
            out[e.start].append((eid, True))
            out[e.end].append((eid, False))
        return out

    def axis_of(self, edge_id: str) -> RoadAxis:
        return self.axes[self.edges[edge_id].axis_id]

    def edge(self, edge_id: str) -> Edge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise NotFound(f"unknown edge {edge_id}") from None

    def degree(self, node_id: str) -> int:
        return len(self.node_edges[node_id])

    def junction(self, node_id: str) -> JunctionNode:
        if node_id not in self.nodes:
            raise NotFound(f"unknown node {node_id}")
        inc = []
        for eid, at_start in self.node_edges[node_id]:
            g = self.edges[eid].geometry
            if not at_start:
                g = LineString(g.coords[::-1])
            (x0, y0), (x1, y1) = g.coords[0], g.coords[1]
            az = math.atan2(y1 - y0, x1 - x0) % (2 * math.pi)
            inc.append(IncidentEdge(eid, at_start, az, g))
        inc.sort(key=lambda ie: (ie.azimuth, ie.edge_id, not ie.at_start))
        return JunctionNode(node_id, self.nodes[node_id], tuple(inc))

    @cached_property
    def faces(self) -> dict[str, Face]:
        return _compute_faces(self)

    def fingerprint(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for eid in sorted(self.edges):
            e = self.edges[eid]
            h.update(f"{eid}|{e.start}|{e.end}|{self.axes[e.axis_id].name}".encode())
            h.update(shapely.to_wkb(e.geometry))
        return h.hexdigest()


def _node_id(p: Point2) -> str:
    return f"N{p[0]:.3f}_{p[1]:.3f}"


def build_topology(axes: Iterable[RoadAxis], snap_tol: float = 0.05) -> Topology:
    """Snap endpoints within ``snap_tol`` and split axes at mutual crossings."""
    if not snap_tol > 0:
        raise InvalidParameter("snap_tol must be > 0")
    diagnostics: list[Diagnostic] = []
    kept: dict[str, RoadAxis] = {}
    for axis in sorted(axes, key=lambda a: a.id):
        if axis.id in kept:
            diagnostics.append(Diagnostic(axis.id, "duplicate axis id, later copy rejected", "error"))
            continue
        if axis.geometry.length <= snap_tol:
            diagnostics.append(Diagnostic(axis.id, f"axis shorter than snap tolerance ({axis.geometry.length:.4g} m)", "error"))
            continue
        kept[axis.id] = axis
    ids = list(kept)
    lines = [kept[i].geometry for i in ids]
    lengths = [g.length for g in lines]
    splits: list[set[float]] = [{0.0, L} for L in lengths]

    if lines:
        tree = STRtree(lines)
        left, right = tree.query(lines, predicate="intersects")
        for i, j in zip(left.tolist(), right.tolist()):
            if i >= j:
                continue
            inter = lines[i].intersection(lines[j])
            for pt in _points_of(inter):
                splits[i].add(lines[i].project(pt))
                splits[j].add(lines[j].project(pt))
        ends = [Point(g.coords[k]) for g in lines for k in (0, -1)]
        owner = np.repeat(np.arange(len(lines)), 2)
        pi, lj = tree.query(ends, predicate="dwithin", distance=snap_tol)
        for p, j in zip(pi.tolist(), lj.tolist()):
            if owner[p] == j:
                continue
            s = lines[j].project(ends[p])
            if snap_tol < s < lengths[j] - snap_tol:
                splits[j].add(s)

    # candidate node positions
    cand: list[Point2] = []
    cand_of: list[list[int]] = []
    abscissae: list[list[float]] = []
    for k, g in enumerate(lines):
        ss = sorted(splits[k])
        abscissae.append(ss)
        idx = []
        for s in ss:
            idx.append(len(cand))
            cand.append(geom.interpolate(g, s) if 0 < s < lengths[k] else g.coords[0 if s == 0 else -1][:2])
        cand_of.append(idx)

    rep = _cluster(cand, snap_tol)
    nodes: dict[str, Point2] = {}
    node_of_cand: list[str] = []
    pos_to_id: dict[Point2, str] = {}
    for c in range(len(cand)):
        p = rep[c]
        nid = pos_to_id.get(p)
        if nid is None:
            nid = _node_id(p)
            while nid in nodes:
                nid += "'"
            pos_to_id[p] = nid
            nodes[nid] = p
        node_of_cand.append(nid)

    edges: dict[str, Edge] = {}
    for k, aid in enumerate(ids):
        g = lines[k]
        ss = abscissae[k]
        pieces = []
        for a in range(len(ss) - 1):
            n0, n1 = node_of_cand[cand_of[k][a]], node_of_cand[cand_of[k][a + 1]]
            if ss[a + 1] - ss[a] <= 0:
                continue
            if n0 == n1 and ss[a + 1] - ss[a] <= snap_tol:
                continue
            sub = geom.substring(g, ss[a], ss[a + 1]) if (ss[a], ss[a + 1]) != (0.0, lengths[k]) else g
            coords = [nodes[n0]] + [c[:2] for c in sub.coords[1:-1]] + [nodes[n1]]
            try:
                piece = geom.make_polyline(coords)
            except Exception:
                continue
            if piece.length <= snap_tol and n0 == n1:
                continue
            pieces.append((n0, n1, piece))
        if not pieces:
            diagnostics.append(Diagnostic(aid, "axis collapsed during snapping", "error"))
            continue
        for m, (n0, n1, piece) in enumerate(pieces):
            eid = aid if len(pieces) == 1 else f"{aid}#{m}"
            edges[eid] = Edge(eid, aid, n0, n1, piece)

    used = {e.start for e in edges.values()} | {e.end for e in edges.values()}
    nodes = {n: p for n, p in sorted(nodes.items()) if n in used}
    axes_used = {aid: kept[aid] for aid in ids if any(e.axis_id == aid for e in edges.values())}
    return Topology(nodes, dict(sorted(edges.items())), axes_used, snap_tol, diagnostics)


def _points_of(g) -> list[Point]:
    if g.is_empty:
        return []
    if isinstance(g, Point):
        return [g]
    if isinstance(g, LineString):
        return [Point(g.coords[0]), Point(g.coords[-1])]
    if hasattr(g, "geoms"):
        out = []
        for sub in g.geoms:
            out.extend(_points_of(sub))
        return out
    return []


def _cluster(points: list[Point2], tol: float) -> list[Point2]:
    """Union points closer than ``tol``; representative = lexicographic minimum."""
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n:
        tree = cKDTree(np.asarray(points, dtype=float))
        for i, j in tree.query_pairs(tol):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    best: dict[int, Point2] = {}
    for i, p in enumerate(points):
        r = find(i)
        p = (float(p[0]), float(p[1]))
        if r not in best or p < best[r]:
            best[r] = p
    return [best[find(i)] for i in range(n)]


def _compute_faces(topo: Topology) -> dict[str, Face]:
    eids = list(topo.edges)
    polys = [geom.as_polygon(p) for p in polygonize([topo.edges[e].geometry for e in eids])]
    polys = [p for p in polys if not p.is_empty and p.area > 0]
    bounding: list[set[str]] = [set() for _ in polys]
    universal: set[str] = set()
    tree = STRtree(polys) if polys else None
    for eid in eids:
        g = topo.edges[eid].geometry
        s = g.length / 2
        (x, y), (dx, dy) = geom.interpolate(g, s), geom.direction_at(g, s)
        eps = min(1e-4, 0.01 * g.length)
        for side in (1.0, -1.0):
            probe = Point(x - dy * eps * side, y + dx * eps * side)
            hit = tree.query(probe, predicate="within") if tree is not None else []
            if len(hit):
                bounding[int(hit[0])].add(eid)
            else:
                universal.add(eid)
    faces: dict[str, Face] = {}
    for poly, bset in zip(polys, bounding):
        key = "|".join(sorted(bset)) or poly.wkt
        fid = "F" + hashlib.blake2b(key.encode(), digest_size=6).hexdigest()
        while fid in faces:
            fid += "'"
        faces[fid] = Face(fid, poly, tuple(sorted(bset)))
    faces[UNIVERSAL_FACE] = Face(UNIVERSAL_FACE, None, tuple(sorted(universal)), universal=True)
    return dict(sorted(faces.items()))


def faces(topo: Topology) -> dict[str, Face]:
    """Bounded faces of the edge arrangement plus the flagged universal face."""
    return topo.faces


def one_neighborhood(topo: Topology, edge_ids: Iterable[str]) -> set[str]:
    out: set[str] = set()
    for eid in edge_ids:
        e = topo.edge(eid)
        out.add(eid)
        for n in (e.start, e.end):
            out.update(x for x, _ in topo.node_edges[n])
    return out


def connected_components(topo: Topology) -> int:
    parent = {n: n for n in topo.nodes}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for e in topo.edges.values():
        a, b = find(e.start), find(e.end)
        if a != b:
            parent[a] = b
    return len({find(n) for n in topo.nodes})
