"""Set-based generation over a road network with incremental upserts.

The store keeps one item per key in a few collections.  ``generate``
stages every result for a scope of edges, validates it, then applies it in
one step under the store lock; an exception anywhere leaves the store as it
was.  Workers coordinate through ``acquire``/``release`` on axis ids.
"""
from __future__ import annotations

import hashlib
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from typing import Callable, Iterable

import numpy as np
import shapely
from shapely.geometry import Point, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.ops import unary_union
from shapely.strtree import STRtree

from . import geom
from .errors import InternalInconsistency, InvalidParameter, NotFound
from .junction import BorderPoint, JunctionSolution, border_points, solve_junction
from .network import RoadAxis, Topology, build_topology
from .objects import PedestrianCrossing, StreetObject, crossing_surface, place_object
from .roundabout import detect_roundabouts
from .settings import DEFAULT_SETTINGS, Settings
from .surfaces import (
    CityBlock, IntersectionSurface, SectionSurface, cut_sections, intersection_surface, scrap,
)
from .traffic import (
    Interconnection, Lane, LaneGroup, generate_interconnections, generate_lanes, lane_groups,
)

COLLECTIONS = ("junctions", "intersections", "sections", "lanes", "interconnections",
               "blocks", "roundabouts", "objects")
_NODE_KEYED = ("junctions", "intersections", "interconnections")
_EDGE_KEYED = ("sections", "lanes")


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JunctionRecord:
    solution: JunctionSolution
    signature: str


@dataclass(frozen=True)
class EdgeLanes:
    edge_id: str
    lanes: tuple[Lane, ...]
    separators: tuple
    groups: tuple[LaneGroup, ...]


@dataclass(frozen=True)
class ObjectPose:
    object_id: str
    point: geom.Point2
    angle: float
    host_edge: str | None = None
    surface: Polygon | None = None


@dataclass
class Item:
    value: object
    digest: str
    version: int


@dataclass
class ChangeReport:
    ok: bool = True
    added: dict[str, list[str]] = field(default_factory=dict)
    updated: dict[str, list[str]] = field(default_factory=dict)
    removed: dict[str, list[str]] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)
    stats: dict[str, float] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not any(self.added.values()) and not any(self.updated.values()) \
            and not any(self.removed.values())

    def count(self) -> int:
        return sum(len(v) for d in (self.added, self.updated, self.removed) for v in d.values())

    def summary(self) -> str:
        parts = []
        for name in COLLECTIONS:
            a, u, r = (len(d.get(name, ())) for d in (self.added, self.updated, self.removed))
            if a or u or r:
                parts.append(f"{name}: +{a} ~{u} -{r}")
        return "; ".join(parts) if parts else "no changes"


# ---------------------------------------------------------------------------
# content hashing
# ---------------------------------------------------------------------------

def _feed(h, v) -> None:
    if v is None:
        h.update(b"N")
    elif isinstance(v, BaseGeometry):
        h.update(b"G")
        h.update(shapely.to_wkb(v))
    elif isinstance(v, Enum):
        h.update(b"E" + str(v.value).encode())
    elif is_dataclass(v):
        h.update(b"D" + type(v).__name__.encode())
        for f in fields(v):
            _feed(h, getattr(v, f.name))
    elif isinstance(v, dict):
        h.update(b"M%d" % len(v))
        for k in sorted(v, key=repr):
            _feed(h, k)
            _feed(h, v[k])
    elif isinstance(v, (list, tuple)):
        h.update(b"L%d" % len(v))
        for x in v:
            _feed(h, x)
    elif isinstance(v, float):
        h.update(b"F" + repr(v).encode())
    else:
        h.update(b"R" + repr(v).encode())


def content_hash(value) -> str:
    h = hashlib.blake2b(digest_size=16)
    _feed(h, value)
    return h.hexdigest()


def junction_signature(topo: Topology, node_id: str, settings: Settings) -> str:
    """Hash of everything a junction solution depends on."""
    h = hashlib.blake2b(digest_size=16)
    _feed(h, topo.nodes[node_id])
    for eid, at_start in topo.node_edges[node_id]:
        e = topo.edges[eid]
        _feed(h, (eid, at_start, e.start, e.end))
        h.update(topo.axes[e.axis_id].content_hash().encode())
        h.update(shapely.to_wkb(e.geometry))
    _feed(h, hash(settings))
    return h.hexdigest()


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------

class StreetModelStore:
    """Keyed result collections plus the axis semaphore ledger."""

    def __init__(self, settings: Settings = DEFAULT_SETTINGS):
        self.settings = settings
        self.topo: Topology | None = None
        self.collections: dict[str, dict[str, Item]] = {c: {} for c in COLLECTIONS}
        self.object_inputs: dict[str, StreetObject] = {}
        self.meta: dict[str, str] = {}
        self.stats = {"junction_solves": 0, "generate_calls": 0}
        self._lock = threading.RLock()
        self._sem_lock = threading.Lock()
        self._ledger: dict[str, str] = {}

    # pickling drops locks and the ledger (semaphores do not outlive a process)
    def __getstate__(self):
        state = self.__dict__.copy()
        for k in ("_lock", "_sem_lock"):
            state.pop(k)
        state["_ledger"] = {}
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.RLock()
        self._sem_lock = threading.Lock()

    def get(self, collection: str, key: str):
        item = self.collections[collection].get(key)
        return None if item is None else item.value

    def values(self, collection: str) -> dict[str, object]:
        with self._lock:
            return {k: it.value for k, it in self.collections[collection].items()}

    def digests(self) -> dict[str, dict[str, str]]:
        with self._lock:
            return {c: {k: it.digest for k, it in items.items()} for c, items in self.collections.items()}

    def snapshot(self) -> dict[str, dict[str, Item]]:
        with self._lock:
            return {c: dict(items) for c, items in self.collections.items()}

    @property
    def ledger(self) -> dict[str, str]:
        with self._sem_lock:
            return dict(self._ledger)


def acquire(store: StreetModelStore, axis_ids: Iterable[str], token: str) -> set[str]:
    """Atomically tag every untagged axis with ``token``; returns what was granted."""
    if not token:
        raise InvalidParameter("semaphore token must be non-empty")
    granted = set()
    with store._sem_lock:
        for aid in axis_ids:
            owner = store._ledger.get(aid)
            if owner is None:
                store._ledger[aid] = token
                granted.add(aid)
            elif owner == token:
                granted.add(aid)
    return granted


def release(store: StreetModelStore, token: str) -> set[str]:
    with store._sem_lock:
        freed = {a for a, t in store._ledger.items() if t == token}
        for a in freed:
            del store._ledger[a]
    return freed


# ---------------------------------------------------------------------------
# per-item computations
# ---------------------------------------------------------------------------

def _solve(topo: Topology, node: str, settings: Settings, diags: list[str]) -> JunctionSolution:
    try:
        js = solve_junction(topo, node, settings)
    except Exception as exc:  # robustness: fall back to plain borders
        diags.append(f"{node}: junction solver failed ({exc}); fallback borders used")
        jn = topo.junction(node)
        axes = {ie.edge_id: ie.geometry for ie in jn.incident}
        hw = {ie.edge_id: topo.axis_of(ie.edge_id).half_width for ie in jn.incident}
        borders = border_points(node, jn.center, axes, hw, (), settings["junction.max_border_fraction"])
        return JunctionSolution(node, jn.center, (), borders, ("fallback",))
    diags.extend(js.diagnostics)
    return js


def _intersection(topo: Topology, js: JunctionSolution, settings: Settings,
                  diags: list[str]) -> IntersectionSurface:
    tol = settings["geom.arc_tolerance"]
    window, overcut = settings["surface.local_window"], settings["surface.overcut_factor"]
    jn = topo.junction(js.node_id)
    scraps = []
    for ie in jn.incident:
        bp = js.borders.get(ie.edge_id)
        w = topo.axis_of(ie.edge_id).half_width
        if bp is None:  # loop edge: a disc of the road width around the node
            scraps.append(Point(jn.center).buffer(w, quad_segs=geom.quad_segs_for(w, tol)))
            continue
        scraps.append(scrap(ie.geometry, w, bp.s, tol=tol, window=window, overcut=overcut))
    if not scraps:
        raise InternalInconsistency(f"{js.node_id}: isolated node")
    arcs = [c.arc for c in js.corners if c.arc is not None]
    node_pt = Point(jn.center)
    try:
        surf = intersection_surface(js.node_id, jn.center, scraps, arcs, tol, settings["geom.snap_grid"])
        if surf.polygon.is_valid and surf.polygon.distance(node_pt) <= 1e-6:
            return surf
        diags.append(f"{js.node_id}: intersection surface misses its node; scraps used")
    except Exception as exc:
        diags.append(f"{js.node_id}: intersection assembly failed ({exc}); scraps used")
    poly = geom.as_polygon(unary_union(scraps))
    parts = sorted(geom.polygons_of(poly), key=lambda p: (p.distance(node_pt), -p.area))
    return IntersectionSurface(js.node_id, parts[0], tuple(arcs), fallback=True)


def _section(topo: Topology, eid: str, junctions: Callable, inters: Callable,
             settings: Settings, diags: list[str]) -> SectionSurface:
    e = topo.edges[eid]
    w = topo.axis_of(eid).half_width
    tol = settings["geom.arc_tolerance"]
    js0, js1 = junctions(e.start), junctions(e.end)
    loop = e.start == e.end
    b0: BorderPoint | None = None if loop else js0.borders.get(eid)
    b1: BorderPoint | None = None if loop else js1.borders.get(eid)
    try:
        sec = cut_sections(e.geometry, w, b0.s if b0 else None, b1.s if b1 else None, tol,
                           settings["surface.local_window"], settings["surface.overcut_factor"], eid)
    except Exception as exc:
        diags.append(f"{eid}: cut failed ({exc}); full buffer used")
        full = geom.buffer(e.geometry, w, tol)
        sec = SectionSurface(eid, full, (None, None), 0.0, e.geometry.length, degenerate=True)
    if sec.degenerate:
        diags.append(f"{eid}: degenerate cut, section falls back to the full buffer")
    cutters = [inters(n).polygon for n in {e.start, e.end}]
    poly = geom.boolean(sec.polygon, cutters, "difference", settings["geom.snap_grid"])
    poly = geom.as_polygon(unary_union(poly)) if poly else Polygon()
    if poly.is_empty:
        diags.append(f"{eid}: section fully covered by its intersections")
    return SectionSurface(eid, poly, sec.border_lines, sec.start_s, sec.end_s,
                          sec.degenerate or poly.is_empty)


def _lanes(topo: Topology, eid: str, settings: Settings, diags: list[str]) -> EdgeLanes:
    e = topo.edges[eid]
    lanes, seps, d = generate_lanes(topo.axis_of(eid), e.geometry, eid,
                                    settings["geom.arc_tolerance"], settings["lanes.min_length"])
    diags.extend(d)
    return EdgeLanes(eid, tuple(lanes), tuple(seps), tuple(lane_groups(eid, lanes)))


def _interconnections(topo: Topology, node: str, lanes: Callable, inters: Callable,
                      settings: Settings) -> tuple[Interconnection, ...]:
    jn = topo.junction(node)
    by_edge = {ie.edge_id: list(lanes(ie.edge_id).lanes) for ie in jn.incident}
    return tuple(generate_interconnections(
        jn, by_edge, inters(node).polygon, settings["interconnection.samples"],
        settings["interconnection.parallel_angle_deg"]))


def _pose(topo: Topology, obj: StreetObject, section: SectionSurface | None,
          diags: list[str]) -> ObjectPose | None:
    axis = None
    if obj.relative:
        e = topo.edges.get(obj.host_edge)
        if e is None:
            diags.append(f"{obj.id}: host edge {obj.host_edge} not in network")
            return None
        axis = e.geometry
    try:
        p, a = place_object(obj, axis, section.polygon if section is not None else None)
    except Exception as exc:
        diags.append(f"{obj.id}: placement failed ({exc})")
        return None
    surf = None
    if isinstance(obj, PedestrianCrossing) and section is not None:
        try:
            surf = crossing_surface(obj, axis, section)
        except Exception as exc:
            diags.append(f"{obj.id}: crossing surface not built ({exc})")
    return ObjectPose(obj.id, p, a, obj.host_edge, surf)


# ---------------------------------------------------------------------------
# staging
# ---------------------------------------------------------------------------

@dataclass
class Staged:
    values: dict[str, dict[str, object]] = field(default_factory=lambda: {c: {} for c in COLLECTIONS})
    diagnostics: list[str] = field(default_factory=list)
    junction_solves: int = 0
    sections_changed: set[str] = field(default_factory=set)


Lookup = Callable[[str, str], object]


def _no_lookup(collection: str, key: str):
    return None


def compute_partial(topo: Topology, scope: Iterable[str], settings: Settings = DEFAULT_SETTINGS,
                    lookup: Lookup = _no_lookup, objects: dict[str, StreetObject] | None = None,
                    hooks: Callable | None = None, reuse: bool = True) -> Staged:
    """Everything for ``scope`` and its one-neighbourhood, not applied anywhere.

    A junction is solved at most once per call.  With ``reuse`` a junction
    whose stored input signature still matches is taken from ``lookup``
    together with its surface and interconnections, and only the sections
    and lanes touching re-solved junctions are rebuilt.  Without it every
    junction at the ends of ``scope`` is solved again, as a per-element
    loop would.
    """
    st = Staged()
    V = st.values
    diags = st.diagnostics
    hook = hooks or (lambda stage, staged: None)
    scope = sorted(set(scope))
    for eid in scope:
        if eid not in topo.edges:
            raise NotFound(f"scope edge {eid} not in topology")
    n_a = sorted({n for eid in scope for n in (topo.edges[eid].start, topo.edges[eid].end)})
    e_s = sorted({eid for n in n_a for eid, _ in topo.node_edges[n]})
    n_far = sorted({n for eid in e_s for n in (topo.edges[eid].start, topo.edges[eid].end)} - set(n_a))

    sigs = {n: junction_signature(topo, n, settings) for n in n_a + n_far}

    def current(n):
        rec = lookup("junctions", n)
        return rec is not None and rec.signature == sigs[n] \
            and lookup("intersections", n) is not None and lookup("interconnections", n) is not None

    fresh = [n for n in n_a if not (reuse and current(n))] + [n for n in n_far if not current(n)]
    for n in fresh:
        V["junctions"][n] = JunctionRecord(_solve(topo, n, settings, diags), sigs[n])
        st.junction_solves += 1
    hook("junctions", st)

    def junction(n):
        rec = V["junctions"].get(n) or lookup("junctions", n)
        return rec.solution

    for n in fresh:
        V["intersections"][n] = _intersection(topo, V["junctions"][n].solution, settings, diags)
    hook("intersections", st)

    def inter(n):
        return V["intersections"].get(n) or lookup("intersections", n)

    touched = {eid for n in fresh for eid, _ in topo.node_edges[n]}
    if not reuse:
        touched.update(scope)
    for eid in e_s:
        if eid in touched or lookup("sections", eid) is None:
            V["sections"][eid] = _section(topo, eid, junction, inter, settings, diags)
    hook("sections", st)

    for eid in e_s:
        if eid in touched or lookup("lanes", eid) is None:
            V["lanes"][eid] = _lanes(topo, eid, settings, diags)
    hook("lanes", st)

    def lanes(eid):
        return V["lanes"].get(eid) or lookup("lanes", eid) or _lanes(topo, eid, settings, diags)

    for n in fresh:
        try:
            V["interconnections"][n] = _interconnections(topo, n, lanes, inter, settings)
        except Exception as exc:
            diags.append(f"{n}: interconnections failed ({exc})")
            V["interconnections"][n] = ()
    hook("interconnections", st)

    e_set = set(e_s)
    for oid, obj in sorted((objects or {}).items()):
        if lookup("objects", oid) is not None:
            if not obj.relative or obj.host_edge not in V["sections"]:
                continue
        elif obj.relative and obj.host_edge not in e_set:
            continue
        sec = (V["sections"].get(obj.host_edge) or lookup("sections", obj.host_edge)) if obj.relative else None
        pose = _pose(topo, obj, sec, diags)
        if pose is not None:
            V["objects"][oid] = pose
    hook("objects", st)
    return st


# ---------------------------------------------------------------------------
# generate / apply
# ---------------------------------------------------------------------------

def _surface_polys(sections: dict, inters: dict) -> tuple[list[str], list]:
    keys, polys = [], []
    for k in sorted(sections):
        p = sections[k].polygon
        if not p.is_empty:
            keys.append("s:" + k)
            polys.append(p)
    for k in sorted(inters):
        keys.append("i:" + k)
        polys.append(inters[k].polygon)
    return keys, polys


def _face_tree(topo: Topology):
    cache = topo.__dict__.get("_face_tree")
    if cache is None:
        ids = [fid for fid, f in topo.faces.items() if not f.universal]
        tree = STRtree([topo.faces[f].polygon for f in ids]) if ids else None
        cache = (ids, tree)
        topo.__dict__["_face_tree"] = cache
    return cache


def _blocks(topo: Topology, store: StreetModelStore, st: Staged, settings: Settings,
            changed_polys: list) -> None:
    ids, ftree = _face_tree(topo)
    if ftree is None:
        return
    todo = {f for f in ids if f not in store.collections["blocks"]}
    if changed_polys:
        hits = ftree.query(changed_polys, predicate="intersects")[1]
        todo.update(ids[i] for i in np.unique(hits).tolist())
    if not todo:
        return
    sections = {k: it.value for k, it in store.collections["sections"].items() if k in topo.edges}
    sections.update(st.values["sections"])
    inters = {k: it.value for k, it in store.collections["intersections"].items() if k in topo.nodes}
    inters.update(st.values["intersections"])
    _, polys = _surface_polys(sections, inters)
    stree = STRtree(polys) if polys else None
    grid = settings["geom.snap_grid"]
    for fid in sorted(todo):
        face = topo.faces[fid].polygon
        hits = sorted(stree.query(face, predicate="intersects").tolist()) if stree is not None else []
        if hits:
            try:
                cut = geom.boolean(face, [polys[i] for i in hits], "difference", grid)
            except Exception as exc:
                st.diagnostics.append(f"{fid}: block subtraction failed ({exc})")
                cut = []
            block = geom.as_polygon(unary_union(cut)) if cut else Polygon()
        else:
            block = face
        block = shapely.normalize(block)  # overlay output order is not canonical
        diags = () if not block.is_empty else (f"{fid}: block emptied by road surfaces",)
        st.diagnostics.extend(diags)
        st.values["blocks"][fid] = CityBlock(fid, block, diags)


def _validate(topo: Topology, st: Staged) -> None:
    for n, surf in st.values["intersections"].items():
        if n not in topo.nodes:
            raise InternalInconsistency(f"intersection for unknown node {n}")
        p = surf.polygon
        if p.is_empty or not p.is_valid:
            raise InternalInconsistency(f"{n}: invalid intersection surface")
        if p.distance(Point(topo.nodes[n])) > 1e-6:
            raise InternalInconsistency(f"{n}: intersection surface does not contain its node")
    for eid, sec in st.values["sections"].items():
        if eid not in topo.edges:
            raise InternalInconsistency(f"section for unknown edge {eid}")
        if not sec.polygon.is_valid or (sec.polygon.is_empty and not sec.degenerate):
            raise InternalInconsistency(f"{eid}: invalid section polygon")
    for eid in st.values["lanes"]:
        if eid not in topo.edges:
            raise InternalInconsistency(f"lanes for unknown edge {eid}")
    for n in st.values["interconnections"]:
        if n not in topo.nodes:
            raise InternalInconsistency(f"interconnections for unknown node {n}")
    for fid, blk in st.values["blocks"].items():
        if fid not in topo.faces or topo.faces[fid].universal:
            raise InternalInconsistency(f"block for unknown face {fid}")
        if not blk.polygon.is_valid:
            raise InternalInconsistency(f"{fid}: invalid block polygon")


def _stale_keys(store: StreetModelStore, topo: Topology) -> dict[str, set[str]]:
    out = {}
    for c in _NODE_KEYED:
        out[c] = {k for k in store.collections[c] if k not in topo.nodes}
    for c in _EDGE_KEYED:
        out[c] = {k for k in store.collections[c] if k not in topo.edges}
    out["blocks"] = {k for k in store.collections["blocks"]
                     if k not in topo.faces or topo.faces[k].universal}
    out["objects"] = {k for k in store.collections["objects"] if k not in store.object_inputs
                      or (store.object_inputs[k].relative
                          and store.object_inputs[k].host_edge not in topo.edges)}
    out["roundabouts"] = set()
    return out


def _commit(store: StreetModelStore, topo: Topology, st: Staged, stale: dict[str, set[str]],
            report: ChangeReport) -> None:
    for c in COLLECTIONS:
        report.added.setdefault(c, [])
        report.updated.setdefault(c, [])
        report.removed.setdefault(c, [])
    digests = {c: {k: content_hash(v) for k, v in st.values[c].items()} for c in COLLECTIONS}
    for c in COLLECTIONS:
        coll = store.collections[c]
        for k in sorted(stale.get(c, ())):
            if k in coll and k not in st.values[c]:
                del coll[k]
                report.removed[c].append(k)
        for k in sorted(st.values[c]):
            d = digests[c][k]
            old = coll.get(k)
            if old is None:
                coll[k] = Item(st.values[c][k], d, 1)
                report.added[c].append(k)
            elif old.digest != d:
                coll[k] = Item(st.values[c][k], d, old.version + 1)
                report.updated[c].append(k)
    store.topo = topo


def generate(store: StreetModelStore, topo: Topology, scope: Iterable[str] | None = None,
             hooks: Callable | None = None, staged: Staged | None = None,
             reuse: bool = True) -> ChangeReport:
    """Compute and atomically upsert results for ``scope`` (default: all edges)."""
    settings = store.settings
    report = ChangeReport()
    if scope is None:
        scope = list(topo.edges)
    scope = sorted(set(scope))
    try:
        if staged is None:
            with store._lock:
                snap = {c: dict(store.collections[c]) for c in
                        ("junctions", "intersections", "interconnections", "sections", "lanes", "objects")}
                objects = dict(store.object_inputs)

            def lookup(c, k):
                it = snap[c].get(k)
                return None if it is None else it.value

            staged = compute_partial(topo, scope, settings, lookup, objects, hooks, reuse)
        hook = hooks or (lambda stage, st: None)
        with store._lock:
            stale = _stale_keys(store, topo)
            changed = []
            for c in ("sections", "intersections"):
                coll = store.collections[c]
                for k, v in staged.values[c].items():
                    old = coll.get(k)
                    if old is None or old.digest != content_hash(v):
                        changed.append(v.polygon)
                        if old is not None:
                            changed.append(old.value.polygon)
                for k in stale[c]:
                    changed.append(coll[k].value.polygon)
            changed = [p for p in changed if not p.is_empty]
            _blocks(topo, store, staged, settings, changed)
            hook("blocks", staged)
            fp = topo.fingerprint() + str(hash(settings))
            if store.meta.get("roundabout_fp") != fp:
                cands = detect_roundabouts(topo, settings)
                stale["roundabouts"] = set(store.collections["roundabouts"])
                staged.values["roundabouts"] = {c.id: c for c in cands}
            hook("roundabouts", staged)
            _validate(topo, staged)
            hook("validate", staged)
            _commit(store, topo, staged, stale, report)
            store.meta["roundabout_fp"] = fp
            store.stats["junction_solves"] += staged.junction_solves
            store.stats["generate_calls"] += 1
    except Exception as exc:
        return ChangeReport(ok=False, diagnostics=(staged.diagnostics if staged else [])
                            + [f"generation aborted, store unchanged: {type(exc).__name__}: {exc}"])
    report.diagnostics = list(staged.diagnostics)
    report.stats["junction_solves"] = staged.junction_solves
    return report


def check_invariants(store: StreetModelStore, area_tol: float = 1e-6) -> list[str]:
    """Structural checks over a whole store; returns one message per violation."""
    topo = store.topo
    out: list[str] = []
    if topo is None:
        return out
    for c, keys in _stale_keys(store, topo).items():
        out.extend(f"{c}/{k}: references a missing network element" for k in sorted(keys))
    secs = store.values("sections")
    inters = store.values("intersections")
    tol = store.settings["geom.arc_tolerance"]
    for n, surf in sorted(inters.items()):
        if not surf.polygon.is_valid or surf.polygon.distance(Point(topo.nodes[n])) > 1e-6:
            out.append(f"intersections/{n}: invalid or does not contain its node")
    for eid, sec in sorted(secs.items()):
        p = sec.polygon
        if not p.is_valid or (p.is_empty and not sec.degenerate):
            out.append(f"sections/{eid}: invalid or empty without a degenerate flag")
            continue
        road = geom.buffer(topo.edges[eid].geometry, topo.axis_of(eid).half_width, tol).buffer(2 * tol)
        if p.difference(road).area > area_tol:
            out.append(f"sections/{eid}: leaves its road buffer")
        e = topo.edges[eid]
        for n in {e.start, e.end}:
            if n in inters and p.intersection(inters[n].polygon).area > area_tol:
                out.append(f"sections/{eid}: overlaps intersection {n}")
    keys, polys = _surface_polys(secs, inters)
    tree = STRtree(polys) if polys else None
    for fid, blk in sorted(store.values("blocks").items()):
        if not blk.polygon.is_valid:
            out.append(f"blocks/{fid}: invalid polygon")
            continue
        if tree is None or blk.polygon.is_empty:
            continue
        for i in tree.query(blk.polygon, predicate="intersects").tolist():
            if blk.polygon.intersection(polys[i]).area > area_tol:
                out.append(f"blocks/{fid}: overlaps {keys[i]}")
    return out


def add_objects(store: StreetModelStore, objects: Iterable[StreetObject]) -> ChangeReport:
    """Register objects and place them against the current network."""
    objs = list(objects)
    with store._lock:
        for o in objs:
            store.object_inputs[o.id] = o
    if store.topo is None:
        return ChangeReport()
    hosts = sorted({o.host_edge for o in objs if o.relative and o.host_edge in store.topo.edges})
    staged = Staged()
    for o in objs:
        sec = store.get("sections", o.host_edge) if o.relative else None
        pose = _pose(store.topo, o, sec, staged.diagnostics)
        if pose is not None:
            staged.values["objects"][o.id] = pose
    del hosts
    return generate(store, store.topo, [], staged=staged)


# ---------------------------------------------------------------------------
# network edits
# ---------------------------------------------------------------------------

def changed_edges(old: Topology | None, new: Topology) -> set[str]:
    """Edges of ``new`` whose geometry, endpoints or axis attributes differ from ``old``."""
    if old is None:
        return set(new.edges)
    out = set()
    for eid, e in new.edges.items():
        o = old.edges.get(eid)
        if o is None or (o.start, o.end) != (e.start, e.end) or not o.geometry.equals_exact(e.geometry, 0) \
                or old.axes[o.axis_id].content_hash() != new.axes[e.axis_id].content_hash():
            out.add(eid)
    # survivors around removed edges must be re-solved
    for eid, o in old.edges.items():
        if eid not in new.edges:
            for n in (o.start, o.end):
                if n in new.node_edges:
                    out.update(x for x, _ in new.node_edges[n])
    return out


def update_network(store: StreetModelStore, new_topo: Topology, hooks=None) -> ChangeReport:
    scope = changed_edges(store.topo, new_topo)
    return generate(store, new_topo, scope, hooks)


def delete_axis(store: StreetModelStore, topo: Topology, edge_id: str) -> tuple[ChangeReport, Topology]:
    """Remove the axis carrying ``edge_id`` and everything depending on it."""
    if edge_id not in topo.edges and edge_id not in topo.axes:
        raise NotFound(f"unknown edge {edge_id}")
    aid = topo.edges[edge_id].axis_id if edge_id in topo.edges else edge_id
    axes = [a for k, a in topo.axes.items() if k != aid]
    new_topo = build_topology(axes, topo.snap_tol)
    return update_network(store, new_topo), new_topo


# ---------------------------------------------------------------------------
# partitioning and parallel runs
# ---------------------------------------------------------------------------

def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 50) -> np.ndarray:
    """Lloyd iterations from a farthest-point start; every cluster stays non-empty."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if not 1 <= k <= n:
        raise InvalidParameter(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = [pts[int(rng.integers(n))]]
    d2 = ((pts - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        i = int(np.argmax(d2))
        centers.append(pts[i])
        d2 = np.minimum(d2, ((pts - pts[i]) ** 2).sum(1))
    C = np.asarray(centers)
    labels = np.zeros(n, dtype=int)
    for it in range(max_iter):
        dist = ((pts[:, None, :] - C[None]) ** 2).sum(-1)
        new = dist.argmin(1)
        for j in range(k):
            if not np.any(new == j):
                # refill with the worst-served point of a cluster that can spare one
                sizes = np.bincount(new, minlength=k)
                cost = np.where(sizes[new] > 1, dist[np.arange(n), new], -1.0)
                new[int(np.argmax(cost))] = j
        if it and np.array_equal(new, labels):
            break
        labels = new
        C = np.asarray([pts[labels == j].mean(0) for j in range(k)])
    return labels


def partition_axes(axes: Iterable[RoadAxis], k: int, seed: int = 0, max_iter: int = 50) -> list[list[str]]:
    axes = sorted(axes, key=lambda a: a.id)
    if not 1 <= k <= len(axes):
        raise InvalidParameter(f"k must be in [1, {len(axes)}], got {k}")
    cents = np.asarray([[a.geometry.centroid.x, a.geometry.centroid.y] for a in axes])
    labels = kmeans(cents, k, seed, max_iter)
    out = [[] for _ in range(k)]
    for a, lab in zip(axes, labels):
        out[lab].append(a.id)
    return out


def edges_of_axes(topo: Topology, axis_ids: Iterable[str]) -> list[str]:
    ids = set(axis_ids)
    return sorted(eid for eid, e in topo.edges.items() if e.axis_id in ids)


def _worker(args):
    topo, scope, settings = args
    return compute_partial(topo, scope, settings)


def build_parallel(store: StreetModelStore, topo: Topology, workers: int) -> ChangeReport:
    """Partition axes with k-means and compute each cluster in its own process."""
    s = store.settings
    clusters = partition_axes(topo.axes.values(), workers, s["engine.kmeans_seed"], s["engine.kmeans_max_iter"])
    tokens = [f"worker-{i}" for i in range(len(clusters))]
    scopes = []
    for tok, cl in zip(tokens, clusters):
        granted = acquire(store, cl, tok)
        scopes.append(edges_of_axes(topo, granted))
    try:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_worker, [(topo, sc, s) for sc in scopes]))
        merged = Staged()
        for p in parts:
            for c in COLLECTIONS:
                for k, v in p.values[c].items():
                    merged.values[c].setdefault(k, v)
            merged.diagnostics.extend(p.diagnostics)
            merged.junction_solves += p.junction_solves
        # a junction shared by clusters was solved by each; keep one copy
        return generate(store, topo, list(topo.edges), staged=merged)
    finally:
        for tok in tokens:
            release(store, tok)


def run_workers(store: StreetModelStore, topo: Topology, workers: int, seed: int = 0,
                clusters: int = 16) -> dict[str, set[str]]:
    """Threads racing over every axis through the semaphore ledger.

    Axes are split into k-means clusters; each worker walks the clusters in
    its own random order, claims whatever is still untagged and generates
    it.  Tags are held until every worker is done, so each axis is processed
    by exactly one worker.
    """
    rng = np.random.default_rng(seed)
    parts = partition_axes(topo.axes.values(), min(clusters, len(topo.axes)), seed)
    orders = [rng.permutation(len(parts)).tolist() for _ in range(workers)]
    processed: dict[str, set[str]] = {f"t{i}": set() for i in range(workers)}
    errors: list[BaseException] = []

    def work(i):
        tok = f"t{i}"
        try:
            for j in orders[i]:
                granted = acquire(store, parts[j], tok) - processed[tok]
                if not granted:
                    continue
                rep = generate(store, topo, edges_of_axes(topo, granted))
                if not rep.ok:
                    raise InternalInconsistency("; ".join(rep.diagnostics[-1:]))
                processed[tok].update(granted)
        except BaseException as exc:
            errors.append(exc)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for i in range(workers):
        release(store, f"t{i}")
    if errors:
        raise errors[0]
    return processed
