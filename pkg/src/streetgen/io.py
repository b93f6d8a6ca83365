"""GeoJSON network input, GeoJSON/XML export and pickled store state."""
from __future__ import annotations

import json
import math
import pickle
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import LineString, mapping, shape

from .engine import StreetModelStore
from .errors import ExportError, InvalidObject, NetworkParseError, StreetGenError
from .network import RoadAxis
from .objects import CROSSING_KIND, PedestrianCrossing, StreetObject
from .settings import DEFAULT_SETTINGS, Settings

LAYERS = ("sections", "intersections", "blocks", "lanes", "interconnections", "objects", "roundabouts")
LOCAL_CRS = "local-planar-metres"
STATE_VERSION = 1

_AXIS_KEYS = {
    "width": "network.default_width",
    "importance": "network.default_importance",
    "lanes": "network.default_lanes",
    "direction": "network.default_direction",
}


def _feature_id(feat: dict, index: int) -> str:
    props = feat.get("properties") or {}
    fid = feat.get("id", props.get("id"))
    return str(fid) if fid is not None else f"feature{index}"


def _parse_object(fid: str, geom, props: dict) -> StreetObject:
    kind = props["kind"]
    angle = float(props.get("angle", 0.0))
    orient = props.get("orientation", "Absolute")
    if "host_edge" in props:
        kw = dict(id=fid, position_mode=props.get("position", "AxisRelative"), host_edge=str(props["host_edge"]),
                  s=float(props["s"]), lateral_offset=float(props.get("offset", 0.0)),
                  orientation_mode=orient, angle=angle)
    else:
        kw = dict(id=fid, absolute_point=(geom.x, geom.y), orientation_mode=orient, angle=angle)
    if kind == CROSSING_KIND:
        return PedestrianCrossing(**kw, width=float(props.get("crossing_width", 3.0)),
                                  crossing_angle=math.radians(float(props.get("crossing_angle_deg", 0.0))))
    return StreetObject(kind=kind, **kw)


def load_network(path, settings: Settings = DEFAULT_SETTINGS):
    """Read road axes (LineStrings) and street objects (Points with ``kind``).

    Returns ``(axes, objects, warnings)``.  Bad features are skipped with a
    warning naming them; a malformed file raises NetworkParseError.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise NetworkParseError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection" \
            or not isinstance(doc.get("features"), list):
        raise NetworkParseError(f"{path}: expected a GeoJSON FeatureCollection")
    axes, objects, warnings = [], [], []
    seen = set()
    for i, feat in enumerate(doc["features"]):
        fid = _feature_id(feat, i) if isinstance(feat, dict) else f"feature{i}"
        try:
            g = shape(feat["geometry"])
        except Exception as exc:
            warnings.append(f"{fid}: unreadable geometry ({exc}); feature skipped")
            continue
        props = dict(feat.get("properties") or {})
        if fid in seen:
            warnings.append(f"{fid}: duplicate feature id; feature skipped")
            continue
        if g.geom_type == "Point" and "kind" in props:
            try:
                objects.append(_parse_object(fid, g, props))
                seen.add(fid)
            except (KeyError, ValueError, InvalidObject) as exc:
                warnings.append(f"{fid}: invalid object ({exc}); feature skipped")
            continue
        if g.geom_type != "LineString":
            warnings.append(f"{fid}: {g.geom_type} feature rejected, road axes must be LineStrings")
            continue
        for key, skey in _AXIS_KEYS.items():
            if props.get(key) is None:
                props[key] = settings[skey]
                warnings.append(f"{fid}: missing '{key}', default {settings[skey]!r} used")
        imp = str(props["importance"])
        if props.get("speed") is None:
            sp = settings.get(f"speed.by_importance.{imp}", 30.0)
            props["speed"] = sp
            warnings.append(f"{fid}: missing 'speed', default {sp!r} used")
        try:
            axis = RoadAxis(fid, LineString([c[:2] for c in g.coords]), float(props["width"]) / 2.0, imp,
                            avg_speed=float(props["speed"]), lane_count=int(props["lanes"]),
                            direction=str(props["direction"]), name=str(props.get("name") or ""))
        except (ValueError, TypeError, StreetGenError) as exc:
            warnings.append(f"{fid}: invalid attributes ({exc}); feature skipped")
            continue
        seen.add(fid)
        axes.append(axis)
    return axes, objects, warnings


def axes_to_geojson(axes) -> dict:
    feats = []
    for a in sorted(axes, key=lambda a: a.id):
        feats.append({"type": "Feature", "id": a.id, "geometry": mapping(a.geometry),
                      "properties": {"width": a.width, "importance": a.importance.value,
                                     "speed": a.avg_speed, "lanes": a.lane_count,
                                     "direction": a.direction.value, "name": a.name}})
    return {"type": "FeatureCollection", "features": feats}


def write_network(axes, path) -> None:
    Path(path).write_text(json.dumps(axes_to_geojson(axes), sort_keys=True), encoding="utf-8")


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _round(g):
    out = shapely.transform(g, lambda c: np.round(c, 3) + 0.0)  # + 0.0 folds -0.0
    return mapping(out)


def _feat(fid: str, g, props: dict) -> dict:
    return {"type": "Feature", "id": fid, "geometry": _round(g), "properties": {"id": fid, **props}}


def _layer_features(store: StreetModelStore, layer: str) -> list[dict]:
    topo = store.topo
    vals = store.values(layer if layer != "objects" else "objects")
    feats = []
    if layer == "sections":
        for k in sorted(vals):
            v = vals[k]
            feats.append(_feat(k, v.polygon, {"edge_id": k, "axis_id": topo.edges[k].axis_id,
                                              "degenerate": v.degenerate}))
    elif layer == "intersections":
        for k in sorted(vals):
            v = vals[k]
            feats.append(_feat(k, v.polygon, {"node_id": k, "fallback": v.fallback,
                                              "edges": sorted(e for e, _ in topo.node_edges[k])}))
    elif layer == "blocks":
        for k in sorted(vals):
            feats.append(_feat(k, vals[k].polygon, {"face_id": k}))
    elif layer == "lanes":
        for k in sorted(vals):
            for lane in vals[k].lanes:
                feats.append(_feat(lane.id, lane.geometry, {
                    "edge_id": k, "axis_id": topo.edges[k].axis_id, "index": lane.index,
                    "side": lane.side.value, "offset": round(lane.offset, 3),
                    "forward": lane.direction_matches_axis}))
    elif layer == "interconnections":
        for k in sorted(vals):
            for ic in vals[k]:
                feats.append(_feat(ic.id, ic.trajectory, {"node_id": k, "from": ic.from_lane, "to": ic.to_lane}))
    elif layer == "objects":
        for k in sorted(vals):
            pose = vals[k]
            obj = store.object_inputs[k]
            props = {"kind": obj.kind, "host_edge": pose.host_edge, "angle": round(pose.angle, 6)}
            feats.append(_feat(k, shapely.Point(pose.point), props))
            if pose.surface is not None:
                feats.append(_feat(f"{k}#surface", pose.surface, {**props, "object_id": k}))
    elif layer == "roundabouts":
        for k in sorted(vals):
            c = vals[k]
            feats.append(_feat(k, shapely.Point(c.center), {
                "face_id": c.face_id, "radius": round(c.radius, 3), "score": round(c.score, 6),
                "accepted": c.accepted, **{f"evidence_{e}": v for e, v in sorted(c.evidence.items())}}))
    else:
        raise ExportError(f"unknown layer {layer!r}")
    return feats


def export_geojson(store: StreetModelStore, path, layers=LAYERS) -> list[Path]:
    """Write ``<path>/<layer>.geojson`` for each layer; returns the files written."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"{out}: cannot create output directory ({exc.strerror})") from None
    written = []
    for layer in layers:
        feats = [] if store.topo is None else _layer_features(store, layer)
        doc = {"type": "FeatureCollection", "name": layer, "crs_local": LOCAL_CRS, "features": feats}
        f = out / f"{layer}.geojson"
        try:
            f.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")), encoding="utf-8")
        except OSError as exc:
            raise ExportError(f"{f}: cannot write ({exc.strerror})") from None
        written.append(f)
    return written


def _pts(line) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in (c[:2] for c in line.coords))


def roundabout_nodes(store: StreetModelStore) -> set[str]:
    """Nodes on the ring of an accepted roundabout candidate."""
    topo = store.topo
    out = set()
    for cand in store.values("roundabouts").values():
        if not cand.accepted:
            continue
        face = topo.faces.get(cand.face_id) if cand.face_id else None
        if face is not None and not face.universal:
            for eid in face.edge_ids:
                e = topo.edges[eid]
                out.update((e.start, e.end))
        else:
            tol = max(1.0, 0.1 * cand.radius)
            out.update(n for n, p in topo.nodes.items()
                       if abs(math.dist(p, cand.center) - cand.radius) <= tol)
    return out


def traffic_xml(store: StreetModelStore) -> str:
    topo = store.topo
    root = ET.Element("network", {"schema": "sgtraffic-v1"})
    secs = ET.SubElement(root, "sections")
    lanes = store.values("lanes")
    for eid in sorted(topo.edges if topo else ()):
        el = lanes.get(eid)
        if el is None:
            raise ExportError(f"no lanes generated for edge {eid}")
        s = ET.SubElement(secs, "section", {"id": eid})
        by_id = {l.id: l for l in el.lanes}
        groups = sorted(el.groups, key=lambda g: min(by_id[i].index for i in g.lane_ids))
        for g in groups:
            ge = ET.SubElement(s, "lanegroup", {"dir": "fwd" if g.direction_matches_axis else "rev"})
            for lane in sorted((by_id[i] for i in g.lane_ids), key=lambda l: l.index):
                ET.SubElement(ge, "lane", {"id": lane.id, "points": _pts(lane.geometry)})
    inters = ET.SubElement(root, "intersections")
    ics = store.values("interconnections")
    rb = roundabout_nodes(store) if topo else set()
    for n in sorted(topo.nodes if topo else ()):
        ie = ET.SubElement(inters, "intersection", {"id": n, "kind": "roundabout" if n in rb else "plain"})
        for ic in sorted(ics.get(n, ()), key=lambda c: (c.from_lane, c.to_lane)):
            ET.SubElement(ie, "interconnection", {"from": ic.from_lane, "to": ic.to_lane,
                                                  "points": _pts(ic.trajectory)})
    ET.indent(root)
    return '<?xml version="1.0" encoding="utf-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def export_traffic_xml(store: StreetModelStore, path) -> Path:
    text = traffic_xml(store)
    p = Path(path)
    try:
        p.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"{p}: cannot write ({exc.strerror})") from None
    return p


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

def save_state(store: StreetModelStore, path) -> None:
    with open(path, "wb") as fh:
        pickle.dump({"version": STATE_VERSION, "store": store}, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_state(path) -> StreetModelStore:
    try:
        with open(path, "rb") as fh:
            data = pickle.load(fh)
    except (OSError, pickle.UnpicklingError, EOFError) as exc:
        raise NetworkParseError(f"{path}: unreadable state file ({exc})") from None
    if not isinstance(data, dict) or data.get("version") != STATE_VERSION:
        raise NetworkParseError(f"{path}: unsupported state file version")
    return data["store"]
