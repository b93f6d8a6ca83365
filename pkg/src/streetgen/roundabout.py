"""Roundabout detection from arc-shaped geometry and street names."""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from shapely.geometry import Point
from sklearn.cluster import DBSCAN

from . import geom
from .errors import NoCircle
from .geom import Point2
from .network import Topology
from .settings import DEFAULT_SETTINGS, Settings

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


def trigrams(text: str) -> set[str]:
    """Padded letter trigrams: two leading blanks and one trailing blank per word."""
    out: set[str] = set()
    for word in _WORD.findall(text.lower()):
        padded = f"  {word} "
        out.update(padded[i:i + 3] for i in range(len(padded) - 2))
    return out


def trigram_similarity(a: str, b: str) -> float:
    ta, tb = trigrams(a), trigrams(b)
    if not ta and not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


@dataclass(frozen=True)
class RoundaboutCandidate:
    id: str
    face_id: str | None
    center: Point2
    radius: float
    score: float
    evidence: dict[str, float]

    @property
    def accepted(self) -> bool:
        return self.evidence.get("accepted", 0.0) > 0


def _turn(a, b, c) -> float:
    a1 = math.atan2(b[1] - a[1], b[0] - a[0])
    a2 = math.atan2(c[1] - b[1], c[0] - b[0])
    return (a2 - a1 + math.pi) % (2 * math.pi) - math.pi


def _quadruplets(coords: list[Point2], closed: bool):
    pts = coords[:-1] if closed and len(coords) > 1 and coords[0] == coords[-1] else coords
    n = len(pts)
    if closed:
        for i in range(n if n >= 4 else 0):
            yield tuple(pts[(i + k) % n] for k in range(4))
    else:
        for i in range(n - 3):
            yield tuple(pts[i:i + 4])


def arc_support(coords: list[Point2], closed: bool, settings: Settings = DEFAULT_SETTINGS):
    """(cx, cy, r) for every quadruplet of successive vertices lying on a circle."""
    tol = settings["roundabout.hough_tol"]
    r_min, r_max = settings["roundabout.r_min"], settings["roundabout.r_max"]
    max_turn = math.radians(settings["roundabout.max_deflection_deg"])
    out = []
    for q in _quadruplets([tuple(c[:2]) for c in coords], closed):
        turns = [_turn(q[0], q[1], q[2]), _turn(q[1], q[2], q[3])]
        if any(abs(t) < 1e-9 or abs(t) > max_turn for t in turns) or turns[0] * turns[1] <= 0:
            continue
        try:
            c, r = geom.fit_circle_3pts(q[0], q[1], q[2])
        except NoCircle:
            continue
        if not r_min <= r <= r_max:
            continue
        if abs(math.dist(c, q[3]) - r) <= tol:
            out.append((c[0], c[1], r))
    return out


def _face_names(topo: Topology, face) -> list[str]:
    return [topo.axis_of(e).name for e in face.edge_ids]


def toponym_evidence(names: list[str], settings: Settings = DEFAULT_SETTINGS) -> tuple[float, float]:
    """(same-name, keyword) evidence for a face's bounding street names."""
    keywords = {k.strip().lower() for k in settings["roundabout.keywords"].split(",") if k.strip()}
    thr = settings["roundabout.name_sim"]
    named = [n for n in names if n.strip()]
    same = 0.0
    if len(named) >= 2 and len(named) == len(names):
        uniq = sorted(set(named))
        if all(trigram_similarity(a, b) >= thr for a, b in combinations(uniq, 2)):
            same = 1.0
    kw = 1.0 if any(tok in keywords for n in named for tok in _WORD.findall(n.lower())) else 0.0
    return same, kw


def score(evidence: dict[str, float], settings: Settings = DEFAULT_SETTINGS) -> float:
    w = {"geometric": settings["roundabout.weight_geometric"],
         "same_name": settings["roundabout.weight_same_name"],
         "keyword": settings["roundabout.weight_keyword"]}
    total = sum(w.values())
    if total <= 0:
        return 0.0
    return sum(w[k] * evidence.get(k, 0.0) for k in w) / total


def detect_roundabouts(topo: Topology, settings: Settings = DEFAULT_SETTINGS) -> list[RoundaboutCandidate]:
    samples = []
    for aid in sorted(topo.axes):
        samples.extend(arc_support(list(topo.axes[aid].geometry.coords), False, settings))
    faces = {fid: f for fid, f in topo.faces.items() if not f.universal}
    for fid in sorted(faces):
        ring = list(faces[fid].polygon.exterior.coords)
        samples.extend(arc_support(ring, True, settings))

    candidates: list[RoundaboutCandidate] = []
    used_faces: set[str] = set()
    if len(samples) >= settings["roundabout.min_pts"]:
        X = np.asarray(sorted(samples))
        labels = DBSCAN(eps=settings["roundabout.eps"],
                        min_samples=settings["roundabout.min_pts"]).fit_predict(X)
        for lab in sorted(set(labels.tolist()) - {-1}):
            members = X[labels == lab]
            cx, cy, r = np.median(members, axis=0).tolist()
            face_id = _face_at(faces, (cx, cy))
            names = _face_names(topo, faces[face_id]) if face_id else []
            same, kw = toponym_evidence(names, settings) if names else (0.0, 0.0)
            if face_id:
                used_faces.add(face_id)
            candidates.append(_candidate(face_id, (cx, cy), r, 1.0, same, kw, settings))
    for fid in sorted(faces):
        if fid in used_faces:
            continue
        same, kw = toponym_evidence(_face_names(topo, faces[fid]), settings)
        if same or kw:
            poly = faces[fid].polygon
            c = poly.centroid
            candidates.append(_candidate(fid, (c.x, c.y), math.sqrt(poly.area / math.pi),
                                         0.0, same, kw, settings))
    candidates.sort(key=lambda c: c.id)
    return candidates


def _face_at(faces, p: Point2) -> str | None:
    pt = Point(p)
    for fid in sorted(faces):
        if faces[fid].polygon.contains(pt):
            return fid
    return None


def _candidate(face_id, center, radius, g, same, kw, settings) -> RoundaboutCandidate:
    ev = {"geometric": g, "same_name": same, "keyword": kw}
    s = score(ev, settings)
    ev["accepted"] = 1.0 if s >= settings["roundabout.score_threshold"] else 0.0
    key = f"{face_id}|{center[0]:.1f}|{center[1]:.1f}"
    rid = "R" + hashlib.blake2b(key.encode(), digest_size=6).hexdigest()
    return RoundaboutCandidate(rid, face_id, (float(center[0]), float(center[1])), float(radius), s, ev)
