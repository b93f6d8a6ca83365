"""Street objects placed in absolute or road-relative coordinates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from shapely.geometry import LineString, Point, Polygon

from . import geom
from .errors import CrossingOutOfSurface, InvalidObject, InvalidParameter
from .geom import Point2

CROSSING_KIND = "pedestrian_crossing"


class PositionMode(str, Enum):
    ABSOLUTE = "Absolute"
    AXIS_RELATIVE = "AxisRelative"
    SIDEWALK_RELATIVE = "SidewalkRelative"


class OrientationMode(str, Enum):
    ABSOLUTE = "Absolute"
    AXIS_RELATIVE = "AxisRelative"


@dataclass(frozen=True)
class StreetObject:
    id: str
    kind: str
    position_mode: PositionMode = PositionMode.ABSOLUTE
    absolute_point: Point2 | None = None
    host_edge: str | None = None
    s: float | None = None
    lateral_offset: float = 0.0
    orientation_mode: OrientationMode = OrientationMode.ABSOLUTE
    angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position_mode", PositionMode(self.position_mode))
        object.__setattr__(self, "orientation_mode", OrientationMode(self.orientation_mode))
        if self.position_mode is PositionMode.ABSOLUTE:
            if self.absolute_point is None:
                raise InvalidObject(f"{self.id}: absolute mode needs absolute_point")
            if self.host_edge is not None or self.s is not None:
                raise InvalidObject(f"{self.id}: absolute mode takes no host edge or abscissa")
            if self.orientation_mode is OrientationMode.AXIS_RELATIVE:
                raise InvalidObject(f"{self.id}: axis-relative orientation needs a host edge")
        else:
            if self.host_edge is None or self.s is None:
                raise InvalidObject(f"{self.id}: relative mode needs host_edge and s")
            if self.absolute_point is not None:
                raise InvalidObject(f"{self.id}: relative mode takes no absolute_point")
            if self.s < 0:
                raise InvalidObject(f"{self.id}: s must be >= 0")

    @property
    def relative(self) -> bool:
        return self.position_mode is not PositionMode.ABSOLUTE


@dataclass(frozen=True)
class PedestrianCrossing(StreetObject):
    kind: str = CROSSING_KIND
    width: float = 3.0
    crossing_angle: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if self.kind != CROSSING_KIND:
            raise InvalidObject(f"{self.id}: crossing kind is fixed")
        if not self.relative:
            raise InvalidObject(f"{self.id}: crossings are placed along an axis")
        if not self.width >= 0.5:
            raise InvalidObject(f"{self.id}: crossing width {self.width} below 0.5 m")
        if not abs(self.crossing_angle) < math.radians(80):
            raise InvalidObject(f"{self.id}: crossing angle too oblique")


@dataclass(frozen=True)
class CatalogEntry:
    kind: str
    description: str
    orientation: OrientationMode


DEFAULT_CATALOG_TEXT = """\
pedestrian_crossing = Pedestrian crossing | AxisRelative
tree = Street tree | Absolute
bench = Public bench | AxisRelative
street_light = Street light | AxisRelative
traffic_light = Traffic light | AxisRelative
bus_stop = Bus stop | AxisRelative
"""


class ObjectCatalog(dict):
    """Kind -> entry map; metadata only, never used for placement."""

    @classmethod
    def parse(cls, text: str) -> "ObjectCatalog":
        cat = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParameter(f"catalog line {lineno}: expected 'kind = description | mode'")
            key, value = (p.strip() for p in line.split("=", 1))
            desc, _, mode = value.partition("|")
            try:
                orient = OrientationMode(mode.strip() or "Absolute")
            except ValueError:
                raise InvalidParameter(f"catalog line {lineno}: bad orientation {mode.strip()!r}") from None
            cat[key] = CatalogEntry(key, desc.strip(), orient)
        return cat

    @classmethod
    def load(cls, path) -> "ObjectCatalog":
        cat = cls.parse(DEFAULT_CATALOG_TEXT)
        cat.update(cls.parse(Path(path).read_text(encoding="utf-8")))
        return cat

    def dump(self) -> str:
        return "".join(f"{k} = {e.description} | {e.orientation.value}\n" for k, e in sorted(self.items()))


DEFAULT_CATALOG = ObjectCatalog.parse(DEFAULT_CATALOG_TEXT)


def _frame(axis: LineString, s: float) -> tuple[Point2, tuple[float, float]]:
    if s > axis.length + 1e-9:
        raise InvalidObject(f"abscissa {s} beyond axis length {axis.length}")
    s = min(s, axis.length)
    return geom.interpolate(axis, s), geom.direction_at(axis, s)


def _ray_hit(origin: Point2, d: tuple[float, float], poly: Polygon) -> Point2 | None:
    """Nearest crossing of the ray origin + t d (t > 0) with the polygon boundary."""
    minx, miny, maxx, maxy = poly.bounds
    reach = 2.0 * math.hypot(maxx - minx, maxy - miny) + 1.0
    ray = LineString([origin, (origin[0] + d[0] * reach, origin[1] + d[1] * reach)])
    inter = ray.intersection(poly.boundary)
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
    pts = [p for p in pts if math.dist(p, origin) > 1e-12]
    if not pts:
        return None
    return min(pts, key=lambda p: math.dist(p, origin))


def place_object(obj: StreetObject, axis: LineString | None = None,
                 section: Polygon | None = None) -> tuple[Point2, float]:
    """World position and angle of an object."""
    if not obj.relative:
        return (float(obj.absolute_point[0]), float(obj.absolute_point[1])), obj.angle
    if axis is None:
        raise InvalidObject(f"{obj.id}: host edge {obj.host_edge!r} not available")
    p, (tx, ty) = _frame(axis, obj.s)
    heading = math.atan2(ty, tx)
    world_angle = heading + obj.angle if obj.orientation_mode is OrientationMode.AXIS_RELATIVE else obj.angle
    nx, ny = -ty, tx
    if obj.position_mode is PositionMode.AXIS_RELATIVE:
        off = obj.lateral_offset
        return (p[0] + nx * off, p[1] + ny * off), world_angle
    if section is None:
        raise InvalidObject(f"{obj.id}: sidewalk placement needs the section surface")
    side = 1.0 if obj.lateral_offset >= 0 else -1.0
    hit = _ray_hit(p, (nx * side, ny * side), geom.as_polygon(section))
    if hit is None:
        raise InvalidObject(f"{obj.id}: no sidewalk boundary at s={obj.s}")
    back = abs(obj.lateral_offset)
    return (hit[0] - nx * side * back, hit[1] - ny * side * back), world_angle


def _ring_path(ring: LineString, a: Point2, b: Point2) -> list[Point2]:
    """Shorter path along a closed ring from a to b."""
    total = ring.length
    sa, sb = geom.locate_along(ring, a), geom.locate_along(ring, b)
    if sa <= sb:
        fwd = geom.substring(ring, sa, sb)
        back_len = total - (sb - sa)
        if fwd.length <= back_len:
            return [a] + list(fwd.coords)[1:-1] + [b]
        path = list(geom.substring(ring, sb, total).coords) + list(geom.substring(ring, 0, sa).coords)[1:]
        return [a] + path[::-1][1:-1] + [b]
    return _ring_path(ring, b, a)[::-1]


def crossing_surface(pc: PedestrianCrossing, axis: LineString, section,
                     s_range: tuple[float, float] | None = None) -> Polygon:
    """Parallelogram-like band across the section.

    ``pc.width`` is measured perpendicular to the crossing direction, so
    the band meets the axis over ``width / cos(crossing_angle)``.
    """
    if hasattr(section, "polygon"):
        s_range = s_range or (section.start_s, section.end_s)
        section = section.polygon
    poly = geom.as_polygon(section)
    if poly.geom_type != "Polygon" or poly.is_empty:
        raise CrossingOutOfSurface(f"{pc.id}: host section is not a simple polygon")
    half = pc.width / (2.0 * math.cos(pc.crossing_angle))
    s0, s1 = pc.s - half, pc.s + half
    lo, hi = s_range if s_range is not None else (0.0, axis.length)
    if s0 < lo - 1e-9 or s1 > hi + 1e-9:
        raise CrossingOutOfSurface(f"{pc.id}: [{s0:.3f}, {s1:.3f}] outside section [{lo:.3f}, {hi:.3f}]")
    ring = LineString(poly.exterior.coords)
    left, right = [], []
    for s in (s0, s1):
        p, (tx, ty) = _frame(axis, s)
        if not poly.covers(Point(p)):
            raise CrossingOutOfSurface(f"{pc.id}: axis point at s={s:.3f} outside the section")
        c, sn = math.cos(pc.crossing_angle), math.sin(pc.crossing_angle)
        nx, ny = -ty, tx
        d = (nx * c - ny * sn, nx * sn + ny * c)  # left normal rotated by the crossing angle
        hl = _ray_hit(p, d, poly)
        hr = _ray_hit(p, (-d[0], -d[1]), poly)
        if hl is None or hr is None:
            raise CrossingOutOfSurface(f"{pc.id}: crossing ray misses the section boundary")
        left.append(hl)
        right.append(hr)
    coords = [right[0], left[0]]
    coords += _ring_path(ring, left[0], left[1])[1:]
    coords += [right[1]]
    coords += _ring_path(ring, right[1], right[0])[1:]
    out = Polygon(coords)
    if not out.is_valid:
        out = out.buffer(0)
    return geom.as_polygon(out)
