"""Global settings table.

Settings are a flat ``key -> value`` map.  Files use one ``key = value``
pair per line; ``#`` starts a comment.  Unknown keys and out-of-range values
are rejected at load time.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Mapping

from .errors import SettingsError

ENV_VAR = "STREETGEN_SETTINGS"


@dataclass(frozen=True)
class _Spec:
    kind: type
    default: Any
    lo: float | None = None
    hi: float | None = None
    choices: tuple[str, ...] | None = None
    lo_open: bool = False


_IMPORTANCE = ("Major", "Medium", "Residential")
_DIRECTION = ("Direct", "Reverse", "Both")

SPECS: dict[str, _Spec] = {
    "geom.arc_tolerance": _Spec(float, 0.01, 0.0, 10.0, lo_open=True),
    "geom.snap_grid": _Spec(float, 1e-6, 0.0, 0.01),
    "network.snap_tol": _Spec(float, 0.05, 0.0, 10.0, lo_open=True),
    "network.default_width": _Spec(float, 7.0, 0.0, 100.0, lo_open=True),
    "network.default_importance": _Spec(str, "Residential", choices=_IMPORTANCE),
    "network.default_lanes": _Spec(int, 2, 1, 12),
    "network.default_direction": _Spec(str, "Both", choices=_DIRECTION),
    "speed.by_importance.Major": _Spec(float, 50.0, 0.0, 300.0, lo_open=True),
    "speed.by_importance.Medium": _Spec(float, 40.0, 0.0, 300.0, lo_open=True),
    "speed.by_importance.Residential": _Spec(float, 30.0, 0.0, 300.0, lo_open=True),
    "radius.method": _Spec(str, "guess", choices=("guess", "speed")),
    "radius.by_importance.Major": _Spec(float, 7.6, 0.0, 100.0, lo_open=True),
    "radius.by_importance.Medium": _Spec(float, 4.9, 0.0, 100.0, lo_open=True),
    "radius.by_importance.Residential": _Spec(float, 3.0, 0.0, 100.0, lo_open=True),
    "radius.min": _Spec(float, 0.15, 0.0, 10.0, lo_open=True),
    "radius.max": _Spec(float, 30.0, 0.0, 1000.0, lo_open=True),
    "junction.misplaced_factor": _Spec(float, 1.5, 0.0, 100.0, lo_open=True),
    "junction.tie_break": _Spec(str, "lexicographic", choices=("lexicographic",)),
    "junction.max_border_fraction": _Spec(float, 0.45, 0.0, 0.5, lo_open=True),
    "surface.local_window": _Spec(float, 2.0, 0.0, 100.0, lo_open=True),
    "surface.overcut_factor": _Spec(float, 0.1, 0.0, 10.0, lo_open=True),
    "transition.default_mode": _Spec(str, "symmetric", choices=("symmetric", "left", "right")),
    "transition.length_factor": _Spec(float, 4.0, 0.0, 100.0, lo_open=True),
    "lanes.min_length": _Spec(float, 0.01, 0.0, 100.0),
    "interconnection.samples": _Spec(int, 16, 2, 1000),
    "interconnection.parallel_angle_deg": _Spec(float, 5.0, 0.0, 45.0),
    "roundabout.hough_tol": _Spec(float, 0.3, 0.0, 100.0, lo_open=True),
    "roundabout.r_min": _Spec(float, 2.0, 0.0, 1000.0),
    "roundabout.r_max": _Spec(float, 30.0, 0.0, 1000.0, lo_open=True),
    "roundabout.max_deflection_deg": _Spec(float, 45.0, 0.0, 180.0, lo_open=True),
    "roundabout.eps": _Spec(float, 3.0, 0.0, 1000.0, lo_open=True),
    "roundabout.min_pts": _Spec(int, 3, 1, 1000),
    "roundabout.name_sim": _Spec(float, 0.6, 0.0, 1.0),
    "roundabout.keywords": _Spec(str, "PL,RPT"),
    "roundabout.weight_geometric": _Spec(float, 0.5, 0.0, 1000.0),
    "roundabout.weight_same_name": _Spec(float, 0.3, 0.0, 1000.0),
    "roundabout.weight_keyword": _Spec(float, 0.2, 0.0, 1000.0),
    "roundabout.score_threshold": _Spec(float, 0.5, 0.0, 1.0),
    "objects.min_crossing_width": _Spec(float, 0.5, 0.0, 100.0),
    "engine.kmeans_seed": _Spec(int, 0, 0, 2**31 - 1),
    "engine.kmeans_max_iter": _Spec(int, 50, 1, 100000),
}


def _coerce(key: str, raw: Any) -> Any:
    spec = SPECS[key]
    try:
        if spec.kind is int:
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise ValueError(raw)
            value = int(raw)
        elif spec.kind is float:
            value = float(raw)
        else:
            value = str(raw).strip()
    except (TypeError, ValueError):
        raise SettingsError(f"{key}: expected {spec.kind.__name__}, got {raw!r}") from None
    if spec.choices is not None and value not in spec.choices:
        raise SettingsError(f"{key}: {value!r} not one of {', '.join(spec.choices)}")
    if spec.lo is not None:
        if value < spec.lo or (spec.lo_open and value == spec.lo):
            raise SettingsError(f"{key}: {value!r} below allowed range")
    if spec.hi is not None and value > spec.hi:
        raise SettingsError(f"{key}: {value!r} above allowed range")
    return value


class Settings(Mapping[str, Any]):
    """Immutable, validated settings map; missing keys fall back to defaults."""

    def __init__(self, overrides: Mapping[str, Any] | None = None):
        self._explicit: dict[str, Any] = {}
        for key, raw in (overrides or {}).items():
            if key not in SPECS:
                raise SettingsError(f"unknown settings key: {key}")
            self._explicit[key] = _coerce(key, raw)
        if self.get_value("radius.min") > self.get_value("radius.max"):
            raise SettingsError("radius.min must not exceed radius.max")
        if self.get_value("roundabout.r_min") > self.get_value("roundabout.r_max"):
            raise SettingsError("roundabout.r_min must not exceed roundabout.r_max")

    def get_value(self, key: str) -> Any:
        if key in self._explicit:
            return self._explicit[key]
        return SPECS[key].default

    def __getitem__(self, key: str) -> Any:
        if key not in SPECS:
            raise KeyError(key)
        return self.get_value(key)

    def __iter__(self) -> Iterator[str]:
        return iter(SPECS)

    def __len__(self) -> int:
        return len(SPECS)

    @property
    def explicit(self) -> dict[str, Any]:
        return dict(self._explicit)

    def replace(self, **changes: Any) -> "Settings":
        """Return a copy with dotted keys given as ``section__name`` kwargs or a dict."""
        merged = dict(self._explicit)
        for key, value in changes.items():
            merged[key.replace("__", ".")] = value
        return Settings(merged)

    def with_values(self, values: Mapping[str, Any]) -> "Settings":
        merged = dict(self._explicit)
        merged.update(values)
        return Settings(merged)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Settings):
            return NotImplemented
        return all(self[k] == other[k] for k in SPECS)

    def __hash__(self) -> int:
        return hash(tuple(self[k] for k in sorted(SPECS)))

    def __repr__(self) -> str:
        return f"Settings({self._explicit!r})"


DEFAULT_SETTINGS = Settings()


def parse_settings(text: str) -> Settings:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SettingsError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise SettingsError(f"line {lineno}: duplicate key {key}")
        values[key] = value
    return Settings(values)


def _format(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_settings(settings: Settings) -> str:
    """Serialize explicitly-set keys, sorted, one per line."""
    return "".join(f"{k} = {_format(v)}\n" for k, v in sorted(settings.explicit.items()))


def load_settings(path: str | os.PathLike | None = None) -> Settings:
    """Load settings from ``path``, else from ``$STREETGEN_SETTINGS``, else defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return DEFAULT_SETTINGS
    return parse_settings(Path(path).read_text(encoding="utf-8"))
