"""Turning-radius rules of thumb."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

from .errors import InvalidParameter, SingularSpeed
from .network import Importance
from .settings import DEFAULT_SETTINGS, Settings

MIN_RADIUS = 0.15  # curb stone radius used as a floor


class RadiusSource(str, Enum):
    GUESS = "Guess"
    SETRA = "Setra"
    CLAMPED_MIN = "ClampedMin"
    CLAMPED_MAX_FEASIBLE = "ClampedMaxFeasible"


@dataclass(frozen=True)
class RadiusEstimate:
    radius: float
    source: RadiusSource

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameter("radius must be > 0")


def guess_radius(importance: Importance | str, settings: Settings = DEFAULT_SETTINGS) -> RadiusEstimate:
    imp = Importance(importance)
    return RadiusEstimate(settings[f"radius.by_importance.{imp.value}"], RadiusSource.GUESS)


def setra_radius(speed: float, width: float, settings: Settings = DEFAULT_SETTINGS) -> RadiusEstimate:
    """Radius from average speed (km/h) and full roadway width (m).

    r = 18.6 * sqrt(speed / |10 * width + 65 - speed|), valid below the pole.
    """
    if not speed > 0 or not width > 0:
        raise InvalidParameter("speed and width must be > 0")
    denom = 10.0 * width + 65.0 - speed
    if abs(denom) < 1e-9:
        raise SingularSpeed(f"speed {speed} km/h is singular for width {width} m")
    if denom < 0:
        raise SingularSpeed(f"speed {speed} km/h exceeds the valid range for width {width} m")
    r = 18.6 * math.sqrt(speed / denom)
    r = min(max(r, settings["radius.min"]), settings["radius.max"])
    return RadiusEstimate(r, RadiusSource.SETRA)


def estimate_radius(importance, speed: float, full_width: float,
                    settings: Settings = DEFAULT_SETTINGS) -> RadiusEstimate:
    """Dispatch on ``radius.method``; the speed rule falls back to guessing on singular input."""
    if settings["radius.method"] == "speed":
        try:
            return setra_radius(speed, full_width, settings)
        except SingularSpeed:
            pass
    return guess_radius(importance, settings)


def clamp_radius_to_network(
    estimate: RadiusEstimate | float,
    axis_lengths: tuple[float, float],
    border_abscissae: Callable[[float], tuple[float, float] | None],
    settings: Settings = DEFAULT_SETTINGS,
    resolution: float = 0.01,
) -> RadiusEstimate:
    """Largest radius <= the estimate whose arc fits on both axes.

    ``border_abscissae(r)`` returns the projection abscissae of the corner
    centre on both axes (measured from the junction), or None when no centre
    exists.  Feasible means both lie strictly inside their axis.
    """
    if not isinstance(estimate, RadiusEstimate):
        estimate = RadiusEstimate(float(estimate), RadiusSource.GUESS)
    r_min = settings["radius.min"]
    L1, L2 = axis_lengths

    def feasible(r: float) -> bool:
        ab = border_abscissae(r)
        if ab is None:
            return False
        return ab[0] < L1 and ab[1] < L2

    r = max(estimate.radius, r_min)
    if feasible(r):
        return replace(estimate, radius=r)
    if not feasible(r_min):
        return RadiusEstimate(r_min, RadiusSource.CLAMPED_MIN)
    lo, hi = r_min, r
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return RadiusEstimate(lo, RadiusSource.CLAMPED_MAX_FEASIBLE)
