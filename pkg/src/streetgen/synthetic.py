"""Synthetic networks for benchmarks and robustness runs."""
from __future__ import annotations

import math

from shapely.geometry import LineString

from .network import RoadAxis


def grid(nx: int, ny: int, spacing: float = 50.0, half_width: float = 4.0, lanes: int = 2,
         importance: str = "Residential") -> list[RoadAxis]:
    """``nx`` x ``ny`` nodes joined by one axis per grid segment."""
    axes = []
    for j in range(ny):
        for i in range(nx - 1):
            axes.append(RoadAxis(f"h{j}_{i}", LineString([(i * spacing, j * spacing),
                                                          ((i + 1) * spacing, j * spacing)]),
                                 half_width, importance, lane_count=lanes, name=f"Row {j}"))
    for i in range(nx):
        for j in range(ny - 1):
            axes.append(RoadAxis(f"v{i}_{j}", LineString([(i * spacing, j * spacing),
                                                          (i * spacing, (j + 1) * spacing)]),
                                 half_width, importance, lane_count=lanes, name=f"Column {i}"))
    return axes


def star(degree: int = 8, length: float = 60.0, center=(0.0, 0.0), half_width: float = 3.5,
         prefix: str = "star") -> list[RoadAxis]:
    cx, cy = center
    return [RoadAxis(f"{prefix}{k}", LineString([(cx, cy), (cx + length * math.cos(2 * math.pi * k / degree),
                                                              cy + length * math.sin(2 * math.pi * k / degree))]),
                     half_width) for k in range(degree)]


def ring(n: int = 16, radius: float = 12.0, center=(0.0, 0.0), name: str = "PL DE TEST",
         half_width: float = 3.0, prefix: str = "ring") -> list[RoadAxis]:
    cx, cy = center
    pts = [(cx + radius * math.cos(2 * math.pi * k / n), cy + radius * math.sin(2 * math.pi * k / n))
           for k in range(n)]
    return [RoadAxis(f"{prefix}{k}", LineString([pts[k], pts[(k + 1) % n]]), half_width, name=name)
            for k in range(n)]


def stress_suite() -> list[RoadAxis]:
    """Awkward cases side by side: a grid, a degree-8 star, a near-parallel
    pair, a loop block, a 1 m sliver and a buffer contained in another."""
    axes = [a for a in grid(4, 4, spacing=40.0, half_width=3.5)]
    axes += star(8, 60.0, center=(400.0, 0.0))
    axes += [
        RoadAxis("np_a", LineString([(0.0, 300.0), (120.0, 300.0)]), 3.5),
        RoadAxis("np_b", LineString([(0.0, 300.0), (120.0, 306.0)]), 3.5),
        RoadAxis("loop", LineString([(300.0, 300.0), (360.0, 300.0), (360.0, 360.0),
                                     (300.0, 360.0), (300.0, 300.0)]), 3.0),
        RoadAxis("loop_in", LineString([(240.0, 300.0), (300.0, 300.0)]), 3.0),
        RoadAxis("sliver_a", LineString([(600.0, 0.0), (660.0, 0.0)]), 3.5),
        RoadAxis("sliver", LineString([(660.0, 0.0), (661.0, 0.0)]), 3.5),
        RoadAxis("sliver_b", LineString([(661.0, 0.0), (661.0, 60.0)]), 3.5),
        RoadAxis("wide", LineString([(600.0, 300.0), (700.0, 300.0)]), 12.0),
        RoadAxis("narrow", LineString([(600.0, 300.0), (606.0, 303.0)]), 1.0),
    ]
    axes += ring(16, 12.0, center=(400.0, 400.0))
    return axes
