"""Procedural street modeling from road-axis networks."""

__version__ = "0.1.0"
