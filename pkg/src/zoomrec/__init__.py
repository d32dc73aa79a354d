"""Coarse-to-fine zooming localizer for small-object referring expressions."""

__version__ = "0.1.0"
