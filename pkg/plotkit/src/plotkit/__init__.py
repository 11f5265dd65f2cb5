"""Figure rendering for benchmark CSV traces (file-format consumer only)."""

from .figspec import FigureSpec, parse_figspec
from .reader import EmptySeries, MissingColumn, read_trace
from .render import render

__all__ = [
    "EmptySeries",
    "FigureSpec",
    "MissingColumn",
    "parse_figspec",
    "read_trace",
    "render",
]

__version__ = "0.1.0"
