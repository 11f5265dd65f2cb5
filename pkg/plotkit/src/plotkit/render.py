"""Panel rendering: one deterministic SVG per panel value.

The central line per series is the median (or mean) across seeds at each
x value, with an optional interquartile band.  Output bytes depend only on
the inputs: the SVG hash salt is pinned to the figure name and the date
metadata is stripped, so re-rendering identical CSVs reproduces identical
files.
"""

from __future__ import annotations

import os

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .figspec import FigureSpec
from .reader import EmptySeries, column, read_trace


def _panel_key(value: float) -> str:
    return format(value, "g").replace(".", "p").replace("-", "m")


def _aggregate(xs, ys, seeds, stat):
    """Per-x central value and quartiles across seeds."""
    levels = np.unique(xs)
    center = np.empty(levels.size)
    lo = np.empty(levels.size)
    hi = np.empty(levels.size)
    for i, level in enumerate(levels):
        vals = ys[xs == level]
        center[i] = np.mean(vals) if stat == "mean" else np.median(vals)
        lo[i] = np.percentile(vals, 25)
        hi[i] = np.percentile(vals, 75)
    return levels, center, lo, hi


def render(spec: FigureSpec, out_dir) -> list:
    """Write one SVG per panel; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    tables = [read_trace(path) for path in spec.inputs]

    panels: dict = {}
    for table in tables:
        pvals = column(table, spec.panel_by)
        svals = column(table, spec.series_by)
        xs = column(table, spec.x)
        ys = column(table, spec.y)
        seeds = column(table, "seed")
        for pv in np.unique(pvals):
            mask_p = pvals == pv
            series = panels.setdefault(float(pv), {})
            for sv in set(np.asarray(svals)[mask_p].tolist()):
                mask = mask_p & (np.asarray(svals) == sv)
                entry = series.setdefault(str(sv), [[], [], []])
                entry[0].extend(xs[mask].tolist())
                entry[1].extend(ys[mask].tolist())
                entry[2].extend(seeds[mask].tolist())

    if not panels:
        raise EmptySeries("no panels after grouping")

    matplotlib.rcParams["svg.hashsalt"] = spec.name
    written = []
    for pv in sorted(panels):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        for sv in sorted(panels[pv]):
            xs, ys, seeds = (np.asarray(v) for v in panels[pv][sv])
            if xs.size == 0:
                raise EmptySeries(f"series {sv!r} in panel {pv:g} has no rows")
            finite = np.isfinite(ys)
            if spec.yscale == "log":
                finite &= ys > 0
            if spec.xscale == "log":
                finite &= xs > 0
            if not finite.any():
                raise EmptySeries(f"series {sv!r} in panel {pv:g} has no plottable values")
            levels, center, lo, hi = _aggregate(xs[finite], ys[finite], seeds[finite], spec.stat)
            (line,) = ax.plot(levels, center, label=sv, linewidth=1.4)
            if spec.band == "iqr":
                ax.fill_between(levels, lo, hi, alpha=0.2, color=line.get_color(), linewidth=0)
        ax.set_xscale(spec.xscale)
        ax.set_yscale(spec.yscale)
        ax.set_xlabel(spec.x)
        ax.set_ylabel(spec.y)
        ax.set_title(f"{spec.panel_by} = {pv:g}")
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, which="both", alpha=0.25)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{spec.name}_{_panel_key(pv)}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
