"""INI figure specs.

Example::

    [figure]
    name = kappa_panels
    inputs = out/kappa_ci_kappa_*_*.csv   ; paths or globs, comma separated
    panel_by = sweep_value                 ; one output file per value
    series_by = solver
    x = iter
    y = rel_err
    xscale = log
    yscale = log
    stat = median                          ; or mean
    band = iqr                             ; or none
"""

from __future__ import annotations

import configparser
import glob
import os
from dataclasses import dataclass

from .reader import TRACE_FIELDS, MissingColumn


@dataclass
class FigureSpec:
    name: str
    inputs: list
    panel_by: str = "sweep_value"
    series_by: str = "solver"
    x: str = "iter"
    y: str = "rel_err"
    xscale: str = "log"
    yscale: str = "log"
    stat: str = "median"
    band: str = "iqr"

    def validate(self) -> None:
        for key in (self.panel_by, self.series_by, self.x, self.y):
            if key not in TRACE_FIELDS:
                raise MissingColumn(f"{key!r} is not a trace column")
        if self.stat not in ("median", "mean"):
            raise ValueError("stat must be median or mean")
        if self.band not in ("iqr", "none"):
            raise ValueError("band must be iqr or none")
        if self.xscale not in ("log", "linear") or self.yscale not in ("log", "linear"):
            raise ValueError("axis scales must be log or linear")
        if not self.inputs:
            raise FileNotFoundError("figure spec matched no input CSV files")


def parse_figspec(path) -> FigureSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise FileNotFoundError(f"cannot read figure spec {path}")
    if "figure" not in parser:
        raise ValueError("missing [figure] section")
    section = parser["figure"]
    base = os.path.dirname(os.path.abspath(path))
    inputs: list = []
    for item in section.get("inputs", "").split(","):
        item = item.strip()
        if not item:
            continue
        pattern = item if os.path.isabs(item) else os.path.join(base, item)
        matches = sorted(glob.glob(pattern))
        inputs.extend(matches if matches else [pattern])
    spec = FigureSpec(
        name=section.get("name", "figure"),
        inputs=inputs,
        panel_by=section.get("panel_by", "sweep_value"),
        series_by=section.get("series_by", "solver"),
        x=section.get("x", "iter"),
        y=section.get("y", "rel_err"),
        xscale=section.get("xscale", "log"),
        yscale=section.get("yscale", "log"),
        stat=section.get("stat", "median"),
        band=section.get("band", "iqr"),
    )
    spec.validate()
    return spec
