"""Benchmark-trace CSV reader.

plotkit consumes the runner's file format only: an RFC-4180 CSV whose
header is the fixed trace schema below.  Values parse as floats; empty
cells become NaN.
"""

from __future__ import annotations

import csv

import numpy as np

TRACE_FIELDS = (
    "run_id",
    "regime",
    "solver",
    "seed",
    "sweep_value",
    "iter",
    "rel_err",
    "lambda_bar",
    "kappa_l",
    "theta_l",
    "wall_ns",
    "flops",
    "comm_floats_cum",
    "alpha_measured",
)

_TEXT_FIELDS = {"run_id", "regime", "solver"}


class MissingColumn(ValueError):
    """A referenced column is absent from the trace schema/file."""


class EmptySeries(ValueError):
    """A figure series matched no rows."""


def read_trace(path) -> dict:
    """Columns of one trace CSV: text fields as lists, numbers as arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_FIELDS:
        raise MissingColumn(
            f"{path}: expected the benchmark trace header, got {rows[0] if rows else 'empty file'}"
        )
    body = rows[1:]
    if not body:
        raise EmptySeries(f"{path}: no data rows")
    columns: dict = {name: [] for name in TRACE_FIELDS}
    for record in body:
        for name, cell in zip(TRACE_FIELDS, record):
            if name in _TEXT_FIELDS:
                columns[name].append(cell)
            else:
                columns[name].append(float(cell) if cell != "" else np.nan)
    for name in TRACE_FIELDS:
        if name not in _TEXT_FIELDS:
            columns[name] = np.asarray(columns[name])
    return columns


def column(columns: dict, name: str) -> np.ndarray:
    if name not in columns:
        raise MissingColumn(f"column {name!r} is not in the trace schema")
    return columns[name]
