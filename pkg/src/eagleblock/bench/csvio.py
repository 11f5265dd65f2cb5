"""Trace-row schema and round-trip-exact CSV emission."""

from __future__ import annotations

import csv
from dataclasses import dataclass

from ..errors import BadSpec

RESULT_FIELDS = (
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

_INT_FIELDS = {"seed", "iter", "wall_ns", "flops", "comm_floats_cum"}
_STR_FIELDS = {"run_id", "regime", "solver"}


@dataclass
class ResultRow:
    """One per-iteration record; unset diagnostics stay None (empty cell)."""

    run_id: str
    regime: str
    solver: str
    seed: int
    sweep_value: float
    iter: int
    rel_err: float
    lambda_bar: float | None = None
    kappa_l: float | None = None
    theta_l: float | None = None
    wall_ns: int = 0
    flops: int = 0
    comm_floats_cum: int = 0
    alpha_measured: float | None = None


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return format(float(value), ".17g")  # round-trip exact for float64


def emit_csv(rows, path) -> None:
    """RFC-4180-style CSV, header = the ResultRow field names, floats at 17
    significant digits so a parse-back reproduces the bits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        for row in rows:
            writer.writerow([_format(getattr(row, name)) for name in RESULT_FIELDS])


def read_csv(path) -> list[ResultRow]:
    """Parse a trace CSV back into rows (bit-exact for emitted files)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RESULT_FIELDS:
            raise BadSpec(f"unexpected CSV header in {path}: {header}")
        for record in reader:
            kwargs = {}
            for name, cell in zip(RESULT_FIELDS, record):
                if cell == "":
                    kwargs[name] = None
                elif name in _STR_FIELDS:
                    kwargs[name] = cell
                elif name in _INT_FIELDS:
                    kwargs[name] = int(cell)
                else:
                    kwargs[name] = float(cell)
            out.append(ResultRow(**kwargs))
    return out
