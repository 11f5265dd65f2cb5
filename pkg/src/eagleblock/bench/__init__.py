"""Experiment harness: spec parsing, sweep runner, CSV traces, invariants."""

from .config import ExperimentSpec, parse_spec
from .csvio import RESULT_FIELDS, ResultRow, emit_csv, read_csv
from .runner import run_experiment, run_point
from .verify import CheckResult, verify_suite

__all__ = [
    "CheckResult",
    "ExperimentSpec",
    "RESULT_FIELDS",
    "ResultRow",
    "emit_csv",
    "parse_spec",
    "read_csv",
    "run_experiment",
    "run_point",
    "verify_suite",
]
