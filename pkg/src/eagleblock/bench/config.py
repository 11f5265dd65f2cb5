"""INI experiment specs: one [experiment] section plus one [problem] section.

Example::

    [experiment]
    name = kappa_ci
    regime = central            ; central | distributed | sketched | estimation
    solvers = eagle, gd, cg     ; any of eagle, gd, cg, oracle
    sweep = kappa               ; kappa | M | alpha_overlap | r | step_scale | noise
    values = 1e2, 1e3, 1e4
    seeds = 0, 1, 2
    epsilon = 1e-10
    max_iter = 200

    [problem]
    kind = svd_spectrum
    d = 64
    n = 64
    d_prime = 2
    n_prime = 2
    rank = 64

No parser dependencies: plain configparser, diffable fixtures.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from ..errors import SpecError
from ..problemgen import GenSpec

REGIMES = ("central", "distributed", "sketched", "estimation")
SOLVERS = ("eagle", "gd", "cg", "oracle")
SWEEPS = ("kappa", "M", "alpha_overlap", "r", "step_scale", "noise")

# which sweep axes make sense in which regime
_SWEEP_REGIMES = {
    "kappa": ("central", "distributed", "sketched", "estimation"),
    "M": ("distributed",),
    "alpha_overlap": ("distributed",),
    "r": ("sketched",),
    "step_scale": ("central", "estimation"),
    "noise": ("central", "sketched", "distributed"),
}

PRESET_SIZES = {"ci": 64, "paper": 240}


@dataclass
class ExperimentSpec:
    name: str
    regime: str
    solvers: tuple
    sweep: str
    values: tuple
    seeds: tuple
    epsilon: float
    max_iter: int
    genspec: GenSpec
    machines: int = 4
    overlap: float = 0.0
    sketch_rank: int | None = None

    def validate(self) -> None:
        if self.regime not in REGIMES:
            raise SpecError(f"regime must be one of {REGIMES}", "experiment", "regime")
        for solver in self.solvers:
            if solver not in SOLVERS:
                raise SpecError(f"unknown solver {solver!r}", "experiment", "solvers")
        if self.sweep not in SWEEPS:
            raise SpecError(f"sweep must be one of {SWEEPS}", "experiment", "sweep")
        if self.regime not in _SWEEP_REGIMES[self.sweep]:
            raise SpecError(
                f"sweep {self.sweep!r} is not defined for regime {self.regime!r}",
                "experiment",
                "sweep",
            )
        if not self.values:
            raise SpecError("at least one sweep value required", "experiment", "values")
        if not self.seeds:
            raise SpecError("at least one seed required", "experiment", "seeds")
        if self.epsilon <= 0:
            raise SpecError("epsilon must be positive", "experiment", "epsilon")
        if self.max_iter < 1:
            raise SpecError("max_iter must be >= 1", "experiment", "max_iter")
        if "cg" in self.solvers and self.regime not in ("central", "estimation"):
            raise SpecError(
                "cg is centralized-only (it needs the full Gram matrix)",
                "experiment",
                "solvers",
            )


def _get(section, cfg_section_name, key, cast, default=None, required=False):
    if key not in section:
        if required:
            raise SpecError("missing required field", cfg_section_name, key)
        return default
    raw = section[key]
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"cannot parse {raw!r}: {exc}", cfg_section_name, key) from exc


def _csv_list(cast):
    def parse(raw: str):
        return tuple(cast(item.strip()) for item in raw.split(",") if item.strip())

    return parse


def parse_spec(path, preset: str | None = None) -> ExperimentSpec:
    """Parse and validate one experiment spec file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise SpecError(f"cannot read spec file {path}")
    if "experiment" not in parser:
        raise SpecError("missing [experiment] section", "experiment")
    exp = parser["experiment"]
    prob = parser["problem"] if "problem" in parser else {}

    default_size = PRESET_SIZES.get(preset or "", 64)
    genspec = GenSpec(
        kind=_get(prob, "problem", "kind", str, "svd_spectrum"),
        d=_get(prob, "problem", "d", int, default_size),
        n=_get(prob, "problem", "n", int, default_size),
        d_prime=_get(prob, "problem", "d_prime", int, 2),
        n_prime=_get(prob, "problem", "n_prime", int, 2),
        rank=_get(prob, "problem", "rank", int, min(
            _get(prob, "problem", "d", int, default_size),
            _get(prob, "problem", "n", int, default_size),
        )),
        anisotropy=_get(prob, "problem", "anisotropy", float, 0.7),
        kappa_target=_get(prob, "problem", "kappa", float, None),
        nu=_get(prob, "problem", "nu", int, 4),
        rho_corr=_get(prob, "problem", "rho_corr", float, 0.8),
        sparsity=_get(prob, "problem", "sparsity", float, 0.1),
        clusters=_get(prob, "problem", "clusters", int, 5),
    )
    try:
        genspec.validate()
    except Exception as exc:
        raise SpecError(str(exc), "problem") from exc

    spec = ExperimentSpec(
        name=_get(exp, "experiment", "name", str, required=True),
        regime=_get(exp, "experiment", "regime", str, "central"),
        solvers=_get(exp, "experiment", "solvers", _csv_list(str), ("eagle",)),
        sweep=_get(exp, "experiment", "sweep", str, required=True),
        values=_get(exp, "experiment", "values", _csv_list(float), required=True),
        seeds=_get(exp, "experiment", "seeds", _csv_list(int), required=True),
        epsilon=_get(exp, "experiment", "epsilon", float, 1e-10),
        max_iter=_get(exp, "experiment", "max_iter", int, 200),
        genspec=genspec,
        machines=_get(exp, "experiment", "machines", int, 4),
        overlap=_get(exp, "experiment", "overlap", float, 0.0),
        sketch_rank=_get(exp, "experiment", "sketch_rank", int, None),
    )
    spec.validate()
    return spec
