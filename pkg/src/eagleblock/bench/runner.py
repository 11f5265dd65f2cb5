"""Config-driven sweep execution: one trace CSV per (sweep value, solver),
plus a summary CSV of iterations-to-epsilon and wall time over seeds.

Every sweep point is pure and seeded, so runs are deterministic given the
spec; wall-clock fields can be zeroed (`zero_walltime`) when byte-identical
output files are required.  Points run in a thread pool; files are written
only after the join, in sorted order, so output never depends on the
thread count.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import dist, eagle, matcore, problemgen, reference, sketch
from ..errors import SpecError
from .config import ExperimentSpec
from .csvio import ResultRow, emit_csv

DEFAULT_DIST_KAPPA = 1000.0


def _rel_errs(d_history, target):
    scale = max(matcore.frob(target), 1e-300)
    return [matcore.frob(d - target) / scale for d in d_history]


def _solver_cfg(spec: ExperimentSpec, value: float, diagnostics: bool) -> eagle.SolverConfig:
    cfg = eagle.SolverConfig(
        max_iter=spec.max_iter,
        track_diagnostics=diagnostics,
        rho_policy="analytic_rescale" if spec.regime == "distributed" else "exact_norm",
    )
    if spec.sweep == "step_scale":
        cfg = cfg.scaled(value)
    return cfg


def _problem_for(spec: ExperimentSpec, value: float, seed: int):
    """Problem (and partition, for distributed runs) at one sweep point.

    Returns (problem, partition_or_none, reference_d, alpha_or_none) where
    reference_d is what rel_err is measured against: the clean hidden block
    (equals the completion oracle's output for noiseless generation).
    """
    genspec = spec.genspec
    if spec.sweep == "kappa":
        if genspec.kind != "svd_spectrum":
            raise SpecError("kappa sweeps need kind=svd_spectrum", "problem", "kind")
        genspec = replace(genspec, kappa_target=value)

    if spec.regime == "distributed":
        if spec.sweep == "M":
            part = problemgen.independent_shards(
                d=genspec.d,
                n_per_machine=genspec.n,
                d_prime=genspec.d_prime,
                n_prime=genspec.n_prime,
                machines=int(value),
                kappa=genspec.kappa_target or DEFAULT_DIST_KAPPA,
                seed=seed,
            )
        else:
            problem = problemgen.generate(genspec, seed)
            overlap = value if spec.sweep == "alpha_overlap" else spec.overlap
            part = problemgen.partition(problem, spec.machines, overlap=overlap, seed=seed)
        problem = part.problem
        if spec.sweep == "noise":
            raise SpecError("noise sweeps are centralized/sketched only here", "experiment", "sweep")
        alpha = problemgen.diversity_index(part.shards)
        return problem, part, problem.d_hidden, alpha

    problem = problemgen.generate(genspec, seed)
    clean_d = problem.d_hidden
    if spec.sweep == "noise":
        problem = problemgen.add_noise(problem, value)
    return problem, None, clean_d, None


def run_point(spec: ExperimentSpec, value: float, solver: str, seed: int):
    """Execute one (sweep value, solver, seed) run and return ResultRows."""
    problem, part, reference_d, alpha = _problem_for(spec, value, seed)
    run_id = f"{spec.name}-{solver}-{value:g}-{seed}"
    diagnostics = solver == "eagle" and spec.regime == "central"
    cfg = _solver_cfg(spec, value, diagnostics)

    comm = None
    lam = kap = the = None
    if solver == "oracle":
        oracle = reference.nystrom_solve(problem.a, problem.b, problem.c)
        err = _rel_errs([oracle.d_star], reference_d)[0]
        return [
            ResultRow(
                run_id=run_id,
                regime=spec.regime,
                solver=solver,
                seed=seed,
                sweep_value=value,
                iter=0,
                rel_err=err,
                alpha_measured=alpha,
            )
        ]
    if solver == "eagle":
        if spec.regime == "central":
            _, trace = eagle.run_centralized(problem, cfg)
        elif spec.regime == "estimation":
            w, trace = eagle.run_estimation(problem.a, problem.b, cfg)
        elif spec.regime == "distributed":
            _, trace, ledger = dist.run_distributed(part, cfg)
            comm = [0] + ledger.cumulative()
        elif spec.regime == "sketched":
            r = int(value) if spec.sweep == "r" else (spec.sketch_rank or problem.a.shape[1])
            _, trace = sketch.run_sketched(problem, r, cfg, sketch_seed=seed)
        errs = (
            trace.rel_err
            if spec.regime == "estimation"
            else _rel_errs(trace.d_history, reference_d)
        )
        walls = trace.wall_ns
        flops = trace.flops if trace.flops else [0] * len(errs)
        if diagnostics:
            lam, kap, the = trace.lambda_bar, trace.kappa, trace.theta
    elif solver == "gd":
        mode = {"central": "central", "distributed": "distributed", "sketched": "stochastic"}.get(
            spec.regime
        )
        if mode is None:
            raise SpecError("gd does not run in the estimation regime", "experiment", "solvers")
        data = part.shards if mode == "distributed" else (problem.a, problem.b)
        r = None
        if mode == "stochastic":
            r = int(value) if spec.sweep == "r" else (spec.sketch_rank or problem.a.shape[1])
        _, trace = reference.gd_run(
            data,
            problem.c,
            mode=mode,
            max_iter=spec.max_iter,
            r=r,
            sketch_seed=seed,
            oracle=_error_reference(problem, reference_d),
        )
        errs = trace.rel_err
        walls = trace.wall_ns
        flops = [0] * len(errs)
        comm = trace.comm_floats
    elif solver == "cg":
        _, trace = reference.cg_run(
            problem.a,
            problem.b,
            problem.c,
            max_iter=spec.max_iter,
            oracle=_error_reference(problem, reference_d),
        )
        errs = trace.rel_err
        walls = trace.wall_ns
        flops = [0] * len(errs)
    else:
        raise SpecError(f"unknown solver {solver!r}", "experiment", "solvers")

    rows = []
    for i, err in enumerate(errs):
        rows.append(
            ResultRow(
                run_id=run_id,
                regime=spec.regime,
                solver=solver,
                seed=seed,
                sweep_value=value,
                iter=i,
                rel_err=err,
                lambda_bar=lam[i] if lam else None,
                kappa_l=kap[i] if kap else None,
                theta_l=the[i] if the else None,
                wall_ns=int(walls[i]) if i < len(walls) else 0,
                flops=int(flops[i]) if i < len(flops) else 0,
                comm_floats_cum=int(comm[i]) if comm and i < len(comm) else 0,
                alpha_measured=alpha,
            )
        )
    return rows


def _error_reference(problem, reference_d):
    """Error target for baseline traces: the clean hidden block (equals the
    completion oracle's output on noiseless problems)."""
    return reference.OracleResult(
        w_star=np.zeros((problem.b.shape[0], problem.a.shape[0])), d_star=reference_d
    )


def iterations_to_epsilon(rows, epsilon: float, max_iter: int) -> int:
    """First iter with rel_err <= epsilon; censored runs count max_iter + 1."""
    for row in rows:
        if row.rel_err <= epsilon:
            return row.iter
    return max_iter + 1


def run_experiment(spec: ExperimentSpec, out_dir, threads: int = 1, zero_walltime: bool = False):
    """Run the full sweep; returns the summary (list of dicts)."""
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    points = [(value, solver) for value in spec.values for solver in spec.solvers]

    def run_one(point):
        value, solver = point
        rows = []
        for seed in spec.seeds:
            rows.extend(run_point(spec, value, solver, seed))
        return point, rows

    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for point, rows in pool.map(run_one, points):
                results[point] = rows
    else:
        for point in points:
            results[point] = run_one(point)[1]

    if zero_walltime:
        for rows in results.values():
            for row in rows:
                row.wall_ns = 0

    summary = []
    for value, solver in sorted(results, key=lambda p: (p[0], p[1])):
        rows = results[(value, solver)]
        emit_csv(rows, out / f"{spec.name}_{spec.sweep}_{value:g}_{solver}.csv")
        iters = []
        wall_totals = []
        for seed in spec.seeds:
            seed_rows = [r for r in rows if r.seed == seed]
            iters.append(iterations_to_epsilon(seed_rows, spec.epsilon, spec.max_iter))
            wall_totals.append(sum(r.wall_ns for r in seed_rows))
        summary.append(
            {
                "regime": spec.regime,
                "solver": solver,
                "sweep_value": value,
                "n_seeds": len(spec.seeds),
                "iters_to_eps_mean": statistics.mean(iters),
                "iters_to_eps_median": statistics.median(iters),
                "wall_ns_mean": statistics.mean(wall_totals),
                "wall_ns_median": statistics.median(wall_totals),
            }
        )

    _write_summary(summary, out / f"{spec.name}_summary.csv")
    return summary


_SUMMARY_FIELDS = (
    "regime",
    "solver",
    "sweep_value",
    "n_seeds",
    "iters_to_eps_mean",
    "iters_to_eps_median",
    "wall_ns_mean",
    "wall_ns_median",
)


def _write_summary(summary, path) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(_SUMMARY_FIELDS)
        for entry in summary:
            row = []
            for name in _SUMMARY_FIELDS:
                v = entry[name]
                row.append(format(float(v), ".17g") if isinstance(v, float) else str(v))
            writer.writerow(row)
