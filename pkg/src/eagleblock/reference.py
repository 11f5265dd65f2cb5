"""Ground-truth completion oracle and classical iterative baselines.

The oracle is the minimum-rank completion D* = W* C with
W* = B A^T (A A^T)+ (min-norm least squares).  Baselines minimize
f(X) = 0.5 ||X A - B||_F^2 over X in R^{d' x d} and return D = X C:

* gradient descent with step 1 / sigma_max(A)^2 (two power-iteration
  sweeps), a fixed ridge 1e-3 added to the gradient only when A is
  numerically rank-deficient, and central / distributed / column-sketched
  stochastic data access;
* conjugate gradient on the normal equations X G = B A^T, G = A A^T, with
  Frobenius inner products, halting on the D-increment.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .dist import CommLedger
from .errors import BadSpec, ZeroMatrix
from .sketch import sample_sketch

RIDGE = 1e-3
GD_COMM_FLOATS_NOTE = (
    "distributed rounds are accounted at (d + d') * n' floats per machine, "
    "matching the completion solver's ledger entry for an identical-cost round"
)


@dataclass
class OracleResult:
    w_star: np.ndarray
    d_star: np.ndarray


def nystrom_solve(a, b, c) -> OracleResult:
    """Minimum-rank completion of the masked block."""
    a = matcore.as_matrix(a)
    if matcore.frob(a) == 0.0:
        raise ZeroMatrix("completion oracle requires a nonzero A")
    w_star = matcore.least_squares_min_norm(a, b)
    return OracleResult(w_star=w_star, d_star=w_star @ matcore.as_matrix(c))


@dataclass
class BaselineTrace:
    rel_err: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    wall_ns: list = field(default_factory=list)
    comm_floats: list = field(default_factory=list)  # cumulative
    ledger: CommLedger | None = None  # distributed mode only
    iterations: int = 0
    converged: bool = False
    flag: str | None = None

    def iterations_to(self, epsilon: float):
        for i, err in enumerate(self.rel_err):
            if err <= epsilon:
                return i
        return None


def two_step_norm_sq(a) -> float:
    """sigma_max(A)^2 estimated by exactly two power-iteration sweeps from
    the normalized all-ones vector (an underestimate, within a factor ~2 on
    the spectra used here, which keeps the descent step safe)."""
    d = a.shape[0]
    v = np.full(d, 1.0 / np.sqrt(d))
    for _ in range(2):
        image = a @ (a.T @ v)
        norm = np.linalg.norm(image)
        if norm == 0.0:
            return 0.0
        v = image / norm
    return float(v @ (a @ (a.T @ v)))


def _as_shards(data) -> list:
    if isinstance(data, tuple) and len(data) == 2 and isinstance(data[0], np.ndarray):
        return [data]
    return list(data)


def gd_run(
    data,
    c,
    mode: str = "central",
    tol: float = 1e-12,
    max_iter: int = 200_000,
    r: int | None = None,
    sketch_seed: int = 0,
    oracle: OracleResult | None = None,
    track_objective: bool = True,
):
    """Gradient descent on the completion regression.

    `data` is (A, B) for central/stochastic mode or a list of per-machine
    shards [(A^mu, B^mu), ...] for distributed mode.  Stochastic mode draws
    a fresh orthogonal column sketch of width `r` each iteration and uses
    the sketched blocks in the gradient.  `track_objective=False` skips the
    per-iteration objective (long ill-conditioned runs).  Returns
    (D, BaselineTrace).
    """
    if mode not in ("central", "distributed", "stochastic"):
        raise BadSpec(f"unknown gd mode {mode!r}")
    shards = _as_shards(data)
    if mode == "stochastic":
        if len(shards) != 1:
            raise BadSpec("stochastic mode takes a single (A, B) pair")
        if r is None:
            raise BadSpec("stochastic mode needs a sketch width r")
    m = len(shards)
    a_glob = np.hstack([a for a, _ in shards])
    b_glob = np.hstack([b for _, b in shards])
    if oracle is None:
        oracle = nystrom_solve(a_glob, b_glob, c)
    d_star_norm = max(matcore.frob(oracle.d_star), 1e-300)

    e_glob = a_glob @ a_glob.T
    eig = matcore.sym_eig(0.5 * (e_glob + e_glob.T), sym_tol=1e-8)
    ridge = 0.0 if eig.rank == a_glob.shape[0] else RIDGE

    grams = [a @ a.T for a, _ in shards]
    rhs = [b @ a.T for a, b in shards]
    bsq = sum(float(np.sum(b * b)) for _, b in shards)
    if mode != "stochastic":
        eta = 1.0 / max(two_step_norm_sq(a) for a, _ in shards)

    d_prime = shards[0][1].shape[0]
    d_rows = shards[0][0].shape[0]
    n_prime = c.shape[1]
    per_machine_comm = (d_rows + d_prime) * n_prime
    per_round_comm = m * per_machine_comm if mode == "distributed" else 0

    x = np.zeros((d_prime, d_rows))
    trace = BaselineTrace()
    if mode == "distributed":
        trace.ledger = CommLedger()
    d_block = x @ c
    trace.rel_err.append(matcore.frob(d_block - oracle.d_star) / d_star_norm)
    trace.objective.append(0.5 * bsq)
    trace.wall_ns.append(0)
    trace.comm_floats.append(0)

    comm = 0
    for it in range(max_iter):
        t0 = time.perf_counter_ns()
        if mode == "stochastic":
            a, b = shards[0]
            s = sample_sketch(a.shape[1], r, sketch_seed, it).s
            a_t = a @ s
            b_t = b @ s
            grad = (x @ a_t - b_t) @ a_t.T + ridge * x
            eta = 1.0 / two_step_norm_sq(a_t)
            obj = None
        else:
            xg = [x @ g for g in grams]
            grad = sum(xg_mu - h for xg_mu, h in zip(xg, rhs)) + ridge * x
            obj = None
            if track_objective:
                obj = 0.5 * (
                    sum(float(np.sum(x * v)) for v in xg)
                    - 2.0 * sum(float(np.sum(x * h)) for h in rhs)
                    + bsq
                )
        prev_d = d_block
        x = x - (eta / m) * grad
        d_block = x @ c
        comm += per_round_comm
        if trace.ledger is not None:
            for mu in range(m):
                trace.ledger.record(it, mu, per_machine_comm)

        trace.rel_err.append(matcore.frob(d_block - oracle.d_star) / d_star_norm)
        if obj is not None:
            trace.objective.append(obj)
        trace.wall_ns.append(time.perf_counter_ns() - t0)
        trace.comm_floats.append(comm)
        trace.iterations = it + 1
        if matcore.frob(d_block - prev_d) < tol:
            trace.converged = True
            break
    else:
        trace.flag = "max_iter"
    return d_block, trace


def cg_run(a, b, c, tol: float = 1e-12, max_iter: int | None = None, oracle: OracleResult | None = None):
    """Conjugate gradient on X G = B A^T with Frobenius inner products.

    Flags `breakdown` (and stops) if the curvature <P, P G> drops to or
    below zero beyond roundoff, the expected failure mode when G is
    rank-deficient.  Returns (D, BaselineTrace).
    """
    a = matcore.as_matrix(a)
    b = matcore.as_matrix(b)
    c = matcore.as_matrix(c)
    if oracle is None:
        oracle = nystrom_solve(a, b, c)
    d_star_norm = max(matcore.frob(oracle.d_star), 1e-300)
    if max_iter is None:
        max_iter = 4 * a.shape[0]

    g = a @ a.T
    rhs = b @ a.T
    x = np.zeros_like(rhs)
    resid = rhs - x @ g
    p = resid.copy()
    rr = float(np.sum(resid * resid))
    curvature_floor = matcore.EPS * two_step_norm_sq(a)

    trace = BaselineTrace()
    d_block = x @ c
    trace.rel_err.append(matcore.frob(d_block - oracle.d_star) / d_star_norm)
    trace.objective.append(0.5 * float(np.sum(b * b)))
    trace.wall_ns.append(0)
    trace.comm_floats.append(0)

    for it in range(max_iter):
        t0 = time.perf_counter_ns()
        pg = p @ g
        curvature = float(np.sum(p * pg))
        if curvature <= curvature_floor * float(np.sum(p * p)):
            trace.flag = "breakdown"
            break
        alpha = rr / curvature
        x = x + alpha * p
        prev_d = d_block
        d_block = x @ c
        resid = resid - alpha * pg
        rr_next = float(np.sum(resid * resid))
        beta = rr_next / rr
        rr = rr_next
        p = resid + beta * p

        trace.rel_err.append(matcore.frob(d_block - oracle.d_star) / d_star_norm)
        xa = x @ a
        trace.objective.append(0.5 * float(np.sum((xa - b) ** 2)))
        trace.wall_ns.append(time.perf_counter_ns() - t0)
        trace.comm_floats.append(0)
        trace.iterations = it + 1
        if matcore.frob(d_block - prev_d) < tol:
            trace.converged = True
            break
    else:
        trace.flag = "max_iter"
    return d_block, trace
