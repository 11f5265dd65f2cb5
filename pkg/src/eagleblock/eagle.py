"""Centralized EAGLE: the two-line conditioning/completion iteration.

One step, with rho_l = 1 / ||A_l||_2^2 and constants eta (default 1/3) and
gamma (default 1):

    A+ = A (I - eta rho A^T A)        B+ = B (I - eta rho A^T A)
    C+ = (I - gamma rho A A^T) C      D+ = D + gamma rho B A^T C

all four blocks read the pre-step state.  With eta = 1/3 the top eigenvalue
of the signal energy E = A A^T shrinks by exactly 4/9 per step and the
conditioning gap theta = kappa(E) - 1 decays geometrically, then
quadratically; D converges to the minimum-rank completion B A^T (A A^T)+ C.

Two step-scale policies: `exact_norm` measures rho by power iteration each
step; `analytic_rescale` normalizes ||A_0||_2 = 1 once, uses rho = 1, and
rescales (A, B) by 3/2 after every step, which keeps the iterate on the
Newton-Schulz normal form  A+ = (3 I - A A^T) A / 2.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import matcore
from .errors import BadSpec, DiagnosticsDisabled, NonFinite, ZeroMatrix
from .problemgen import BlockProblem

RHO_POLICIES = ("exact_norm", "analytic_rescale")

N_MATRIX_MAX_DIM = 256


@dataclass(frozen=True)
class SolverConfig:
    """Step constants, stopping rule, and diagnostic switches.

    eta <= 1/3 is required for the contraction guarantees; larger values
    (the learned preset, step-scale ablations) are accepted but flagged via
    `guarantees_contraction`.
    """

    eta: float = 1.0 / 3.0
    gamma: float = 1.0
    rho_policy: str = "exact_norm"
    stop_tau: float = 1e-12
    max_iter: int = 200
    track_diagnostics: bool = False
    power_tol: float = 1e-10
    power_max_iter: int = 10_000

    def __post_init__(self):
        if self.eta <= 0.0 or self.gamma <= 0.0:
            raise BadSpec("eta and gamma must be positive")
        if self.rho_policy not in RHO_POLICIES:
            raise BadSpec(f"rho_policy must be one of {RHO_POLICIES}")
        if self.max_iter < 1:
            raise BadSpec("max_iter must be >= 1")

    @property
    def guarantees_contraction(self) -> bool:
        return self.eta <= 1.0 / 3.0 + 1e-15

    @classmethod
    def learned(cls, **kw) -> "SolverConfig":
        """Constants observed in trained models rather than the theorem's."""
        return cls(eta=1.0, gamma=1.9, **kw)

    def scaled(self, factor: float) -> "SolverConfig":
        """Joint (eta, gamma) scaling used by the step-size ablation."""
        return replace(self, eta=self.eta * factor, gamma=self.gamma * factor)


@dataclass
class IterState:
    """Current blocks plus step bookkeeping."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    l: int = 0
    rho_l: float = 1.0
    scale_accum: float = 1.0


def step_flops(d: int, d_prime: int, n: int, n_prime: int, k: int) -> int:
    """Analytic per-step flop model: the four block-update product classes
    with inner width k (k = n centralized, k = r sketched).  Deterministic
    by construction; wall time is recorded separately."""
    return 2 * k * (2 * d * n + 2 * d_prime * n + 2 * d * n_prime + d_prime * n_prime)


def _apply_update(a, b, c, d, eta_rho: float, gamma_rho: float):
    """One update of all four blocks from the same pre-step A (and C).

    Overflow surfaces as the typed NonFinite error in the caller, so numpy's
    runtime warnings are silenced here.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        g = a.T @ a
        h = a.T @ c
        a2 = a - eta_rho * (a @ g)
        b2 = b - eta_rho * (b @ g)
        c2 = c - gamma_rho * (a @ h)
        d2 = d + gamma_rho * (b @ h)
    return a2, b2, c2, d2


def rho(state: IterState, cfg: SolverConfig) -> float:
    """Step scale 1 / ||A_l||_2^2 under the configured policy."""
    if matcore.frob(state.a) == 0.0:
        raise ZeroMatrix("rho undefined for a zero A block")
    if cfg.rho_policy == "analytic_rescale":
        return 1.0
    return 1.0 / matcore.spectral_norm_sq(state.a, cfg.power_tol, cfg.power_max_iter)


def step(state: IterState, cfg: SolverConfig, rho_l: float | None = None) -> IterState:
    """Advance one iteration; raises NonFinite on overflow."""
    if rho_l is None:
        rho_l = rho(state, cfg)
    a, b, c, d = _apply_update(state.a, state.b, state.c, state.d, cfg.eta * rho_l, cfg.gamma * rho_l)
    if cfg.rho_policy == "analytic_rescale":
        a = 1.5 * a
        b = 1.5 * b
        scale = state.scale_accum * 1.5
    else:
        scale = state.scale_accum
    for block in (a, b, c, d):
        if not np.isfinite(block).all():
            raise NonFinite("non-finite entries after update (step scale misestimated?)")
    return IterState(a=a, b=b, c=c, d=d, l=state.l + 1, rho_l=rho_l, scale_accum=scale)


@dataclass
class Trace:
    """Per-iteration record of one run.

    Row 0 describes the initial state (D = 0); row l the state after l
    updates.  Spectral diagnostics are filled only when requested; the
    telescoping product N_l is kept explicitly for small instances.
    """

    rel_err: list = field(default_factory=list)
    d_history: list = field(default_factory=list)
    rho_values: list = field(default_factory=list)
    wall_ns: list = field(default_factory=list)
    flops: list = field(default_factory=list)
    lambda_bar: list = field(default_factory=list)
    lambda_lo: list = field(default_factory=list)
    kappa: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    eta_lambda: list = field(default_factory=list)
    n_matrices: list = field(default_factory=list)
    w_history: list = field(default_factory=list)
    w_star: np.ndarray | None = None
    d_star: np.ndarray | None = None
    c0: np.ndarray | None = None
    kernel_projector: np.ndarray | None = None
    iterations: int = 0
    converged: bool = False
    flag: str | None = None
    diagnostics: bool = False

    def iterations_to(self, epsilon: float) -> int | None:
        """First iteration index whose recorded error is <= epsilon."""
        for i, err in enumerate(self.rel_err):
            if err <= epsilon:
                return i
        return None


def _spectral_row(trace: Trace, a: np.ndarray, cfg: SolverConfig, rho_l: float | None):
    e = a @ a.T
    eig = matcore.sym_eig(0.5 * (e + e.T), sym_tol=1e-8)
    lam_bar = float(eig.values[0])
    lam_lo = eig.smallest_nonzero()
    trace.lambda_bar.append(lam_bar)
    trace.lambda_lo.append(lam_lo)
    trace.kappa.append(lam_bar / lam_lo)
    trace.theta.append(lam_bar / lam_lo - 1.0)
    trace.eta_lambda.append(cfg.eta * rho_l * lam_bar if rho_l is not None else np.nan)
    return eig


def run_centralized(problem: BlockProblem, cfg: SolverConfig = SolverConfig()):
    """Iterate until the relative D increment falls below stop_tau.

    Returns (D, Trace); a run that exhausts max_iter keeps its best D and
    carries flag='max_iter'.
    """
    a = problem.a.copy()
    b = problem.b.copy()
    c = problem.c.copy()
    d_prime, n_prime = problem.b.shape[0], problem.c.shape[1]
    d_block = np.zeros((d_prime, n_prime))

    trace = Trace(diagnostics=cfg.track_diagnostics)
    trace.w_star = matcore.least_squares_min_norm(a, b)
    trace.d_star = trace.w_star @ c
    trace.c0 = c.copy()

    scale = 1.0
    if cfg.rho_policy == "analytic_rescale":
        est, _, _ = matcore.power_iteration(a, tol=cfg.power_tol, max_iter=cfg.power_max_iter)
        norm = np.sqrt(est)
        a = a / norm
        b = b / norm  # joint scaling keeps W* and the completion unchanged
        scale = 1.0 / norm

    state = IterState(a=a, b=b, c=c, d=d_block, scale_accum=scale)

    track_n = cfg.track_diagnostics and problem.a.shape[0] <= N_MATRIX_MAX_DIM
    if track_n:
        e0 = state.a @ state.a.T
        eig0 = matcore.sym_eig(0.5 * (e0 + e0.T), sym_tol=1e-8)
        trace.kernel_projector = eig0.kernel_projector()
        n_mat = np.eye(problem.a.shape[0])
        trace.n_matrices.append(n_mat.copy())

    d_star_norm = max(matcore.frob(trace.d_star), 1e-300)
    trace.rel_err.append(matcore.frob(state.d - trace.d_star) / d_star_norm)
    trace.d_history.append(state.d.copy())
    trace.wall_ns.append(0)
    trace.flops.append(0)
    if cfg.track_diagnostics:
        _spectral_row(trace, state.a, cfg, None)

    d, n = problem.a.shape
    flops_per_step = step_flops(d, d_prime, n, n_prime, n)
    total_flops = 0
    power_vec = None  # eigenvectors of E_l never change, so warm-start rho

    for _ in range(cfg.max_iter):
        t0 = time.perf_counter_ns()
        if track_n:
            e_pre = state.a @ state.a.T
        prev_d = state.d
        rho_l = None
        if cfg.rho_policy == "exact_norm":
            est, power_vec, _ = matcore.power_iteration(
                state.a, v0=power_vec, tol=cfg.power_tol, max_iter=cfg.power_max_iter
            )
            rho_l = 1.0 / est
        new_state = step(state, cfg, rho_l=rho_l)
        elapsed = time.perf_counter_ns() - t0
        if track_n:
            gamma_rho = cfg.gamma * new_state.rho_l
            n_mat = n_mat - gamma_rho * (e_pre @ n_mat)
            trace.n_matrices.append(n_mat.copy())
        state = new_state
        total_flops += flops_per_step

        trace.rel_err.append(matcore.frob(state.d - trace.d_star) / d_star_norm)
        trace.d_history.append(state.d.copy())
        trace.rho_values.append(state.rho_l)
        trace.wall_ns.append(elapsed)
        trace.flops.append(total_flops)
        if cfg.track_diagnostics:
            _spectral_row(trace, state.a, cfg, state.rho_l)

        trace.iterations = state.l
        increment = matcore.frob(state.d - prev_d) / max(1.0, matcore.frob(state.d))
        if increment < cfg.stop_tau:
            trace.converged = True
            break
    else:
        trace.flag = "max_iter"
    return state.d, trace


def n_matrix_trace(trace: Trace):
    """Per-iteration telescoping residuals ||D_l - W*(I - N_l) C_0||_F,
    relative to ||D*||_F, for both the plain and kernel-projected N_l."""
    if not trace.diagnostics or not trace.n_matrices:
        raise DiagnosticsDisabled(
            "run with track_diagnostics=True on a problem with d <= "
            f"{N_MATRIX_MAX_DIM} to record the telescoping product"
        )
    d_star_norm = max(matcore.frob(trace.d_star), 1e-300)
    eye = np.eye(trace.n_matrices[0].shape[0])
    plain = []
    projected = []
    for d_block, n_mat in zip(trace.d_history, trace.n_matrices):
        plain.append(
            matcore.frob(d_block - trace.w_star @ ((eye - n_mat) @ trace.c0)) / d_star_norm
        )
        n_tilde = n_mat - trace.kernel_projector @ n_mat
        projected.append(
            matcore.frob(d_block - trace.w_star @ ((eye - n_tilde) @ trace.c0)) / d_star_norm
        )
    return np.asarray(plain), np.asarray(projected)


def run_estimation(a, b, cfg: SolverConfig = SolverConfig()):
    """Estimation variant: iterate W toward the min-norm regression operator.

        W+ = W - gamma rho (W A - B) A^T

    with (A, B) conditioned exactly as in the completion run, so the
    schedules match and W_l C_0 reproduces D_l of the completion iteration.
    Returns (W, Trace) with trace.w_history holding every iterate.
    """
    a = matcore.as_matrix(a, copy=True)
    b = matcore.as_matrix(b, copy=True)
    if matcore.frob(a) == 0.0:
        raise ZeroMatrix("estimation requires a nonzero A")
    trace = Trace(diagnostics=cfg.track_diagnostics)
    trace.w_star = matcore.least_squares_min_norm(a, b)
    w_star_norm = max(matcore.frob(trace.w_star), 1e-300)

    if cfg.rho_policy == "analytic_rescale":
        est, _, _ = matcore.power_iteration(a, tol=cfg.power_tol, max_iter=cfg.power_max_iter)
        norm = np.sqrt(est)
        a = a / norm
        b = b / norm

    w = np.zeros((b.shape[0], a.shape[0]))
    trace.w_history.append(w.copy())
    trace.rel_err.append(matcore.frob(w - trace.w_star) / w_star_norm)
    trace.wall_ns.append(0)

    state = IterState(a=a, b=b, c=np.zeros((a.shape[0], 0)), d=np.zeros((b.shape[0], 0)))
    power_vec = None
    for _ in range(cfg.max_iter):
        t0 = time.perf_counter_ns()
        if cfg.rho_policy == "exact_norm":
            est, power_vec, _ = matcore.power_iteration(
                state.a, v0=power_vec, tol=cfg.power_tol, max_iter=cfg.power_max_iter
            )
            rho_l = 1.0 / est
        else:
            rho_l = 1.0
        prev_w = w
        w = w - cfg.gamma * rho_l * ((w @ state.a - state.b) @ state.a.T)
        g = state.a.T @ state.a
        a2 = state.a - cfg.eta * rho_l * (state.a @ g)
        b2 = state.b - cfg.eta * rho_l * (state.b @ g)
        if cfg.rho_policy == "analytic_rescale":
            a2 = 1.5 * a2
            b2 = 1.5 * b2
        state = IterState(a=a2, b=b2, c=state.c, d=state.d, l=state.l + 1, rho_l=rho_l)
        if not np.isfinite(w).all():
            raise NonFinite("non-finite entries in the estimation iterate")

        trace.w_history.append(w.copy())
        trace.rel_err.append(matcore.frob(w - trace.w_star) / w_star_norm)
        trace.wall_ns.append(time.perf_counter_ns() - t0)
        if cfg.track_diagnostics:
            _spectral_row(trace, state.a, cfg, rho_l)

        trace.iterations = state.l
        if matcore.frob(w - prev_w) / max(1.0, matcore.frob(w)) < cfg.stop_tau:
            trace.converged = True
            break
    else:
        trace.flag = "max_iter"
    return w, trace
