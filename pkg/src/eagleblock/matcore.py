"""Dense-matrix kernel: norms, symmetric eigendecomposition, min-norm least
squares, orthonormal column bases.

A "matrix" throughout the package is a 2-D float64 C-contiguous ndarray with
all entries finite; `as_matrix` is the validating constructor.  The spectral
norm is obtained by a hand-rolled deterministic power iteration (all-ones
start vector); factorizations are delegated to LAPACK via numpy, with the
rank cutoff max(rows, cols) * 2**-52 * lambda_max applied uniformly to rank
decisions and pseudo-inverses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceWarning, NotSymmetric, ZeroMatrix

EPS = 2.0**-52

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000


def as_matrix(data, copy: bool = False) -> np.ndarray:
    """Validate and return a 2-D finite float64 array."""
    if copy:
        a = np.array(data, dtype=np.float64, order="C")
    else:
        a = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if a.size and not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    return a


def frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def rank_cutoff(shape, lam_max: float) -> float:
    """Threshold below which eigenvalues of a Gram matrix count as zero."""
    return max(shape) * EPS * lam_max


def power_iteration(a, v0=None, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER):
    """Power iteration for the top eigenpair of A A^T.

    Returns (estimate, vector, converged).  The start vector defaults to the
    normalized all-ones vector, falling back to the first basis vector e_i
    with a nonzero image if that lies in the kernel; callers that track a
    slowly-varying matrix may pass the previous eigenvector to keep the
    alignment acquired while spectral gaps were still large.
    """
    a = as_matrix(a)
    if frob(a) == 0.0:
        raise ZeroMatrix("spectral norm of an all-zero matrix")
    d = a.shape[0]
    if v0 is not None and np.linalg.norm(v0) > 0.0:
        v = np.asarray(v0, dtype=np.float64)
        v = v / np.linalg.norm(v)
    else:
        v = np.full(d, 1.0 / np.sqrt(d))
    image = a @ (a.T @ v)
    if np.linalg.norm(image) == 0.0:
        for i in range(d):
            v = np.zeros(d)
            v[i] = 1.0
            image = a @ (a.T @ v)
            if np.linalg.norm(image) > 0.0:
                break
    est = float(v @ image)
    prev_change = None
    for _ in range(max_iter):
        norm = np.linalg.norm(image)
        if norm == 0.0:
            return est, v, True
        v = image / norm
        image = a @ (a.T @ v)
        new_est = float(v @ image)
        change = abs(new_est - est)
        if change <= 4.0 * EPS * abs(new_est):
            return new_est, v, True
        # Rayleigh quotients converge linearly; extrapolate the remaining
        # error from the change ratio so near-degenerate spectra do not
        # trigger a premature exit
        if prev_change is not None and prev_change > 0.0:
            ratio = change / prev_change
            if ratio < 1.0:
                remaining = change * ratio / (1.0 - ratio)
                if remaining <= tol * abs(new_est):
                    return new_est, v, True
        elif change <= tol * abs(new_est) * 1e-3:
            return new_est, v, True
        prev_change = change
        est = new_est
    return est, v, False


def spectral_norm_sq(a, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Largest eigenvalue of A A^T by power iteration (all-ones start).

    Raises ZeroMatrix for an all-zero input; warns (and returns the best
    estimate) if `tol` is not met within `max_iter` sweeps.
    """
    est, _, converged = power_iteration(a, tol=tol, max_iter=max_iter)
    if not converged:
        warnings.warn(
            f"power iteration did not reach tol={tol} in {max_iter} sweeps",
            NonConvergenceWarning,
        )
    return est


@dataclass
class EigSym:
    """Full symmetric spectrum, eigenvalues descending, columns orthonormal."""

    values: np.ndarray
    vectors: np.ndarray
    rank_cutoff: float

    @property
    def rank(self) -> int:
        return int(np.sum(self.values > self.rank_cutoff))

    def smallest_nonzero(self) -> float:
        """Smallest eigenvalue above the rank cutoff."""
        kept = self.values[self.values > self.rank_cutoff]
        if kept.size == 0:
            raise ZeroMatrix("matrix has no eigenvalue above the rank cutoff")
        return float(kept[-1])

    def kernel_projector(self) -> np.ndarray:
        null = self.vectors[:, self.values <= self.rank_cutoff]
        return null @ null.T


def sym_eig(e, sym_tol: float = 1e-10) -> EigSym:
    """Eigendecomposition of a symmetric matrix, descending order."""
    e = as_matrix(e)
    if e.shape[0] != e.shape[1]:
        raise NotSymmetric(f"matrix is {e.shape[0]}x{e.shape[1]}, not square")
    scale = frob(e)
    if frob(e - e.T) > sym_tol * max(scale, 1e-300):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    w, v = np.linalg.eigh(0.5 * (e + e.T))
    order = np.argsort(w, kind="stable")[::-1]
    w = w[order]
    v = v[:, order]
    return EigSym(values=w, vectors=v, rank_cutoff=rank_cutoff(e.shape, abs(float(w[0]))))


def least_squares_min_norm(a, b) -> np.ndarray:
    """Minimum-Frobenius-norm W with W A closest to B in Frobenius norm.

    Computed as B A^+ through the SVD of A with the standard scaled cutoff,
    so W carries no component on the kernel of A A^T.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape} vs {b.shape}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((b.shape[0], a.shape[0]))
    keep = s > max(a.shape) * EPS * s[0]
    return (b @ vt[keep].T / s[keep]) @ u[:, keep].T


def orthonormal_columns(a) -> np.ndarray:
    """Orthonormal basis Q for the column span of A (rank-revealing SVD)."""
    a = as_matrix(a)
    if frob(a) == 0.0:
        raise ZeroMatrix("column span of an all-zero matrix")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    keep = s > max(a.shape) * EPS * s[0]
    return np.ascontiguousarray(u[:, keep])
