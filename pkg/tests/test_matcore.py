"""Dense-kernel tests; the eigensolver is checked against an independent
one-sided Jacobi SVD written here, not against another LAPACK call."""

import numpy as np
import pytest

from eagleblock import matcore
from eagleblock.errors import NonConvergenceWarning, NotSymmetric, ZeroMatrix


def jacobi_singular_values(a, sweeps=60, tol=1e-14):
    """One-sided Jacobi: rotate column pairs until all are orthogonal.

    Independent oracle for singular values (hence eigenvalues of A A^T).
    """
    u = np.array(a, dtype=float, copy=True)
    n = u.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(u[:, p] @ u[:, q])
                app = float(u[:, p] @ u[:, p])
                aqq = float(u[:, q] @ u[:, q])
                off = max(off, abs(apq) / max(np.sqrt(app * aqq), 1e-300))
                if apq == 0.0:
                    continue
                tau = (aqq - app) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                up = u[:, p].copy()
                u[:, p] = c * up - s * u[:, q]
                u[:, q] = s * up + c * u[:, q]
        if off < tol:
            break
    sv = np.sqrt(np.sum(u * u, axis=0))
    return np.sort(sv)[::-1]


def rand(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


class TestMatrixConstruction:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            matcore.as_matrix([[1.0, np.nan]])

    def test_rejects_inf(self):
        with pytest.raises(ValueError):
            matcore.as_matrix([[np.inf, 0.0]])

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            matcore.as_matrix([1.0, 2.0])

    def test_accepts_and_casts(self):
        m = matcore.as_matrix([[1, 2], [3, 4]])
        assert m.dtype == np.float64 and m.shape == (2, 2)


class TestSpectralNormSq:
    def test_identity(self):
        assert matcore.spectral_norm_sq(np.eye(7)) == pytest.approx(1.0, rel=1e-10)

    def test_diagonal(self):
        assert matcore.spectral_norm_sq(np.diag([3.0, 1.0])) == pytest.approx(9.0, rel=1e-10)

    def test_matches_dense_eig_oracle(self):
        a = rand((20, 30), 0)
        expected = np.linalg.eigvalsh(a @ a.T)[-1]
        assert matcore.spectral_norm_sq(a) == pytest.approx(expected, rel=1e-8)

    def test_zero_matrix_raises(self):
        with pytest.raises(ZeroMatrix):
            matcore.spectral_norm_sq(np.zeros((3, 3)))

    def test_nonconvergence_warns_and_returns(self):
        a = rand((12, 12), 1)
        with pytest.warns(NonConvergenceWarning):
            est = matcore.spectral_norm_sq(a, tol=0.0, max_iter=3)
        assert est > 0.0

    def test_ones_in_kernel_falls_back_to_basis_vector(self):
        m = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]).T  # columns sum to 0
        est = matcore.spectral_norm_sq(m)  # M M^T maps the all-ones start to 0
        expected = np.linalg.eigvalsh(m @ m.T)[-1]
        assert est == pytest.approx(expected, rel=1e-9)

    def test_bounds_property(self):
        for seed in range(50):
            a = rand((9, 13), 100 + seed)
            lam = matcore.spectral_norm_sq(a)
            assert lam >= max(np.sum(a * a, axis=0)) / a.shape[1] * (1 - 1e-12)
            assert lam <= np.sum(a * a) * (1 + 1e-12)


class TestSymEig:
    def test_diagonal_with_rank(self):
        eig = matcore.sym_eig(np.diag([2.0, 0.5, 0.0]))
        assert np.allclose(eig.values, [2.0, 0.5, 0.0])
        assert eig.rank == 2

    def test_one_by_one(self):
        eig = matcore.sym_eig([[7.0]])
        assert eig.values[0] == pytest.approx(7.0)

    def test_against_jacobi_oracle(self):
        a = rand((12, 17), 2)
        eig = matcore.sym_eig(a @ a.T)
        sv = jacobi_singular_values(a)
        assert np.allclose(eig.values[:12], sv[:12] ** 2, rtol=1e-8, atol=1e-10)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(NotSymmetric):
            matcore.sym_eig(rand((5, 5), 3))
        with pytest.raises(NotSymmetric):
            matcore.sym_eig(rand((4, 6), 3))

    def test_reconstruction_and_orthonormality_200_seeds(self):
        for seed in range(200):
            a = rand((8, 11), 500 + seed)
            e = a @ a.T
            eig = matcore.sym_eig(e)
            assert np.abs(eig.vectors.T @ eig.vectors - np.eye(8)).max() <= 1e-10
            recon = (eig.vectors * eig.values) @ eig.vectors.T
            assert matcore.frob(e - recon) <= 1e-8 * matcore.frob(e)
            assert np.all(np.diff(eig.values) <= 0)


class TestLeastSquaresMinNorm:
    def test_identity_a(self):
        b = rand((3, 6), 4)
        w = matcore.least_squares_min_norm(np.eye(6), b)
        assert np.allclose(w, b, rtol=0, atol=1e-14)

    def test_recovers_planted_operator(self):
        a = rand((8, 20), 5)  # full row rank
        w0 = rand((3, 8), 6)
        w = matcore.least_squares_min_norm(a, w0 @ a)
        assert matcore.frob(w - w0) <= 1e-10 * matcore.frob(w0)

    def test_rank_deficient_kernel_component_zero(self):
        u = rand((9, 4), 7)
        v = rand((15, 4), 8)
        a = u @ v.T  # rank 4
        b = rand((2, 9), 9) @ a
        w = matcore.least_squares_min_norm(a, b)
        eig = matcore.sym_eig(a @ a.T, sym_tol=1e-8)
        kernel = eig.vectors[:, eig.values <= eig.rank_cutoff]
        assert matcore.frob(w @ kernel) <= 1e-10 * max(matcore.frob(w), 1.0)
        # and the fit is still exact on the range
        assert matcore.frob(w @ a - b) <= 1e-9 * matcore.frob(b)


class TestOrthonormalColumns:
    def test_single_basis_vector(self):
        q = matcore.orthonormal_columns(np.array([[1.0], [0.0], [0.0]]))
        assert q.shape == (3, 1)
        assert abs(abs(q[0, 0]) - 1.0) <= 1e-14

    def test_duplicated_columns_span_once(self):
        col = rand((6, 1), 10)
        q = matcore.orthonormal_columns(np.hstack([col, col, 2 * col]))
        assert q.shape == (6, 1)

    def test_projector_matches_pinv_oracle(self):
        a = rand((10, 4), 11)
        q = matcore.orthonormal_columns(a)
        proj_oracle = a @ np.linalg.pinv(a.T @ a) @ a.T
        assert matcore.frob(q @ q.T - proj_oracle) <= 1e-8

    def test_reproduces_input(self):
        a = rand((9, 5), 12)
        q = matcore.orthonormal_columns(a)
        assert matcore.frob(q @ (q.T @ a) - a) <= 1e-9 * matcore.frob(a)

    def test_zero_matrix_raises(self):
        with pytest.raises(ZeroMatrix):
            matcore.orthonormal_columns(np.zeros((4, 2)))


def test_transpose_product_property():
    for seed in range(30):
        a = rand((8, 8), 700 + seed)
        b = rand((8, 8), 900 + seed)
        assert matcore.frob((a @ b).T - b.T @ a.T) <= 1e-13 * matcore.frob(a @ b)
