"""Oracle and classical-baseline tests."""

import numpy as np
import pytest

from eagleblock import eagle, matcore, problemgen, reference
from eagleblock.errors import ZeroMatrix
from eagleblock.problemgen import GenSpec


def svd_problem(d, n, kappa, seed=0, rank=None):
    return problemgen.generate(
        GenSpec(kind="svd_spectrum", d=d, n=n, rank=rank or min(d, n), kappa_target=kappa), seed
    )


class TestNystromSolve:
    def test_identity_a(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal((2, 5))
        c = rng.standard_normal((5, 3))
        res = reference.nystrom_solve(np.eye(5), b, c)
        assert np.allclose(res.w_star, b, atol=1e-13)
        assert np.allclose(res.d_star, b @ c, atol=1e-13)

    def test_scalar_blocks(self):
        res = reference.nystrom_solve([[1.0]], [[2.0]], [[3.0]])
        assert res.w_star[0, 0] == pytest.approx(2.0)
        assert res.d_star[0, 0] == pytest.approx(6.0)

    def test_matches_hidden_block_on_noiseless_problem(self):
        p = svd_problem(24, 30, 50.0, seed=1)
        res = reference.nystrom_solve(p.a, p.b, p.c)
        assert matcore.frob(res.d_star - p.d_hidden) <= 1e-8 * matcore.frob(p.d_hidden)

    def test_result_internally_consistent(self):
        p = svd_problem(10, 14, 10.0, seed=2)
        res = reference.nystrom_solve(p.a, p.b, p.c)
        assert matcore.frob(res.d_star - res.w_star @ p.c) <= 1e-12 * max(
            matcore.frob(res.d_star), 1.0
        )

    def test_zero_a_rejected(self):
        with pytest.raises(ZeroMatrix):
            reference.nystrom_solve(np.zeros((3, 3)), np.ones((1, 3)), np.ones((3, 1)))


class TestGradientDescent:
    def test_identity_a_converges_fast(self):
        rng = np.random.default_rng(3)
        a = np.eye(8)
        b = rng.standard_normal((2, 8))
        c = rng.standard_normal((8, 2))
        d_block, trace = reference.gd_run((a, b), c, max_iter=10)
        oracle = reference.nystrom_solve(a, b, c)
        assert matcore.frob(d_block - oracle.d_star) <= 1e-10 * matcore.frob(oracle.d_star)
        assert trace.iterations <= 5

    def test_objective_monotone_full_rank(self):
        p = svd_problem(24, 24, 10.0, seed=4)
        _, trace = reference.gd_run((p.a, p.b), p.c, max_iter=2000)
        obj = np.asarray(trace.objective)
        assert np.all(np.diff(obj) <= 1e-12 * np.maximum(obj[:-1], 1.0))

    def test_ridge_engages_only_when_rank_deficient(self):
        full = svd_problem(12, 16, 5.0, seed=5)
        low = svd_problem(12, 16, 5.0, seed=5, rank=6)
        # full rank: converges to the oracle exactly (lambda = 0)
        d_full, _ = reference.gd_run((full.a, full.b), full.c, max_iter=40000)
        oracle = reference.nystrom_solve(full.a, full.b, full.c)
        assert matcore.frob(d_full - oracle.d_star) <= 1e-7 * matcore.frob(oracle.d_star)
        # rank deficient: the ridge biases the fixed point away from the oracle
        d_low, trace_low = reference.gd_run((low.a, low.b), low.c, max_iter=4000)
        oracle_low = reference.nystrom_solve(low.a, low.b, low.c)
        resid = matcore.frob(d_low - oracle_low.d_star) / matcore.frob(oracle_low.d_star)
        assert resid > 1e-7

    def test_distributed_matches_central_fixed_point(self):
        p = svd_problem(12, 24, 5.0, seed=6)
        part = problemgen.partition(p, 3, overlap=0.0, seed=1)
        d_block, trace = reference.gd_run(part.shards, p.c, mode="distributed", max_iter=60000)
        oracle = reference.nystrom_solve(p.a, p.b, p.c)
        assert matcore.frob(d_block - oracle.d_star) <= 1e-6 * matcore.frob(oracle.d_star)

    def test_distributed_comm_floats_match_completion_ledger(self):
        p = svd_problem(10, 20, 5.0, seed=7)
        part = problemgen.partition(p, 4, overlap=0.0, seed=2)
        _, trace = reference.gd_run(part.shards, p.c, mode="distributed", max_iter=7)
        per_round = 4 * (10 + 2) * 2
        assert trace.comm_floats[0] == 0
        diffs = np.diff(trace.comm_floats)
        assert np.all(diffs == per_round)

    def test_stochastic_mode_runs(self):
        p = svd_problem(16, 16, 3.0, seed=8)
        d_block, trace = reference.gd_run(
            (p.a, p.b), p.c, mode="stochastic", r=8, max_iter=4000, sketch_seed=0
        )
        oracle = reference.nystrom_solve(p.a, p.b, p.c)
        assert matcore.frob(d_block - oracle.d_star) <= 1e-3 * matcore.frob(oracle.d_star)


class TestConjugateGradient:
    def test_identity_gram_one_iteration(self):
        rng = np.random.default_rng(9)
        a = np.linalg.qr(rng.standard_normal((12, 6)))[0].T  # 6 x 12, A A^T = I_6
        b = rng.standard_normal((2, 12))
        c = rng.standard_normal((6, 2))
        d_block, trace = reference.cg_run(a, b, c, max_iter=5)
        oracle = reference.nystrom_solve(a, b, c)
        assert trace.iterations <= 2
        assert matcore.frob(d_block - oracle.d_star) <= 1e-10 * max(
            matcore.frob(oracle.d_star), 1.0
        )

    def test_machine_precision_in_at_most_d_iterations(self):
        # exact-arithmetic finite termination shows through in floating point
        # once the Gram matrix is reasonably conditioned
        p = svd_problem(32, 32, 3.0, seed=10)
        d_block, trace = reference.cg_run(p.a, p.b, p.c, max_iter=32)
        oracle = reference.nystrom_solve(p.a, p.b, p.c)
        assert matcore.frob(d_block - oracle.d_star) <= 1e-10 * matcore.frob(oracle.d_star)
        assert trace.iterations <= 32

    def test_residual_orthogonality(self):
        p = svd_problem(16, 16, 5.0, seed=11)
        g = p.a @ p.a.T
        rhs = p.b @ p.a.T
        x = np.zeros_like(rhs)
        r = rhs - x @ g
        pdir = r.copy()
        rr = float(np.sum(r * r))
        for _ in range(10):
            pg = pdir @ g
            alpha = rr / float(np.sum(pdir * pg))
            x = x + alpha * pdir
            r_next = r - alpha * pg
            assert abs(float(np.sum(r_next * r))) <= 1e-8 * rr
            rr_next = float(np.sum(r_next * r_next))
            pdir = r_next + (rr_next / rr) * pdir
            r, rr = r_next, rr_next

    def test_breakdown_flag_on_rank_deficient_gram(self):
        p = svd_problem(16, 20, 100.0, seed=12, rank=5)
        _, trace = reference.cg_run(p.a, p.b, p.c, max_iter=200)
        assert trace.flag in ("breakdown", None)
        # with a singular Gram the run must either break down or converge on
        # the range; it must not diverge
        assert np.isfinite(trace.rel_err[-1])

    def test_iteration_count_between_gd_and_completion_solver(self):
        p = svd_problem(32, 32, 31.6, seed=13)  # kappa_E = 1e3
        _, t_cg = reference.cg_run(p.a, p.b, p.c, max_iter=4000, tol=0.0)
        _, t_gd = reference.gd_run((p.a, p.b), p.c, max_iter=60000, tol=0.0)
        _, t_eagle = eagle.run_centralized(p, eagle.SolverConfig())
        target = 1e-6
        it_cg = t_cg.iterations_to(target)
        it_gd = t_gd.iterations_to(target)
        it_eagle = t_eagle.iterations_to(target)
        assert it_eagle is not None and it_cg is not None and it_gd is not None
        assert it_eagle <= it_cg <= it_gd


def test_two_step_norm_estimate_is_safe_underestimate():
    for seed in range(30):
        rng = np.random.default_rng(40 + seed)
        a = rng.standard_normal((16, 16))
        est = reference.two_step_norm_sq(a)
        true = float(np.linalg.eigvalsh(a @ a.T)[-1])
        assert est <= true * (1 + 1e-12)
        assert est >= 0.5 * true  # keeps the descent step below 2 / L
