"""Distributed rounds: fusion, ledger, freeze variant, theory invariants."""

import numpy as np
import pytest

from eagleblock import dist, eagle, matcore, problemgen
from eagleblock.dist import CommLedger, RoundMessage, WorkerState
from eagleblock.eagle import SolverConfig
from eagleblock.errors import MissingMessage, NotNormalized
from eagleblock.problemgen import GenSpec


def make_partition(d=12, n=24, machines=3, kappa=30.0, seed=7, overlap=0.0):
    p = problemgen.generate(
        GenSpec(kind="svd_spectrum", d=d, n=n, rank=d, kappa_target=kappa), seed
    )
    return problemgen.partition(p, machines, overlap=overlap, seed=seed)


def cfg_rescale(**kw):
    return SolverConfig(rho_policy="analytic_rescale", **kw)


class TestSetupAndLocalUpdate:
    def test_setup_normalizes_jointly(self):
        part = make_partition()
        workers = dist.setup_workers(part, cfg_rescale())
        w_star = matcore.least_squares_min_norm(*part.global_blocks())
        for w in workers:
            assert matcore.spectral_norm_sq(w.a) == pytest.approx(1.0, rel=1e-8)
            # joint scaling keeps the shard consistent with the global operator
            assert matcore.frob(w.b - w_star @ w.a) <= 1e-9 * matcore.frob(w.b)

    def test_unnormalized_worker_rejected(self):
        part = make_partition()
        w = WorkerState(
            mu=0,
            a=part.shards[0][0],
            b=part.shards[0][1],
            c=part.c.copy(),
            d=np.zeros((2, 2)),
        )
        with pytest.raises(NotNormalized):
            dist.local_update(w, cfg_rescale())

    def test_frozen_worker_keeps_shard_but_still_messages(self):
        part = make_partition()
        workers = dist.setup_workers(part, cfg_rescale())
        w = workers[0]
        w.frozen = True
        a_before = w.a.copy()
        _, msg = dist.local_update(w, cfg_rescale())
        assert np.array_equal(w.a, a_before)
        assert msg.c_contrib.shape == part.c.shape
        assert msg.d_contrib.shape == (2, 2)

    def test_message_float_count(self):
        # d=1000, d'=2, n'=2 -> 2004 floats per machine per round
        a = np.zeros((1000, 3))
        a[:3, :3] = np.eye(3)
        msg = RoundMessage(sender=0, c_contrib=np.zeros((1000, 2)), d_contrib=np.zeros((2, 2)))
        assert msg.floats == (1000 + 2) * 2 == 2004


class TestFuse:
    def test_identical_messages_idempotent(self):
        c = np.arange(6.0).reshape(3, 2)
        d = np.arange(4.0).reshape(2, 2)
        msgs = [RoundMessage(sender=i, c_contrib=c.copy(), d_contrib=d.copy()) for i in range(4)]
        c_out, d_out = dist.fuse(msgs)
        assert np.array_equal(c_out, c)
        assert np.array_equal(d_out, d)

    def test_mean_matches_reference_summation(self):
        rng = np.random.default_rng(0)
        msgs = [
            RoundMessage(sender=i, c_contrib=rng.standard_normal((5, 2)), d_contrib=rng.standard_normal((2, 2)))
            for i in range(5)
        ]
        c_ref = msgs[0].c_contrib.copy()
        for m in msgs[1:]:
            c_ref = c_ref + m.c_contrib
        c_ref = c_ref / 5.0
        shuffled = [msgs[i] for i in (3, 0, 4, 2, 1)]
        c_out, _ = dist.fuse(shuffled)
        assert np.array_equal(c_out, c_ref)  # 0 ulp: fixed machine-id order

    def test_missing_message_rejected(self):
        msgs = [RoundMessage(sender=i, c_contrib=np.zeros((2, 1)), d_contrib=np.zeros((1, 1))) for i in (0, 2)]
        with pytest.raises(MissingMessage):
            dist.fuse(msgs)

    def test_identical_shards_match_single_machine_run(self):
        # four identical shards: averaging is idempotent (power-of-two M keeps
        # the mean bitwise), so the run equals the single-machine run
        p = problemgen.generate(GenSpec(kind="svd_spectrum", d=8, n=8, rank=8, kappa_target=10.0), 3)
        single = problemgen.Partition(
            shards=[(p.a.copy(), p.b.copy())], c=p.c.copy(), d_hidden=p.d_hidden.copy(),
            overlap=0.0, problem=p,
        )
        repeated = problemgen.Partition(
            shards=[(p.a.copy(), p.b.copy()) for _ in range(4)],
            c=p.c.copy(), d_hidden=p.d_hidden.copy(), overlap=0.0, problem=p,
        )
        cfg = cfg_rescale(max_iter=12, stop_tau=0.0)
        d1, t1, _ = dist.run_distributed(single, cfg)
        d4, t4, _ = dist.run_distributed(repeated, cfg)
        for a, b in zip(t1.d_history, t4.d_history):
            assert np.array_equal(a, b)


class TestRunDistributed:
    def test_m1_bitwise_equals_centralized(self):
        part = make_partition(machines=1)
        a_mu, b_mu = part.shards[0]
        shuffled = problemgen.BlockProblem(a=a_mu, b=b_mu, c=part.c, d_hidden=part.d_hidden)
        cfg = cfg_rescale(max_iter=15, stop_tau=0.0)
        _, trace_c = eagle.run_centralized(shuffled, cfg)
        _, trace_d, _ = dist.run_distributed(part, cfg)
        for d1, d2 in zip(trace_c.d_history, trace_d.d_history):
            assert np.array_equal(d1, d2)

    def test_converges_with_full_cover_shards(self):
        # every shard spans the full row space (n/M >= d), so the averaged
        # energy conditions completely and the run converges fast
        part = make_partition(d=8, n=32, machines=4)
        cfg = cfg_rescale(max_iter=60)
        d_block, trace, ledger = dist.run_distributed(part, cfg)
        w_star = matcore.least_squares_min_norm(*part.global_blocks())
        d_star = w_star @ part.c
        assert matcore.frob(d_block - d_star) <= 1e-8 * matcore.frob(d_star)
        assert trace.converged

    def test_rank_deficient_shards_slow_down_with_low_diversity(self):
        # a square problem split four ways gives shard spans of dimension
        # d/4; the measured diversity then caps the per-round contraction
        part = make_partition(d=16, n=16, machines=4)
        alpha = problemgen.diversity_index(part.shards)
        assert alpha <= 0.25 + 1e-9
        _, trace, _ = dist.run_distributed(part, cfg_rescale(max_iter=30))
        assert trace.rel_err[-1] > 1e-10  # nowhere near converged yet

    def test_ledger_exactness(self):
        part = make_partition(d=12, n=24, machines=3)
        cfg = cfg_rescale(max_iter=40)
        _, trace, ledger = dist.run_distributed(part, cfg)
        per_machine = (12 + 2) * 2
        assert all(f == per_machine for _, _, f in ledger.entries)
        assert ledger.total_floats == ledger.rounds * 3 * per_machine
        cum = ledger.cumulative()
        assert all(b - a == 3 * per_machine for a, b in zip(cum, cum[1:]))

    def test_exact_norm_policy_also_converges(self):
        part = make_partition(d=10, n=20, machines=2)
        cfg = SolverConfig(rho_policy="exact_norm", max_iter=120)
        d_block, trace, _ = dist.run_distributed(part, cfg)
        w_star = matcore.least_squares_min_norm(*part.global_blocks())
        d_star = w_star @ part.c
        assert matcore.frob(d_block - d_star) <= 1e-8 * matcore.frob(d_star)

    def test_round_log_written(self, tmp_path):
        part = make_partition(machines=2)
        path = tmp_path / "rounds.csv"
        dist.run_distributed(part, cfg_rescale(max_iter=5, stop_tau=0.0), round_log=str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "round,machine,floats_sent,frozen_flag"
        assert len(lines) == 1 + 5 * 2

    def test_v_invariance_per_machine(self):
        # noiseless: the shard correlation B^mu A^mu^T tracks W* E^mu forever
        part = make_partition(d=10, n=20, machines=2, kappa=20.0)
        w_star = matcore.least_squares_min_norm(*part.global_blocks())
        cfg = cfg_rescale(max_iter=1, stop_tau=0.0)
        workers = dist.setup_workers(part, cfg)
        for _ in range(12):
            msgs = []
            for w in workers:
                _, m = dist.local_update(w, cfg)
                msgs.append(m)
            c_next, d_next = dist.fuse(msgs)
            for w in workers:
                w.c, w.d = c_next.copy(), d_next.copy()
                v_mu = w.b @ w.a.T
                e_mu = w.a @ w.a.T
                bound = 1e-9 * matcore.frob(w_star) * max(matcore.frob(e_mu), 1e-300)
                assert matcore.frob(v_mu - w_star @ e_mu) <= bound


class TestAccelerated:
    def test_freeze_fires_and_iterates_match(self):
        part = make_partition(d=12, n=24, machines=3, kappa=30.0)
        cfg = cfg_rescale(max_iter=60)
        d_plain, t_plain, _ = dist.run_distributed(part, cfg, accelerated=False)
        d_fast, t_fast, _ = dist.run_distributed(part, cfg, accelerated=True)
        assert len(t_plain.rel_err) == len(t_fast.rel_err)
        scale = max(matcore.frob(d_plain), 1e-300)
        for a, b in zip(t_plain.d_history, t_fast.d_history):
            assert matcore.frob(a - b) <= 1e-10 * scale

    def test_frozen_shards_are_conditioned(self):
        part = make_partition(d=10, n=20, machines=2, kappa=10.0)
        cfg = cfg_rescale(max_iter=80)
        workers = dist.setup_workers(part, cfg)
        for _ in range(40):
            msgs = [dist.local_update(w, cfg)[1] for w in workers]
            c_next, d_next = dist.fuse(msgs)
            for w in workers:
                w.c, w.d = c_next.copy(), d_next.copy()
            if max(dist.shard_kappa(w) for w in workers) - 1.0 < dist.FREEZE_TOL:
                break
        assert max(dist.shard_kappa(w) for w in workers) - 1.0 < dist.FREEZE_TOL


class TestCommLedger:
    def test_cumulative_monotone(self):
        ledger = CommLedger()
        for r in range(4):
            for mu in range(3):
                ledger.record(r, mu, 28)
        cum = ledger.cumulative()
        assert cum == [84, 168, 252, 336]
        assert ledger.rounds == 4
