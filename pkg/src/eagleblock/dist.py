"""Distributed solver: local conditioning, star-topology fusion, ledger.

Each machine holds a column shard (A^mu, B^mu), jointly normalized at setup
so ||A^mu_0||_2 = 1, and applies the identical centralized update to its
shard and to its replica of the shared (C, D).  Only the proposed shared
blocks travel: machine mu emits (C'^mu, D'^mu), exactly (d + d') * n'
floats, and the aggregator averages contributions in machine-id order and
broadcasts the result.  The step scale needs no communication: after the
joint normalization every machine's ||A^mu_l||_2^2 is (4/9)^l, so rho is
analytic; in `analytic_rescale` mode the shards are instead rescaled by 3/2
per round and rho stays 1.  In `exact_norm` mode each machine measures its
own shard locally, which is communication-free as well.

The accelerated variant freezes every machine's (A, B) updates once
max_mu kappa(A^mu) - 1 < FREEZE_TOL, after which rounds skip the
conditioning work; the fused (C, D) sequence is unchanged to machine
precision because the frozen shards are already perfectly conditioned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .eagle import SolverConfig, Trace, step_flops, _apply_update
from .errors import MissingMessage, NotNormalized, ZeroMatrix
from .problemgen import Partition

FREEZE_TOL = 1e-8


@dataclass
class WorkerState:
    """One machine: local shard, shared-block replicas, freeze flag."""

    mu: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    frozen: bool = False
    scale: float = 1.0
    normalized: bool = False
    rho_l: float = 1.0
    power_vec: np.ndarray | None = None


@dataclass
class RoundMessage:
    """Star-topology payload: the machine's proposed shared blocks."""

    sender: int
    c_contrib: np.ndarray
    d_contrib: np.ndarray

    @property
    def floats(self) -> int:
        return self.c_contrib.size + self.d_contrib.size


@dataclass
class CommLedger:
    """Float counts actually exchanged, per round and per machine."""

    entries: list = field(default_factory=list)  # (round, machine, floats)

    def record(self, round_index: int, machine: int, floats: int) -> None:
        self.entries.append((round_index, machine, floats))

    @property
    def rounds(self) -> int:
        return 1 + max((r for r, _, _ in self.entries), default=-1)

    @property
    def total_floats(self) -> int:
        return sum(f for _, _, f in self.entries)

    def per_round_totals(self) -> list:
        totals = {}
        for r, _, f in self.entries:
            totals[r] = totals.get(r, 0) + f
        return [totals[r] for r in sorted(totals)]

    def cumulative(self) -> list:
        out = []
        acc = 0
        for total in self.per_round_totals():
            acc += total
            out.append(acc)
        return out


def setup_workers(part: Partition, cfg: SolverConfig) -> list[WorkerState]:
    """Normalize each shard jointly by 1 / ||A^mu||_2 and replicate (C, D)."""
    workers = []
    d_prime = part.shards[0][1].shape[0]
    n_prime = part.c.shape[1]
    for mu, (a, b) in enumerate(part.shards):
        if matcore.frob(a) == 0.0:
            raise ZeroMatrix(f"shard {mu} has an all-zero A block")
        # the completion is invariant under any joint (A, B) scaling, so the
        # estimate needs no convergence flag here
        est, _, _ = matcore.power_iteration(a, tol=cfg.power_tol, max_iter=cfg.power_max_iter)
        norm = np.sqrt(est)
        workers.append(
            WorkerState(
                mu=mu,
                a=a / norm,
                b=b / norm,  # joint scaling preserves B = W* A and the completion
                c=part.c.copy(),
                d=np.zeros((d_prime, n_prime)),
                scale=1.0 / norm,
                normalized=True,
            )
        )
    return workers


def local_update(worker: WorkerState, cfg: SolverConfig) -> tuple[WorkerState, RoundMessage]:
    """One local round: condition the shard (unless frozen) and propose the
    shared-block updates.  Mutates and returns the worker."""
    if not worker.normalized:
        raise NotNormalized(f"worker {worker.mu} was not set up with unit spectral norm")
    if cfg.rho_policy == "exact_norm":
        est, worker.power_vec, _ = matcore.power_iteration(
            worker.a, v0=worker.power_vec, tol=cfg.power_tol, max_iter=cfg.power_max_iter
        )
        rho_l = 1.0 / est
    else:
        rho_l = worker.rho_l  # held analytic value; 1.0 under rescaling
    if worker.frozen:
        h = worker.a.T @ worker.c
        c2 = worker.c - cfg.gamma * rho_l * (worker.a @ h)
        d2 = worker.d + cfg.gamma * rho_l * (worker.b @ h)
    else:
        a2, b2, c2, d2 = _apply_update(
            worker.a, worker.b, worker.c, worker.d, cfg.eta * rho_l, cfg.gamma * rho_l
        )
        if cfg.rho_policy == "analytic_rescale":
            a2 = 1.5 * a2
            b2 = 1.5 * b2
        worker.a = a2
        worker.b = b2
    return worker, RoundMessage(sender=worker.mu, c_contrib=c2, d_contrib=d2)


def fuse(messages) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic mean of the proposed shared blocks in machine-id order."""
    senders = sorted(m.sender for m in messages)
    if senders != list(range(len(messages))):
        raise MissingMessage(f"expected one message per machine, got senders {senders}")
    ordered = sorted(messages, key=lambda m: m.sender)
    c_acc = ordered[0].c_contrib.copy()
    d_acc = ordered[0].d_contrib.copy()
    for msg in ordered[1:]:
        c_acc += msg.c_contrib
        d_acc += msg.d_contrib
    m = float(len(ordered))
    return c_acc / m, d_acc / m


def shard_kappa(worker: WorkerState) -> float:
    """Condition number of the shard A^mu (ratio of extreme nonzero
    singular values)."""
    e = worker.a @ worker.a.T
    eig = matcore.sym_eig(0.5 * (e + e.T), sym_tol=1e-8)
    return float(np.sqrt(eig.values[0] / eig.smallest_nonzero()))


def run_distributed(
    part: Partition,
    cfg: SolverConfig = SolverConfig(rho_policy="analytic_rescale"),
    accelerated: bool = False,
    round_log: str | None = None,
):
    """Rounds of local updates + fusion until the stopping rule fires on D.

    Returns (D, Trace, CommLedger).  With `accelerated`, all machines freeze
    their (A, B) once every shard satisfies kappa(A^mu) - 1 < FREEZE_TOL.
    An optional CSV round log records round, machine, floats_sent, frozen.
    """
    workers = setup_workers(part, cfg)
    ledger = CommLedger()
    trace = Trace(diagnostics=cfg.track_diagnostics)

    a_glob, b_glob = part.global_blocks()
    trace.w_star = matcore.least_squares_min_norm(a_glob, b_glob)
    trace.d_star = trace.w_star @ part.c
    trace.c0 = part.c.copy()
    d_star_norm = max(matcore.frob(trace.d_star), 1e-300)

    d_block = workers[0].d.copy()
    trace.rel_err.append(matcore.frob(d_block - trace.d_star) / d_star_norm)
    trace.d_history.append(d_block.copy())
    trace.wall_ns.append(0)
    trace.flops.append(0)

    d_rows = part.c.shape[0]
    d_prime, n_prime = d_block.shape
    per_round_flops = sum(
        step_flops(d_rows, d_prime, a.shape[1], n_prime, a.shape[1]) for a, _ in part.shards
    )
    total_flops = 0
    frozen = False
    log_lines = []

    for round_index in range(cfg.max_iter):
        t0 = time.perf_counter_ns()
        messages = []
        for worker in workers:
            _, msg = local_update(worker, cfg)
            messages.append(msg)
            ledger.record(round_index, worker.mu, msg.floats)
            if round_log is not None:
                log_lines.append(f"{round_index},{worker.mu},{msg.floats},{int(worker.frozen)}")
        c_next, d_next = fuse(messages)
        prev_d = d_block
        d_block = d_next
        for worker in workers:
            worker.c = c_next.copy()
            worker.d = d_next.copy()
        elapsed = time.perf_counter_ns() - t0
        total_flops += per_round_flops

        trace.rel_err.append(matcore.frob(d_block - trace.d_star) / d_star_norm)
        trace.d_history.append(d_block.copy())
        trace.wall_ns.append(elapsed)
        trace.flops.append(total_flops)
        trace.iterations = round_index + 1

        if accelerated and not frozen:
            if max(shard_kappa(w) for w in workers) - 1.0 < FREEZE_TOL:
                frozen = True
                for worker in workers:
                    worker.frozen = True  # rho held at its freeze-time value

        if matcore.frob(d_block - prev_d) / max(1.0, matcore.frob(d_block)) < cfg.stop_tau:
            trace.converged = True
            break
    else:
        trace.flag = "max_iter"

    if round_log is not None:
        with open(round_log, "w") as fh:
            fh.write("round,machine,floats_sent,frozen_flag\n")
            fh.write("\n".join(log_lines))
            fh.write("\n")
    return d_block, trace, ledger
