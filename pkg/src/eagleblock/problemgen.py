"""Masked block-completion problem generators and machine partitions.

A problem is the four blocks of X = [[A, C], [B, D]] with D withheld from
solvers.  All generators are factor products X = F1 F2^T / sqrt(s) except
`svd_spectrum`, which builds A directly from a pinned log-uniform singular
spectrum (so a requested condition number is hit exactly) and derives B, C,
D consistently:  B = W0 A,  C = A g (column-normalized),  D = W0 C.  Every
noiseless generator therefore satisfies the exact-completion premise
[B D] = W* [A C] with C inside the column span of A.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import BadSpec, DegenerateSpanWarning, TooManyMachines
from .rng import Stream

KINDS = (
    "training_like",
    "svd_spectrum",
    "gaussian",
    "student_t",
    "correlated_gaussian",
    "sparse_rademacher",
    "block_clustered",
)

MAGIC = b"EGLB"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GenSpec:
    """Shape, rank and distribution parameters for one problem family.

    `anisotropy` is the geometric covariance decay of the training-like
    factors; `kappa_target` (svd_spectrum only) pins the condition number
    of A exactly.
    """

    kind: str = "svd_spectrum"
    d: int = 64
    n: int = 64
    d_prime: int = 2
    n_prime: int = 2
    rank: int = 64
    anisotropy: float = 0.7
    kappa_target: float | None = None
    nu: int = 4
    rho_corr: float = 0.8
    sparsity: float = 0.1
    clusters: int = 5

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise BadSpec(f"unknown kind {self.kind!r}")
        for name in ("d", "n", "d_prime", "n_prime", "rank"):
            if getattr(self, name) < 1:
                raise BadSpec(f"{name} must be positive")
        if self.rank > min(self.d, self.n):
            raise BadSpec(f"rank {self.rank} exceeds min(d, n) = {min(self.d, self.n)}")
        if not 0.0 < self.anisotropy <= 1.0:
            raise BadSpec("anisotropy must lie in (0, 1]")
        if self.kappa_target is not None:
            if self.kind != "svd_spectrum":
                raise BadSpec("kappa_target is only meaningful for svd_spectrum")
            if self.kappa_target < 1.0:
                raise BadSpec("kappa_target must be >= 1")
        if self.kind == "sparse_rademacher" and not 0.0 < self.sparsity <= 1.0:
            raise BadSpec("sparsity must lie in (0, 1]")
        if self.kind == "block_clustered" and self.clusters < 1:
            raise BadSpec("clusters must be positive")


@dataclass
class BlockProblem:
    """Observed blocks A, B, C plus the withheld ground truth D."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d_hidden: np.ndarray
    noise_var: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.a = matcore.as_matrix(self.a)
        self.b = matcore.as_matrix(self.b)
        self.c = matcore.as_matrix(self.c)
        self.d_hidden = matcore.as_matrix(self.d_hidden)
        d, n = self.a.shape
        dp, np_ = self.d_hidden.shape
        if self.b.shape != (dp, n) or self.c.shape != (d, np_):
            raise BadSpec(
                f"inconsistent block shapes: A{self.a.shape} B{self.b.shape} "
                f"C{self.c.shape} D{self.d_hidden.shape}"
            )
        if self.noise_var < 0.0:
            raise BadSpec("noise_var must be nonnegative")

    @property
    def shape(self):
        return (self.a.shape[0], self.a.shape[1], self.d_hidden.shape[0], self.d_hidden.shape[1])

    def assemble(self) -> np.ndarray:
        """Full (d + d') x (n + n') matrix including the hidden block."""
        top = np.hstack([self.a, self.c])
        bottom = np.hstack([self.b, self.d_hidden])
        return np.vstack([top, bottom])


def _factor_pair(spec: GenSpec, seed: int):
    """The two factors of X for the factor-product kinds."""
    s = spec.clusters if spec.kind == "block_clustered" else spec.rank
    rows1 = spec.d + spec.d_prime
    rows2 = spec.n + spec.n_prime
    s1 = Stream(seed, f"gen/{spec.kind}/f1")
    s2 = Stream(seed, f"gen/{spec.kind}/f2")
    if spec.kind == "training_like":
        scale = spec.anisotropy ** (0.5 * np.arange(1, s + 1))
        return s1.gaussian((rows1, s)) * scale, s2.gaussian((rows2, s)) * scale
    if spec.kind == "gaussian":
        return s1.gaussian((rows1, s)), s2.gaussian((rows2, s))
    if spec.kind == "student_t":
        return s1.student_t((rows1, s), spec.nu), s2.student_t((rows2, s), spec.nu)
    if spec.kind == "correlated_gaussian":
        return _ar1_columns(s1, rows1, s, spec.rho_corr), _ar1_columns(s2, rows2, s, spec.rho_corr)
    if spec.kind == "sparse_rademacher":
        return _sparse_rademacher(s1, rows1, s, spec.sparsity), _sparse_rademacher(
            s2, rows2, s, spec.sparsity
        )
    if spec.kind == "block_clustered":
        assign = (s1.uniform(rows1) * s).astype(int).clip(0, s - 1)
        onehot = np.zeros((rows1, s))
        onehot[np.arange(rows1), assign] = 1.0
        centroids = s2.gaussian((rows2, s))
        return onehot, centroids
    raise BadSpec(f"{spec.kind!r} is not a factor-product kind")


def _ar1_columns(stream: Stream, rows: int, cols: int, rho: float) -> np.ndarray:
    """Columns with AR(1) covariance rho^|i-j| down each column."""
    z = stream.gaussian((rows, cols))
    out = np.empty_like(z)
    out[0] = z[0]
    w = np.sqrt(1.0 - rho * rho)
    for i in range(1, rows):
        out[i] = rho * out[i - 1] + w * z[i]
    return out


def _sparse_rademacher(stream: Stream, rows: int, cols: int, p: float) -> np.ndarray:
    """Entries in {0, +-1/sqrt(p)}: Bernoulli(p) support, random signs."""
    u = stream.uniform(rows * cols).reshape(rows, cols)
    signs = np.where(stream.uniform(rows * cols).reshape(rows, cols) < 0.5, -1.0, 1.0)
    return np.where(u < p, signs / np.sqrt(p), 0.0)


def _pinned_log_uniform(stream: Stream, count: int, lo: float) -> np.ndarray:
    """Descending singular values, log-uniform on [lo, 1], endpoints pinned."""
    if count == 1:
        return np.array([1.0])
    inner = np.exp(stream.uniform(max(count - 2, 0)) * np.log(lo))
    sig = np.concatenate([[1.0], np.sort(inner)[::-1], [lo]])
    return sig[:count] if count >= 2 else sig


def _svd_blocks(spec: GenSpec, seed: int):
    """Direct construction with an exact singular spectrum on A."""
    lo = 1.0 / spec.kappa_target if spec.kappa_target else 1e-2
    s = spec.rank
    su = Stream(seed, "gen/svd/u")
    sv = Stream(seed, "gen/svd/v")
    ss = Stream(seed, "gen/svd/sigma")
    sig = _pinned_log_uniform(ss, s, lo)
    u = matcore.orthonormal_columns(su.gaussian((spec.d, s)))
    v = matcore.orthonormal_columns(sv.gaussian((spec.n, s)))
    a = (u * sig) @ v.T
    w0 = Stream(seed, "gen/svd/wstar").gaussian((spec.d_prime, spec.d)) / np.sqrt(spec.d)
    b = w0 @ a
    g = Stream(seed, "gen/svd/cmix").gaussian((spec.n, spec.n_prime))
    c = a @ g
    norms = np.linalg.norm(c, axis=0)
    if np.any(norms == 0.0):
        raise BadSpec("degenerate C draw; change the seed")
    c = c / norms
    return a, b, c, w0 @ c


def generate(spec: GenSpec, seed: int) -> BlockProblem:
    """Draw one noiseless problem, deterministic in (spec, seed)."""
    spec.validate()
    if spec.kind == "svd_spectrum":
        a, b, c, d = _svd_blocks(spec, seed)
    else:
        f1, f2 = _factor_pair(spec, seed)
        s = f1.shape[1]
        x = (f1 @ f2.T) / np.sqrt(s)
        a = x[: spec.d, : spec.n]
        b = x[spec.d :, : spec.n]
        c = x[: spec.d, spec.n :]
        d = x[spec.d :, spec.n :]
    return BlockProblem(a=a, b=b, c=c, d_hidden=d, noise_var=0.0, seed=seed)


def add_noise(problem: BlockProblem, noise_var: float) -> BlockProblem:
    """Add i.i.d. N(0, noise_var) to every entry of every block."""
    if noise_var < 0.0:
        raise BadSpec("noise_var must be nonnegative")
    if noise_var == 0.0:
        return problem
    stream = Stream(problem.seed, "noise")
    sigma = np.sqrt(noise_var)
    blocks = []
    for block in (problem.a, problem.b, problem.c, problem.d_hidden):
        blocks.append(block + sigma * stream.gaussian(block.shape))
    return BlockProblem(
        a=blocks[0],
        b=blocks[1],
        c=blocks[2],
        d_hidden=blocks[3],
        noise_var=problem.noise_var + noise_var,
        seed=problem.seed,
    )


@dataclass
class Partition:
    """Per-machine column shards (A^mu, B^mu) with the shared C and hidden D."""

    shards: list
    c: np.ndarray
    d_hidden: np.ndarray
    overlap: float
    shard_columns: list = field(default_factory=list)
    problem: BlockProblem | None = None

    @property
    def machines(self) -> int:
        return len(self.shards)

    def global_blocks(self):
        """(A, B) concatenated over shards in machine order."""
        a = np.hstack([a for a, _ in self.shards])
        b = np.hstack([b for _, b in self.shards])
        return a, b


def partition(problem: BlockProblem, machines: int, overlap: float = 0.0, seed: int = 0) -> Partition:
    """Split columns of (A, B) across machines.

    overlap = 0 gives disjoint contiguous blocks of a seeded column shuffle;
    overlap > 0 additionally copies ceil(overlap * n / M) columns into each
    shard from the other shards, A and B columns moving in lockstep so the
    exact-completion premise survives sharding.
    """
    n = problem.a.shape[1]
    if machines < 1:
        raise BadSpec("machines must be >= 1")
    if machines > n:
        raise TooManyMachines(f"{machines} machines for {n} columns")
    if not 0.0 <= overlap <= 1.0:
        raise BadSpec("overlap must lie in [0, 1]")
    stream = Stream(seed, "partition/shuffle")
    perm = stream.permutation(n)
    base = n // machines
    extra = n % machines
    pieces = []
    start = 0
    for mu in range(machines):
        size = base + (1 if mu < extra else 0)
        pieces.append(perm[start : start + size])
        start += size
    if overlap > 0.0:
        want = int(np.ceil(overlap * n / machines))
        copied = []
        for mu in range(machines):
            pool = np.concatenate([pieces[m] for m in range(machines) if m != mu]) if machines > 1 else np.array([], dtype=int)
            k = min(want, pool.size)
            if k > 0:
                pick = stream.substream(f"copy/{mu}").choice(pool.size, k)
                copied.append(np.concatenate([pieces[mu], pool[pick]]))
            else:
                copied.append(pieces[mu])
        pieces = copied
    shards = [(problem.a[:, idx].copy(), problem.b[:, idx].copy()) for idx in pieces]
    return Partition(
        shards=shards,
        c=problem.c.copy(),
        d_hidden=problem.d_hidden.copy(),
        overlap=overlap,
        shard_columns=[np.asarray(idx) for idx in pieces],
        problem=problem,
    )


def diversity_index(shards) -> float:
    """Smallest eigenvalue of the machine-averaged column-span projector.

    Warns DegenerateSpanWarning (and returns the near-zero value) when the
    shard spans do not jointly cover the row space.
    """
    mats = [a for a, *_ in shards] if shards and isinstance(shards[0], tuple) else list(shards)
    if not mats:
        raise BadSpec("no shards given")
    d = mats[0].shape[0]
    avg = np.zeros((d, d))
    for a in mats:
        q = matcore.orthonormal_columns(a)
        avg += q @ q.T
    avg /= len(mats)
    eig = matcore.sym_eig(avg, sym_tol=1e-8)
    alpha = float(eig.values[-1])
    if alpha <= eig.rank_cutoff:
        warnings.warn(
            "shard spans do not cover the full row space (alpha ~ 0)",
            DegenerateSpanWarning,
        )
    return alpha


def _consistent_global(shard_as, d_prime, n_prime, seed, tag):
    """Assemble B^mu = W* A^mu, C in the joint span, D = W* C."""
    d = shard_as[0].shape[0]
    wstar = Stream(seed, f"{tag}/wstar").gaussian((d_prime, d)) / np.sqrt(d)
    shard_bs = [wstar @ a for a in shard_as]
    a_glob = np.hstack(shard_as)
    g = Stream(seed, f"{tag}/cmix").gaussian((a_glob.shape[1], n_prime))
    c = a_glob @ g
    c = c / np.linalg.norm(c, axis=0)
    d_hidden = wstar @ c
    problem = BlockProblem(
        a=a_glob, b=np.hstack(shard_bs), c=c, d_hidden=d_hidden, noise_var=0.0, seed=seed
    )
    sizes = np.cumsum([0] + [a.shape[1] for a in shard_as])
    cols = [np.arange(sizes[i], sizes[i + 1]) for i in range(len(shard_as))]
    return Partition(
        shards=list(zip([a.copy() for a in shard_as], [b.copy() for b in shard_bs])),
        c=c.copy(),
        d_hidden=d_hidden.copy(),
        overlap=0.0,
        shard_columns=cols,
        problem=problem,
    )


def independent_shards(
    d: int,
    n_per_machine: int,
    d_prime: int,
    n_prime: int,
    machines: int,
    kappa: float,
    seed: int,
) -> Partition:
    """One full-span d x n shard per machine, each with kappa(A^mu) = kappa.

    Worker sweeps hold the per-machine data size fixed while varying the
    machine count, so the shards are disjoint (overlap-0) by construction
    and every machine's columns span the full row space when
    n_per_machine >= d.
    """
    if machines < 1:
        raise BadSpec("machines must be >= 1")
    shard_as = []
    for mu in range(machines):
        s = min(d, n_per_machine)
        sig = _pinned_log_uniform(Stream(seed, f"ishards/sigma/{mu}"), s, 1.0 / kappa)
        u = matcore.orthonormal_columns(Stream(seed, f"ishards/u/{mu}").gaussian((d, s)))
        v = matcore.orthonormal_columns(Stream(seed, f"ishards/v/{mu}").gaussian((n_per_machine, s)))
        shard_as.append((u * sig) @ v.T)
    return _consistent_global(shard_as, d_prime, n_prime, seed, "ishards")


def aligned_partition(
    d: int,
    d_prime: int,
    n_prime: int,
    machines: int,
    alpha: float,
    kappa: float,
    seed: int,
) -> Partition:
    """Shards whose spans overlap by construction, hitting a target diversity.

    Machine mu spans a contiguous arc of nu * (d / machines) coordinate
    directions (in a seeded random orthonormal frame), arcs staggered so
    every direction is covered by exactly nu machines; the averaged span
    projector is then (nu / machines) * I and the diversity index equals
    nu / machines exactly, the closest achievable value to `alpha`.  Each
    shard carries a pinned spectrum with kappa(A^mu) = kappa.
    """
    if machines < 1:
        raise BadSpec("machines must be >= 1")
    if d % machines != 0:
        raise BadSpec("d must be a multiple of machines for the arc construction")
    if not 0.0 < alpha <= 1.0:
        raise BadSpec("alpha must lie in (0, 1]")
    step = d // machines
    nu = min(machines, max(1, round(alpha * machines)))
    width = nu * step
    frame = matcore.orthonormal_columns(Stream(seed, "aligned/frame").gaussian((d, d)))
    shard_as = []
    for mu in range(machines):
        idx = [(mu * step + j) % d for j in range(width)]
        sig = _pinned_log_uniform(Stream(seed, f"aligned/sigma/{mu}"), width, 1.0 / kappa)
        v = matcore.orthonormal_columns(Stream(seed, f"aligned/v/{mu}").gaussian((width, width)))
        shard_as.append((frame[:, idx] * sig) @ v.T)
    return _consistent_global(shard_as, d_prime, n_prime, seed, "aligned")


def save_problem(problem: BlockProblem, path) -> None:
    """Flat binary fixture: EGLB header + little-endian f64 blocks A,B,C,D."""
    d, n = problem.a.shape
    dp, np_ = problem.d_hidden.shape
    header = MAGIC + struct.pack("<IIIIId", FORMAT_VERSION, d, n, dp, np_, problem.noise_var)
    with open(path, "wb") as fh:
        fh.write(header)
        for block in (problem.a, problem.b, problem.c, problem.d_hidden):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_problem(path) -> BlockProblem:
    """Inverse of save_problem; the seed is not serialized and loads as 0."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise BadSpec(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, d, n, dp, np_, noise = struct.unpack_from("<IIIIId", raw, 4)
    if version != FORMAT_VERSION:
        raise BadSpec(f"unsupported fixture version {version}")
    offset = 4 + struct.calcsize("<IIIIId")
    shapes = [(d, n), (dp, n), (d, np_), (dp, np_)]
    blocks = []
    for shape in shapes:
        count = shape[0] * shape[1]
        block = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        blocks.append(block.astype(np.float64))
        offset += count * 8
    return BlockProblem(
        a=blocks[0], b=blocks[1], c=blocks[2], d_hidden=blocks[3], noise_var=noise, seed=0
    )
