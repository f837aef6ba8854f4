"""Reliability estimation for polarized parallel BSCs and index partitioning.

Three construction methods are provided: the pairwise Bhattacharyya
recursion (fast upper bounds), finite-alphabet tracking with degrading
merges (tight bounds at configurable precision), and genie-aided Monte
Carlo trial counting.  All of them walk the same adjacent-pair combine
structure as the decoders in codec.py, so sender and receiver derive
identical partitions from identical inputs.

Score semantics are uniform across methods: higher score = less reliable
subchannel (Bhattacharyya value for the first two methods, genie error
count for Monte Carlo).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .optimizer import h2
from .transform import bit_reversal_permutation, is_power_of_two

__all__ = [
    "ChannelBank",
    "ReliabilityProfile",
    "IndexPartition",
    "bhattacharyya_bsc",
    "polarize_bhattacharyya",
    "degrading_merge_construct",
    "monte_carlo_construct",
    "select_adaptive_partition",
    "select_robust_partition",
    "select_robust_partition_threshold",
    "default_frozen_budget",
]


@dataclass(frozen=True)
class ChannelBank:
    """N parallel BSC crossover probabilities, N a power of two.

    role is a bookkeeping tag: "embedding" banks hold the modification
    probabilities p_i, "attack" banks the noise intensities theta_i.
    """

    crossover: np.ndarray
    role: str = "embedding"

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.crossover, dtype=np.float64))
        if arr.ndim != 1 or not is_power_of_two(arr.shape[0]):
            raise ValueError("bank length must be a power of two")
        if np.any(arr < 0.0) or np.any(arr > 0.5):
            raise ValueError("crossover probabilities must lie in [0, 0.5]")
        if self.role not in ("embedding", "attack"):
            raise ValueError(f"unknown role {self.role!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "crossover", arr)

    @property
    def N(self) -> int:
        return self.crossover.shape[0]


@dataclass(frozen=True)
class ReliabilityProfile:
    """Per-subchannel unreliability scores plus method provenance."""

    method: str  # bhattacharyya | degrading_merge | monte_carlo
    scores: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.scores, dtype=np.float64))
        if arr.ndim != 1 or not is_power_of_two(arr.shape[0]):
            raise ValueError("scores length must be a power of two")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @property
    def N(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class IndexPartition:
    """Disjoint cover of [0, N): frozen/key F, message I, coder-chosen P."""

    F: np.ndarray
    I: np.ndarray
    P: np.ndarray
    N: int

    def __post_init__(self):
        for name in ("F", "I", "P"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.int64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        total = len(self.F) + len(self.I) + len(self.P)
        if total != self.N:
            raise ValueError("partition does not cover the index range")
        merged = np.concatenate([self.F, self.I, self.P])
        if len(np.unique(merged)) != self.N or merged.min(initial=0) < 0 or (
            self.N > 0 and merged.max(initial=-1) >= self.N
        ):
            raise ValueError("partition sets overlap or leave the index range")


def bhattacharyya_bsc(p: float) -> float:
    """Bhattacharyya parameter of a single BSC: 2*sqrt(p*(1-p))."""
    if p < 0.0 or p > 0.5:
        raise ValueError(f"crossover must lie in [0, 0.5], got {p}")
    return 2.0 * math.sqrt(p * (1.0 - p))


def _polarize_scalar(z: np.ndarray, minus, plus) -> np.ndarray:
    """Run a scalar pair-recursion over the combine tree; input indexed by
    codeword position, output by subchannel."""
    arr = z.astype(np.float64).copy()
    N = arr.shape[0]
    block = N
    while block > 1:
        view = arr.reshape(-1, block)
        a = view[:, 0::2].copy()
        b = view[:, 1::2].copy()
        half = block // 2
        view[:, :half] = minus(a, b)
        view[:, half:] = plus(a, b)
        block = half
    return arr


def polarize_bhattacharyya(bank: ChannelBank) -> ReliabilityProfile:
    """Recursive Bhattacharyya estimates for all N subchannels.

    Pairwise rule: minus branch Z1 + Z2 - Z1*Z2 (upper bound), plus branch
    Z1*Z2 (exact).  Leaves are the per-position single-BSC values.
    """
    z0 = 2.0 * np.sqrt(bank.crossover * (1.0 - bank.crossover))
    scores = _polarize_scalar(
        z0,
        minus=lambda a, b: a + b - a * b,
        plus=lambda a, b: a * b,
    )
    return ReliabilityProfile("bhattacharyya", scores, {"role": bank.role})


# -- degrading-merge construction -------------------------------------------
#
# A symmetric channel is represented by the probabilities (a_k, b_k) of one
# member of each conjugate output pair, a_k = W(y_k|0) >= b_k = W(y_k|1),
# kept sorted by likelihood ratio a/(a+b) descending.  sum(a + b) == 1.


def _bsc_rep(p: float) -> tuple[np.ndarray, np.ndarray]:
    return np.array([1.0 - p]), np.array([p])


def _canon(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    swap = b > a
    a2 = np.where(swap, b, a)
    b2 = np.where(swap, a, b)
    order = np.argsort(-a2 / (a2 + b2), kind="stable")
    return np.ascontiguousarray(a2[order]), np.ascontiguousarray(b2[order])


def _combine_minus(r1, r2) -> tuple[np.ndarray, np.ndarray]:
    a1, b1 = r1
    a2, b2 = r2
    aa = np.outer(a1, a2).ravel()
    ab = np.outer(a1, b2).ravel()
    ba = np.outer(b1, a2).ravel()
    bb = np.outer(b1, b2).ravel()
    p0 = 0.5 * np.concatenate([aa + bb, ab + ba])
    p1 = 0.5 * np.concatenate([ba + ab, bb + aa])
    return _canon(p0, p1)


def _combine_plus(r1, r2) -> tuple[np.ndarray, np.ndarray]:
    a1, b1 = r1
    a2, b2 = r2
    aa = np.outer(a1, a2).ravel()
    ab = np.outer(a1, b2).ravel()
    ba = np.outer(b1, a2).ravel()
    bb = np.outer(b1, b2).ravel()
    p0 = 0.5 * np.concatenate([aa, ba, ab, bb])
    p1 = 0.5 * np.concatenate([bb, ab, ba, aa])
    return _canon(p0, p1)


def _merge(rep, mu: int):
    a, b = rep
    if a.shape[0] <= mu:
        return rep
    return _kernels.degrade_merge(a, b, mu)


def channel_z(rep) -> float:
    """Bhattacharyya parameter of a finite-alphabet symmetric channel."""
    a, b = rep
    return float(np.sum(2.0 * np.sqrt(a * b)))


def channel_capacity(rep) -> float:
    """Capacity in bits of a finite-alphabet symmetric channel."""
    a, b = rep
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0, a * np.log2(np.where(a > 0, 2 * a / s, 1.0)), 0.0)
        tb = np.where(b > 0, b * np.log2(np.where(b > 0, 2 * b / s, 1.0)), 0.0)
    return float(np.sum(ta + tb))


def degrading_merge_construct(bank: ChannelBank, mu: int = 256) -> ReliabilityProfile:
    """Track a degraded finite-alphabet image of every subchannel through the
    combine tree, merging down to mu symbol pairs after each step.

    The merge rule pairs adjacent symbols in likelihood-ratio order and
    greedily takes the pair losing the least capacity, so the estimates
    upper-bound the true Z to merge precision.
    """
    if mu < 2:
        raise ValueError(f"alphabet limit must be >= 2, got {mu}")
    reps = [_bsc_rep(p) for p in bank.crossover]

    def walk(level):
        if len(level) == 1:
            return level
        minus = []
        plus = []
        for k in range(0, len(level), 2):
            r1, r2 = level[k], level[k + 1]
            minus.append(_merge(_combine_minus(r1, r2), mu))
            plus.append(_merge(_combine_plus(r1, r2), mu))
        return walk(minus) + walk(plus)

    leaves = walk(reps)
    scores = np.array([channel_z(rep) for rep in leaves])
    return ReliabilityProfile("degrading_merge", scores, {"mu": mu, "role": bank.role})


# -- Monte Carlo construction ------------------------------------------------


def _encode_batch(U: np.ndarray) -> np.ndarray:
    """Batched polar transform of uint8 rows."""
    B, N = U.shape
    n = N.bit_length() - 1
    X = np.ascontiguousarray(U[:, bit_reversal_permutation(n)], dtype=np.uint8)
    h = 1
    while h < N:
        X = X.reshape(B, -1, 2, h)
        X[:, :, 0, :] ^= X[:, :, 1, :]
        h *= 2
    return X.reshape(B, N)


def monte_carlo_construct(
    bank: ChannelBank,
    K: int,
    T: int,
    seed: int,
    chunk: int = 128,
) -> tuple[ReliabilityProfile, IndexPartition]:
    """Genie-aided SC trial counting over random codewords and bank noise.

    Each trial encodes a uniform random input, flips positions with the bank
    probabilities, SC-decodes with a genie that counts and then corrects every
    wrong decision.  The K positions with the fewest errors (ties broken by
    ascending index) form the reliable set, returned as the I side of the
    partition with P empty.

    Trial t draws from its own (seed, t) stream, so counts are independent of
    execution order and chunking.
    """
    N = bank.N
    if not 0 <= K <= N:
        raise ValueError(f"K must lie in [0, {N}], got {K}")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    p = bank.crossover
    with np.errstate(divide="ignore"):
        llr_mag = np.minimum(np.log((1.0 - p) / p), _kernels.LLR_CLAMP)
    counts = np.zeros(N, dtype=np.int64)
    done = 0
    while done < T:
        B = min(chunk, T - done)
        U = np.empty((B, N), dtype=np.uint8)
        Z = np.empty((B, N), dtype=np.uint8)
        for k in range(B):
            rng = np.random.default_rng(np.random.SeedSequence([seed, done + k]))
            U[k] = rng.integers(0, 2, N, dtype=np.uint8)
            Z[k] = rng.random(N) < p
        Y = _encode_batch(U) ^ Z
        _kernels.mc_genie_chunk(U, Y, llr_mag, counts)
        done += B
    order = np.argsort(counts, kind="stable")
    reliable = np.sort(order[:K])
    frozen = np.sort(order[K:])
    profile = ReliabilityProfile(
        "monte_carlo",
        counts.astype(np.float64),
        {"T": T, "seed": seed, "role": bank.role},
    )
    part = IndexPartition(F=frozen, I=reliable, P=np.empty(0, np.int64), N=N)
    return profile, part


# -- partition selection ------------------------------------------------------


def _worst_first(scores: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score, ties by ascending index."""
    return np.argsort(-scores, kind="stable")


def select_adaptive_partition(profile: ReliabilityProfile, q: int) -> IndexPartition:
    """Message set F = the q least reliable subchannels, I = the rest.

    Cardinality selection replaces the asymptotic threshold sets so the
    payload is exact at finite N.
    """
    N = profile.N
    if not 0 <= q <= N:
        raise ValueError(f"q must lie in [0, {N}], got {q}")
    order = _worst_first(profile.scores)
    F = np.sort(order[:q])
    I = np.sort(order[q:])
    return IndexPartition(F=F, I=I, P=np.empty(0, np.int64), N=N)


def select_robust_partition(
    profile_w: ReliabilityProfile,
    profile_q: ReliabilityProfile,
    q: int,
    mF: int,
) -> IndexPartition:
    """Nested partition for the robust scheme, sized by cardinality.

    F = the mF least reliable subchannels under the attack profile; I = the
    q least reliable under the embedding profile that are not already in F;
    P = everything else.  Nesting holds by construction, so the pre-repair
    violation fraction is zero.
    """
    N = profile_w.N
    if profile_q.N != N:
        raise ValueError("profiles cover different block lengths")
    if q < 0 or mF < 0 or q + mF > N:
        raise ValueError(f"need q + mF <= N, got q={q} mF={mF} N={N}")
    f2 = _worst_first(profile_q.scores)[:mF]
    in_f2 = np.zeros(N, dtype=bool)
    in_f2[f2] = True
    w_order = _worst_first(profile_w.scores)
    extra = w_order[~in_f2[w_order]][:q]
    F = np.sort(f2)
    I = np.sort(extra)
    mask = np.ones(N, dtype=bool)
    mask[F] = False
    mask[I] = False
    P = np.flatnonzero(mask)
    return IndexPartition(F=F, I=I, P=P, N=N)


def select_robust_partition_threshold(
    profile_w: ReliabilityProfile,
    profile_q: ReliabilityProfile,
    w_threshold: float,
    q_threshold: float,
) -> tuple[IndexPartition, float]:
    """Diagnostic threshold-mode partition with nesting repair.

    F1 = {Z_W >= w_threshold}, F2 = {Z_Q >= q_threshold}; indices in F2
    outside F1 are frozen rather than left to the coder, shrinking I.
    Returns the repaired partition and the violation fraction |F2 \\ F1| / N.
    """
    N = profile_w.N
    f1 = profile_w.scores >= w_threshold
    f2 = profile_q.scores >= q_threshold
    violation = float(np.count_nonzero(f2 & ~f1)) / N
    F = np.flatnonzero(f2)
    I = np.flatnonzero(f1 & ~f2)
    P = np.flatnonzero(~f1 & ~f2)
    return IndexPartition(F=F, I=I, P=P, N=N), violation


def default_frozen_budget(theta: np.ndarray, delta: float = 0.02) -> int:
    """Default size of the attack-side frozen set: ceil(sum h2(theta_i))
    plus a rate margin of ceil(delta * N) for finite-length backoff."""
    theta = np.asarray(theta, dtype=np.float64)
    N = theta.shape[0]
    return int(math.ceil(float(np.sum(h2(theta))))) + int(math.ceil(delta * N))
