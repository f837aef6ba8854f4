"""LLR-domain SC and SCL coding over parallel non-identical BSCs.

The same path search serves two roles: lossy source encoding (the cover is
the observation and the winner is the lowest-distortion input word) and
channel decoding (the attacked stego is the observation).  Only the LLR
initialization knows about the individual channels; the butterfly recursion
is channel-agnostic.

Path metrics use the exact soft penalty ln(1 + exp(-(1-2u)*L)), so the
accumulated metric of a path equals the negative log posterior of its input
word given the observation, and list search with a full list is exact MAP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from ._kernels import LLR_CLAMP
from .construction import ChannelBank
from .transform import polar_transform

__all__ = ["CoderConfig", "FrozenSpec", "llr_init", "scl_decode", "sc_encode_randomized", "LLR_CLAMP"]


@dataclass(frozen=True)
class CoderConfig:
    """List size and decision rule.  SC is the list_size=1 special case;
    randomized rounding is only defined for single-path encoding."""

    list_size: int = 1
    decision_rule: str = "map"  # map | randomized_rounding
    seed: Optional[int] = None

    def __post_init__(self):
        if self.list_size < 1:
            raise ValueError(f"list size must be >= 1, got {self.list_size}")
        if self.decision_rule not in ("map", "randomized_rounding"):
            raise ValueError(f"unknown decision rule {self.decision_rule!r}")
        if self.decision_rule == "randomized_rounding":
            if self.list_size != 1:
                raise ValueError("randomized rounding requires list_size == 1")
            if self.seed is None:
                raise ValueError("randomized rounding requires a seed")


@dataclass(frozen=True)
class FrozenSpec:
    """Positions whose input bits are fixed, with their values.

    Values are aligned with the indices as given; build() sorts a set of
    (indices, values) groups into the single ascending-index spec the
    decoders consume.
    """

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int64))
        val = np.ascontiguousarray(np.asarray(self.values, dtype=np.uint8))
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d and the same length")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("frozen indices must be unique")
        if np.any((val != 0) & (val != 1)):
            raise ValueError("frozen values must be bits")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def build(cls, *groups) -> "FrozenSpec":
        """Merge (indices, values) pairs into one ascending-index spec."""
        idx = np.concatenate([np.asarray(g[0], dtype=np.int64) for g in groups])
        val = np.concatenate([np.asarray(g[1], dtype=np.uint8) for g in groups])
        order = np.argsort(idx, kind="stable")
        return cls(idx[order], val[order])

    def mask_vals(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= N):
            raise ValueError("frozen index out of range")
        mask = np.zeros(N, dtype=np.uint8)
        vals = np.zeros(N, dtype=np.uint8)
        mask[self.indices] = 1
        vals[self.indices] = self.values
        return mask, vals


def llr_init(observation: np.ndarray, bank: ChannelBank) -> np.ndarray:
    """Per-position channel LLRs (1-2x)*ln((1-p)/p), positive = 0 more likely.

    Magnitudes are clamped at LLR_CLAMP; since ln((1-p)/p) only exceeds the
    clamp for p below 4.3e-18, the clamp acts as the p=0 "known bit" value.
    """
    x = np.asarray(observation)
    p = bank.crossover
    if x.shape[0] != p.shape[0]:
        raise ValueError(f"length mismatch: observation {x.shape[0]}, bank {p.shape[0]}")
    with np.errstate(divide="ignore"):
        mag = np.minimum(np.log((1.0 - p) / p), LLR_CLAMP)
    return (1.0 - 2.0 * x.astype(np.float64)) * mag


def _sc_workspaces(N: int):
    return np.empty(2 * N - 1, np.float64), np.zeros((2 * N - 1) * 2, np.uint8)


def scl_decode(
    observation: np.ndarray,
    bank: ChannelBank,
    frozen: FrozenSpec,
    config: CoderConfig,
) -> tuple[np.ndarray, float]:
    """Estimate the full input word; frozen positions take their given
    values, the rest are chosen by list path search.

    Returns (u_hat, metric) where metric is the winning path metric (the
    negative log posterior of u_hat given the observation).
    """
    N = bank.N
    x = np.asarray(observation)
    if x.shape[0] != N:
        raise ValueError(f"observation length {x.shape[0]} != bank length {N}")
    mask, vals = frozen.mask_vals(N)
    llr = llr_init(x, bank)
    if config.decision_rule == "randomized_rounding":
        return _run_randomized(llr, mask, vals, config.seed)
    if config.list_size == 1:
        P, C = _sc_workspaces(N)
        rr = np.zeros(1, np.float64)
        err = np.zeros(1, np.int64)
        pm = _kernels.sc_single(llr, mask, vals, _kernels.MODE_MAP, rr, err, P, C)
        xhat = C[0 : 2 * N : 2][:N].copy()
    else:
        xhat = np.empty(N, np.uint8)
        pm = _kernels.scl_run(llr, mask, vals, config.list_size, xhat)
    return polar_transform(xhat), float(pm)


def _run_randomized(llr, mask, vals, seed):
    N = llr.shape[0]
    rng = np.random.default_rng(seed)
    rr = rng.random(N)
    P, C = _sc_workspaces(N)
    err = np.zeros(1, np.int64)
    pm = _kernels.sc_single(llr, mask, vals, _kernels.MODE_RANDOMIZED, rr, err, P, C)
    xhat = C[0 : 2 * N : 2][:N].copy()
    return polar_transform(xhat), float(pm)


def sc_encode_randomized(
    cover: np.ndarray,
    bank: ChannelBank,
    frozen: FrozenSpec,
    seed: int,
) -> np.ndarray:
    """Single-path SC where each free decision is sampled from
    Ber(1/(1+exp(L))) instead of taking the argmax; deterministic per seed.

    This is the rule under which the distortion guarantees are stated; the
    MAP rule is the practical default.
    """
    uhat, _ = scl_decode(
        cover, bank, frozen, CoderConfig(1, "randomized_rounding", seed)
    )
    return uhat
