"""Adaptive and robust message embedding / extraction.

Adaptive scheme: the message occupies the least reliable subchannels F of
the embedding channels; the coder picks the remaining positions to stay
close to the cover; extraction is a single polar transform (the generator
is self-inverse), so the noiseless roundtrip is exact by algebra.

Robust scheme: pre-shared key bits occupy F (bad under both embedding and
attack channels), the message occupies I (bad for embedding, good under
attack), and the coder fills P.  Extraction list-decodes the attacked stego
over the attack channels with the key re-frozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .codec import CoderConfig, FrozenSpec, scl_decode, sc_encode_randomized
from .construction import ChannelBank, IndexPartition
from .transform import polar_transform

__all__ = [
    "StegoContext",
    "make_frozen_key",
    "adaptive_embed",
    "adaptive_extract",
    "robust_embed",
    "robust_extract",
]


def make_frozen_key(seed: int, length: int) -> np.ndarray:
    """Derive the pre-shared Ber(1/2) key bits from a shared secret seed."""
    rng = np.random.default_rng(np.random.SeedSequence([0x6B65795F, seed]))
    return rng.integers(0, 2, length, dtype=np.uint8)


@dataclass(frozen=True)
class StegoContext:
    """Everything both parties need: partition, channel banks, key, coder.

    attack_bank is absent exactly in the adaptive scheme (where P must be
    empty); the robust scheme additionally needs |frozen_key| == |F|.
    """

    partition: IndexPartition
    embed_bank: ChannelBank
    attack_bank: Optional[ChannelBank] = None
    frozen_key: Optional[np.ndarray] = None
    coder: CoderConfig = field(default_factory=CoderConfig)

    def __post_init__(self):
        if self.embed_bank.N != self.partition.N:
            raise ValueError("embedding bank and partition lengths differ")
        if self.attack_bank is None:
            if len(self.partition.P):
                raise ValueError("adaptive mode requires an empty P set")
        else:
            if self.attack_bank.N != self.partition.N:
                raise ValueError("attack bank and partition lengths differ")
            if self.frozen_key is None or len(self.frozen_key) != len(self.partition.F):
                raise ValueError("robust mode requires |frozen_key| == |F|")
        if self.frozen_key is not None:
            key = np.ascontiguousarray(np.asarray(self.frozen_key, dtype=np.uint8))
            key.setflags(write=False)
            object.__setattr__(self, "frozen_key", key)

    @property
    def robust(self) -> bool:
        return self.attack_bank is not None


def _coder_run(cover, bank, frozen, coder):
    if coder.decision_rule == "randomized_rounding":
        return sc_encode_randomized(cover, bank, frozen, coder.seed)
    uhat, _ = scl_decode(cover, bank, frozen, coder)
    return uhat


def adaptive_embed(cover: np.ndarray, message: np.ndarray, ctx: StegoContext) -> np.ndarray:
    """Freeze the message onto F (ascending index order), source-encode the
    cover over the embedding channels, and transform."""
    part = ctx.partition
    message = np.asarray(message, dtype=np.uint8)
    if len(message) != len(part.F):
        raise ValueError(f"message length {len(message)} != |F| = {len(part.F)}")
    if len(cover) != part.N:
        raise ValueError(f"cover length {len(cover)} != {part.N}")
    frozen = FrozenSpec(part.F, message)
    uhat = _coder_run(cover, ctx.embed_bank, frozen, ctx.coder)
    return polar_transform(uhat)


def adaptive_extract(stego: np.ndarray, partition: IndexPartition) -> np.ndarray:
    """Invert the transform and read the message off F."""
    if len(stego) != partition.N:
        raise ValueError(f"stego length {len(stego)} != {partition.N}")
    u = polar_transform(np.asarray(stego))
    return u[partition.F]


def robust_embed(cover: np.ndarray, message: np.ndarray, ctx: StegoContext) -> np.ndarray:
    """Freeze key bits onto F and the message onto I, let the coder choose P."""
    if not ctx.robust:
        raise ValueError("context is not configured for the robust scheme")
    part = ctx.partition
    message = np.asarray(message, dtype=np.uint8)
    if len(message) != len(part.I):
        raise ValueError(f"message length {len(message)} != |I| = {len(part.I)}")
    if len(cover) != part.N:
        raise ValueError(f"cover length {len(cover)} != {part.N}")
    frozen = FrozenSpec.build((part.F, ctx.frozen_key), (part.I, message))
    uhat = _coder_run(cover, ctx.embed_bank, frozen, ctx.coder)
    return polar_transform(uhat)


def robust_extract(noisy_stego: np.ndarray, ctx: StegoContext) -> np.ndarray:
    """List-decode the attacked stego over the attack channels with the key
    frozen back onto F; the I positions of the winner are the message.

    Always returns a best-effort estimate; residual errors show up as
    message bit errors, never exceptions.
    """
    if not ctx.robust:
        raise ValueError("context is not configured for the robust scheme")
    part = ctx.partition
    frozen = FrozenSpec(part.F, ctx.frozen_key)
    uhat, _ = scl_decode(np.asarray(noisy_stego), ctx.attack_bank, frozen, ctx.coder)
    return uhat[part.I]
