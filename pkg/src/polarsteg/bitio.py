"""Packed bit-vector files.

Layout: one header byte holding the number of valid bits in the final
payload byte (0 for an empty vector, else 1..8), followed by the bits packed
LSB-first within each byte.  Bit i of a byte is (byte >> i) & 1.
"""

from __future__ import annotations

import numpy as np

__all__ = ["write_bits", "read_bits", "pack_bits", "unpack_bits"]


def pack_bits(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("bit vector must be 1-d")
    if np.any(bits > 1):
        raise ValueError("elements must be 0 or 1")
    n = bits.shape[0]
    if n == 0:
        return bytes([0])
    tail = ((n - 1) % 8) + 1
    payload = np.packbits(bits, bitorder="little").tobytes()
    return bytes([tail]) + payload


def unpack_bits(blob: bytes) -> np.ndarray:
    if len(blob) == 0:
        raise ValueError("empty blob: missing header byte")
    tail = blob[0]
    payload = blob[1:]
    if tail == 0:
        if payload:
            raise ValueError("zero tail count with non-empty payload")
        return np.zeros(0, dtype=np.uint8)
    if not 1 <= tail <= 8:
        raise ValueError(f"tail bit count must be in 1..8, got {tail}")
    if not payload:
        raise ValueError("missing payload")
    n = (len(payload) - 1) * 8 + tail
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
    extra = bits[n:]
    if np.any(extra):
        raise ValueError("nonzero padding bits past the declared length")
    return bits[:n]


def write_bits(path, bits: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_bits(bits))


def read_bits(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return unpack_bits(fh.read())
