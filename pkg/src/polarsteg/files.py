"""Versioned JSON artifacts passed between the CLI stages.

Every file carries a sha256 checksum over its canonical payload; loaders
refuse corrupted or hand-edited files, and the embed side records the
checksums it was built against so extraction can detect a mismatched
construction before producing garbage.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .construction import ChannelBank, IndexPartition, ReliabilityProfile

__all__ = [
    "save_construction",
    "load_construction",
    "save_solution",
    "load_solution",
    "save_context",
    "load_context",
    "payload_checksum",
    "key_fingerprint",
]

CONSTRUCTION_FORMAT = "polarsteg-construction"
SOLUTION_FORMAT = "polarsteg-solution"
CONTEXT_FORMAT = "polarsteg-context"
VERSION = 1


def payload_checksum(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def key_fingerprint(seed: int) -> str:
    return hashlib.sha256(f"polarsteg-key:{seed}".encode()).hexdigest()[:16]


def _dump(path, fmt: str, payload: dict) -> str:
    checksum = payload_checksum(payload)
    doc = {"format": fmt, "version": VERSION, "checksum": checksum, **payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return checksum


def _load(path, fmt: str) -> tuple[dict, str]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != fmt:
        raise ValueError(f"{path}: expected a {fmt} file, got {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')!r}")
    checksum = doc.pop("checksum", None)
    payload = {k: v for k, v in doc.items() if k not in ("format", "version")}
    if payload_checksum(payload) != checksum:
        raise ValueError(f"{path}: checksum mismatch, file corrupted or edited")
    return payload, checksum


def save_construction(
    path,
    profile: ReliabilityProfile,
    partition: IndexPartition,
    extra_params: dict | None = None,
) -> str:
    params = dict(profile.params)
    if extra_params:
        params.update(extra_params)
    payload = {
        "N": int(partition.N),
        "method": profile.method,
        "params": params,
        "scores": [float(s) for s in profile.scores],
        "partition": {
            "F": [int(i) for i in partition.F],
            "I": [int(i) for i in partition.I],
            "P": [int(i) for i in partition.P],
        },
    }
    return _dump(path, CONSTRUCTION_FORMAT, payload)


def load_construction(path) -> tuple[ReliabilityProfile, IndexPartition, str]:
    payload, checksum = _load(path, CONSTRUCTION_FORMAT)
    profile = ReliabilityProfile(
        payload["method"], np.array(payload["scores"]), payload["params"]
    )
    part = payload["partition"]
    partition = IndexPartition(
        F=np.array(part["F"], dtype=np.int64),
        I=np.array(part["I"], dtype=np.int64),
        P=np.array(part["P"], dtype=np.int64),
        N=payload["N"],
    )
    return profile, partition, checksum


def save_solution(path, solution, profile_kind: str) -> str:
    payload = {
        "profile": profile_kind,
        "N": int(len(solution.p)),
        "lambda": float(solution.lam),
        "attack_model": solution.attack_model,
        "attack_ratio": solution.attack_ratio,
        "payload_bits": float(solution.achieved_payload),
        "distortion": float(solution.achieved_distortion),
        "p": [float(v) for v in solution.p],
        "theta": [float(v) for v in solution.theta],
    }
    return _dump(path, SOLUTION_FORMAT, payload)


def load_solution(path) -> tuple[dict, str]:
    return _load(path, SOLUTION_FORMAT)


def save_context(
    path,
    scheme: str,
    N: int,
    construction_checksum: str,
    solution_checksum: str,
    key_seed: int | None,
) -> str:
    payload = {
        "scheme": scheme,
        "N": int(N),
        "construction_checksum": construction_checksum,
        "solution_checksum": solution_checksum,
        "key_fingerprint": None if key_seed is None else key_fingerprint(key_seed),
    }
    return _dump(path, CONTEXT_FORMAT, payload)


def load_context(path) -> dict:
    payload, _ = _load(path, CONTEXT_FORMAT)
    return payload
