"""Embedding-probability solvers for payload- and distortion-limited sending.

The optimal per-position flip probability has the Gibbs form
p_i = 1 / (1 + exp(lambda * rho_i)); all solvers reduce to a monotone
bisection in lambda against either the entropy (payload) constraint or the
distortion constraint.  Robust variants budget the payload for the preset
attack entropy; the proportional attack model adds a second bisection for
the attack ratio.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

__all__ = [
    "DistortionProfile",
    "EmbeddingSolution",
    "h2",
    "h2_inv",
    "gibbs_probs",
    "solve_pls",
    "solve_dls",
    "solve_robust_pls_am1",
    "solve_am2",
    "theoretical_bound",
]

LAMBDA_CAP = 1e6

PROFILE_KINDS = ("constant", "linear", "square", "custom")


@dataclass(frozen=True)
class DistortionProfile:
    """Per-position modification costs rho_i >= 0 (inf marks wet positions)."""

    kind: str
    weights: np.ndarray

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        arr = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ValueError("weights must be a non-empty vector")
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise ValueError("weights must be non-negative")
        if not np.any(np.isfinite(arr)):
            raise ValueError("at least one weight must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @property
    def N(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def make(cls, kind: str, N: int) -> "DistortionProfile":
        """Analytic cost profiles c(i/N) evaluated at i = 1..N."""
        x = np.arange(1, N + 1, dtype=np.float64) / N
        if kind == "constant":
            w = np.ones(N)
        elif kind == "linear":
            w = x
        elif kind == "square":
            w = x * x
        else:
            raise ValueError(f"no analytic rule for kind {kind!r}")
        return cls(kind, w)

    @classmethod
    def from_file(cls, path) -> "DistortionProfile":
        """Custom profile: one cost per line, 'inf' allowed for wet positions."""
        with open(path) as fh:
            w = [float(line.strip()) for line in fh if line.strip()]
        return cls("custom", np.array(w))


@dataclass(frozen=True)
class EmbeddingSolution:
    """Lagrange multiplier, flip probabilities, and attack intensities."""

    lam: float
    p: np.ndarray
    theta: np.ndarray
    attack_model: str = "none"  # none | AM1 | AM2
    achieved_payload: float = 0.0
    achieved_distortion: float = 0.0
    attack_ratio: Optional[float] = None  # AM2 only

    def __post_init__(self):
        for name in ("p", "theta"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), np.float64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def h2(p):
    """Binary entropy in bits, with 0*log(0) = 0; accepts scalars or arrays."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("probability out of [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(arr > 0, arr * np.log2(arr), 0.0) - np.where(
            arr < 1, (1 - arr) * np.log2(1 - arr), 0.0
        )
    return float(out) if np.isscalar(p) else out


def h2_inv(y: float) -> float:
    """Inverse of h2 on [0, 1/2], bisected to 1e-12 absolute in p."""
    if y < 0 or y > 1:
        raise ValueError(f"entropy out of [0, 1], got {y}")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if h2(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gibbs_probs(profile: DistortionProfile, lam: float) -> np.ndarray:
    """Optimal flip probabilities 1/(1 + exp(lam * rho_i)); wet positions
    (infinite cost) are never modified."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    rho = profile.weights
    finite = np.isfinite(rho)
    p = np.zeros_like(rho)
    if math.isinf(lam):
        p[finite] = np.where(rho[finite] > 0, 0.0, 0.5)
    else:
        p[finite] = expit(-lam * rho[finite])
    return p


def _payload(profile, lam):
    return float(np.sum(h2(gibbs_probs(profile, lam))))


def _distortion(profile, lam):
    rho = profile.weights
    p = gibbs_probs(profile, lam)
    finite = np.isfinite(rho)
    return float(np.sum(p[finite] * rho[finite]))


def _bisect_lambda(objective, target: float) -> float:
    """Find lam with objective(lam) ~= target; objective must be strictly
    decreasing.  Doubles the bracket from [0, 1], capped at LAMBDA_CAP."""
    hi = 1.0
    while objective(hi) > target and hi < LAMBDA_CAP:
        hi *= 2.0
    if hi >= LAMBDA_CAP:
        return LAMBDA_CAP
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if objective(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _finish(profile, lam, theta, model, ratio=None) -> EmbeddingSolution:
    p = gibbs_probs(profile, lam)
    theta = np.asarray(theta, dtype=np.float64)
    payload = float(np.sum(h2(p)) - np.sum(h2(theta)))
    return EmbeddingSolution(
        lam=lam,
        p=p,
        theta=theta,
        attack_model=model,
        achieved_payload=payload,
        achieved_distortion=_distortion(profile, lam),
        attack_ratio=ratio,
    )


def solve_pls(profile: DistortionProfile, q: float) -> EmbeddingSolution:
    """Minimize expected distortion subject to sum h2(p_i) = q message bits.

    The entropy is strictly decreasing in lambda, so a bracketed bisection
    meets the constraint to 1e-6 bits absolute.
    """
    finite = np.isfinite(profile.weights)
    n_finite = int(np.count_nonzero(finite))
    if q < 0 or q > n_finite:
        raise ValueError(f"payload must lie in [0, {n_finite}] bits, got {q}")
    if q == n_finite:
        return _finish(profile, 0.0, np.zeros(profile.N), "none")
    if q == 0.0 and np.all(profile.weights[finite] > 0):
        return _finish(profile, math.inf, np.zeros(profile.N), "none")
    lam = _bisect_lambda(lambda l: _payload(profile, l), q)
    sol = _finish(profile, lam, np.zeros(profile.N), "none")
    if abs(sol.achieved_payload - q) > 1e-6:
        raise RuntimeError(
            f"payload constraint not met: residual {sol.achieved_payload - q:.3e} bits"
        )
    return sol


def solve_dls(profile: DistortionProfile, d_eps: float) -> EmbeddingSolution:
    """Maximize payload subject to total expected distortion d_eps.

    Dual of solve_pls: same Gibbs family, bisection against the distortion
    sum instead, to 1e-9 relative.
    """
    rho = profile.weights
    d_max = float(np.sum(rho[np.isfinite(rho)])) / 2.0
    if d_eps < 0 or d_eps > d_max:
        raise ValueError(f"distortion must lie in [0, {d_max}], got {d_eps}")
    if d_eps == d_max:
        return _finish(profile, 0.0, np.zeros(profile.N), "none")
    if d_eps == 0.0:
        return _finish(profile, math.inf, np.zeros(profile.N), "none")
    lam = _bisect_lambda(lambda l: _distortion(profile, l), d_eps)
    sol = _finish(profile, lam, np.zeros(profile.N), "none")
    if abs(sol.achieved_distortion - d_eps) > 1e-9 * max(d_eps, 1.0):
        raise RuntimeError(
            f"distortion constraint not met: residual "
            f"{sol.achieved_distortion - d_eps:.3e}"
        )
    return sol


def solve_robust_pls_am1(
    profile: DistortionProfile, q: float, theta: float
) -> EmbeddingSolution:
    """Uniform-intensity attack: meet sum h2(p_i) = q + N*h2(theta).

    The p_i >= theta ordering is not guaranteed here (low-cost positions can
    fall below the attack intensity); the proportional model restores it.
    """
    if not 0 <= theta <= 0.5:
        raise ValueError(f"attack intensity must lie in [0, 0.5], got {theta}")
    if np.any(~np.isfinite(profile.weights)) and theta > 0:
        raise ValueError("wet positions are not supported in robust mode")
    if theta == 0.0:
        sol = solve_pls(profile, q)
        return _finish(profile, sol.lam, np.zeros(profile.N), "AM1")
    target = q + profile.N * h2(theta)
    base = solve_pls(profile, target)
    return _finish(profile, base.lam, np.full(profile.N, theta), "AM1")


def solve_am2(profile: DistortionProfile, q: float, theta: float) -> EmbeddingSolution:
    """Proportional attack theta_i = R_a * p_i, solved in two phases.

    Phase 1 assumes the robustness loss matches the uniform model and solves
    for p as in AM1.  Phase 2 bisects R_a in [0, 1] on the increasing map
    R -> sum h2(R * p_i) until it matches N*h2(theta).
    """
    base = solve_robust_pls_am1(profile, q, theta)
    p = base.p
    if theta == 0.0:
        return _finish(profile, base.lam, np.zeros(profile.N), "AM2", ratio=0.0)
    target = profile.N * h2(theta)

    def g(r):
        return float(np.sum(h2(r * p)))

    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) < target:
            lo = mid
        else:
            hi = mid
    ratio = 0.5 * (lo + hi)
    if abs(g(ratio) - target) > 1e-9 * max(target, 1.0):
        raise RuntimeError(
            f"no attack ratio in [0, 1] matches the preset entropy: "
            f"residual {g(ratio) - target:.3e} bits"
        )
    return _finish(profile, base.lam, ratio * p, "AM2", ratio=ratio)


_bound_cache: dict = {}
_bound_lock = threading.Lock()


def theoretical_bound(
    kind: str, N: int, R: float, theta: float = 0.0, attack_model: str = "AM1"
) -> float:
    """Per-bit average distortion of the optimal embedding at rate R.

    Solves the relevant payload-limited problem at block length N and divides
    by N; results are memoized.  For the constant profile this equals
    h2_inv(R + h2(theta)) at every N.
    """
    key = (kind, N, round(R, 12), round(theta, 12), attack_model)
    with _bound_lock:
        if key in _bound_cache:
            return _bound_cache[key]
    profile = DistortionProfile.make(kind, N)
    q = R * N
    if attack_model in ("AM1", "AM2") and theta > 0:
        sol = solve_robust_pls_am1(profile, q, theta)
    else:
        sol = solve_pls(profile, q)
    value = sol.achieved_distortion / N
    with _bound_lock:
        _bound_cache[key] = value
    return value
