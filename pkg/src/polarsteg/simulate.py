"""Seeded end-to-end experiment drivers with CSV / per-trial-record output.

Two experiment families:

* distortion: embed random messages into random covers across an (N, R)
  grid and compare the measured per-bit weighted distortion against the
  large-N optimizer bound.
* robustness: embed at fixed (N, R), apply Bernoulli attack noise at a set
  of actual intensities, extract, and report message bit error rates.

Every trial draws from its own stream keyed by (base seed, cell tag, trial
index), so aggregates are independent of execution order and chunking, and
identical configs reproduce byte-identical reports (wall-time column aside).
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .codec import CoderConfig, FrozenSpec, scl_decode
from .construction import (
    ChannelBank,
    IndexPartition,
    ReliabilityProfile,
    degrading_merge_construct,
    monte_carlo_construct,
    polarize_bhattacharyya,
    select_adaptive_partition,
    select_robust_partition,
)
from .optimizer import (
    DistortionProfile,
    h2,
    solve_am2,
    solve_pls,
    solve_robust_pls_am1,
    theoretical_bound,
)
from .stego import StegoContext, adaptive_embed, adaptive_extract, robust_embed, robust_extract
from .transform import polar_transform

__all__ = [
    "ExperimentConfig",
    "SimulationReport",
    "sample_bss",
    "sample_attack",
    "run_distortion_experiment",
    "run_robustness_experiment",
    "check_report",
    "REPORT_COLUMNS",
]

BOUND_REFERENCE_N = 1 << 22

REPORT_COLUMNS = [
    "experiment",
    "scheme",
    "profile",
    "attack_model",
    "N",
    "R",
    "theta",
    "actual",
    "L",
    "trials",
    "mean_distortion",
    "ci95_distortion",
    "mean_ber",
    "ci95_ber",
    "eb_bound",
    "wall_s",
]


def sample_bss(N: int, seed) -> np.ndarray:
    """i.i.d. Ber(1/2) cover bits, deterministic per seed."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, N, dtype=np.uint8)


def sample_attack(theta_vec: np.ndarray, seed) -> np.ndarray:
    """Independent Ber(theta_i) noise bits; apply to stego by XOR."""
    theta = np.asarray(theta_vec, dtype=np.float64)
    if np.any(theta < 0) or np.any(theta > 0.5):
        raise ValueError("attack intensities must lie in [0, 0.5]")
    rng = np.random.default_rng(seed)
    return (rng.random(theta.shape[0]) < theta).astype(np.uint8)


def _stream(base_seed: int, cell: str, trial: int, stream: str):
    tag = int.from_bytes(hashlib.sha256(f"{cell}|{stream}".encode()).digest()[:8], "big")
    return np.random.SeedSequence([int(base_seed), tag, int(trial)])


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run; unset grid members fall back to the defaults
    used throughout the reference measurements."""

    experiment: str = "robustness"  # distortion | robustness
    profiles: tuple = ("constant", "linear", "square")
    schemes: tuple = ("adaptive", "robust")
    attack_model: str = "AM1"  # AM1 | AM2 (robustness only)
    n_grid: tuple = (1 << 16,)
    r_grid: tuple = (0.1,)
    theta_grid: tuple = (0.005, 0.01)  # preset intensities for robust rows
    actual_grid: tuple = (0.001, 0.002, 0.004, 0.006)  # AM1 thetas / AM2 ratios
    list_size: int = 16
    trials: int = 200
    seed: int = 20240915
    w_construction: str = "bhattacharyya"
    q_construction: str = "monte_carlo"
    mc_trials: int = 20000
    merge_limit: int = 128
    delta: float = 0.0  # attack-side frozen margin as a rate
    workers: int = 1
    cache_dir: Optional[str] = None

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        """JSON key/value config; keys match the dataclass fields."""
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        for key in ("profiles", "schemes", "n_grid", "r_grid", "theta_grid", "actual_grid"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class SimulationReport:
    rows: list
    metadata: dict

    def to_csv(self, path) -> None:
        lines = [",".join(REPORT_COLUMNS)]
        for row in self.rows:
            cells = []
            for col in REPORT_COLUMNS:
                v = row.get(col, "")
                if isinstance(v, float):
                    cells.append(repr(v))
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n")

    def formatted_table(self) -> str:
        """Displayed BER uses the reporting convention: below 1e-5 prints 0."""
        out = []
        for row in self.rows:
            ber = row.get("mean_ber")
            shown = "" if ber in ("", None) else (
                "0" if ber < 1e-5 else f"{ber:.5f}"
            )
            out.append(
                f"{row['scheme']:>9s} {row['profile']:>8s} {row['attack_model']:>4s} "
                f"theta={row['theta']!s:>6s} actual={row['actual']!s:>6s} "
                f"dist={row['mean_distortion']:.6f} ber={shown}"
            )
        return "\n".join(out)


def _write_ndrec(path, records) -> None:
    with open(path, "a") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# -- construction caching -----------------------------------------------------


def _construct_profile(
    method: str,
    bank: ChannelBank,
    mc_trials: int,
    merge_limit: int,
    seed: int,
    cache_dir: Optional[str],
) -> ReliabilityProfile:
    if method == "bhattacharyya":
        return polarize_bhattacharyya(bank)
    key = hashlib.sha256(
        b"|".join(
            [
                method.encode(),
                str(bank.N).encode(),
                str(mc_trials).encode(),
                str(merge_limit).encode(),
                str(seed).encode(),
                bank.crossover.tobytes(),
            ]
        )
    ).hexdigest()[:24]
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / f"profile_{method}_{key}.npz"
        if cache.exists():
            data = np.load(cache)
            return ReliabilityProfile(method, data["scores"], json.loads(str(data["params"])))
    if method == "monte_carlo":
        profile, _ = monte_carlo_construct(bank, 0, mc_trials, seed)
    elif method == "degrading_merge":
        profile = degrading_merge_construct(bank, merge_limit)
    else:
        raise ValueError(f"unknown construction method {method!r}")
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache, scores=profile.scores, params=json.dumps(profile.params))
    return profile


def _frozen_budget(theta_vec: np.ndarray, delta: float) -> int:
    return int(math.ceil(float(np.sum(h2(theta_vec))))) + int(math.ceil(delta * len(theta_vec)))


# -- per-cell drivers ----------------------------------------------------------


def _mean_ci(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    m = float(arr.mean())
    if len(arr) < 2:
        return m, 0.0
    half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(len(arr))
    return m, half


def _run_trials(worker, trials: int, workers: int):
    if workers <= 1:
        return [worker(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(trials)))


def _distortion_cell(cfg: ExperimentConfig, profile_kind: str, N: int, R: float):
    cell = f"distortion|{profile_kind}|{N}|{R}|{cfg.theta_grid[0]}"
    theta = cfg.theta_grid[0]
    prof = DistortionProfile.make(profile_kind, N)
    q = int(math.ceil(R * N))
    sol = (
        solve_robust_pls_am1(prof, q, theta) if theta > 0 else solve_pls(prof, q)
    )
    bank = ChannelBank(sol.p)
    w_prof = _construct_profile(
        cfg.w_construction, bank, cfg.mc_trials, cfg.merge_limit, cfg.seed, cfg.cache_dir
    )
    mF = _frozen_budget(sol.theta, cfg.delta) if theta > 0 else 0
    part = select_adaptive_partition(w_prof, q + mF)
    coder = CoderConfig(cfg.list_size)
    rho = prof.weights

    def one_trial(t: int):
        cover = sample_bss(N, _stream(cfg.seed, cell, t, "cover"))
        rng = np.random.default_rng(_stream(cfg.seed, cell, t, "payload"))
        payload = rng.integers(0, 2, q + mF, dtype=np.uint8)
        uhat, _ = scl_decode(cover, bank, FrozenSpec(part.F, payload), coder)
        stego = polar_transform(uhat)
        return float(np.sum(rho * (stego ^ cover))) / N

    dists = _run_trials(one_trial, cfg.trials, cfg.workers)
    mean_d, ci_d = _mean_ci(dists)
    eb = theoretical_bound(profile_kind, BOUND_REFERENCE_N, R, theta)
    records = [
        {"cell": cell, "trial": t, "distortion": d, "bit_errors": None, "msg_bits": q}
        for t, d in enumerate(dists)
    ]
    row = {
        "experiment": "distortion",
        "scheme": "robust",
        "profile": profile_kind,
        "attack_model": "AM1",
        "N": N,
        "R": R,
        "theta": theta,
        "actual": "",
        "L": cfg.list_size,
        "trials": cfg.trials,
        "mean_distortion": mean_d,
        "ci95_distortion": ci_d,
        "mean_ber": "",
        "ci95_ber": "",
        "eb_bound": eb,
        "wall_s": 0.0,
    }
    return row, records


def run_distortion_experiment(cfg: ExperimentConfig, out_dir=None) -> SimulationReport:
    """Sweep the (profile, N, R) grid, embedding cfg.trials random messages
    per cell; the bound column is the optimizer value at N = 2^22."""
    rows = []
    records_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records_path = out_dir / "trials.ndrec"
        records_path.write_text("")
    for profile_kind in cfg.profiles:
        for N in cfg.n_grid:
            for R in cfg.r_grid:
                t0 = time.time()
                row, records = _distortion_cell(cfg, profile_kind, N, R)
                row["wall_s"] = round(time.time() - t0, 3)
                rows.append(row)
                if records_path is not None:
                    _write_ndrec(records_path, records)
    report = SimulationReport(rows, _metadata(cfg))
    if out_dir is not None:
        report.to_csv(Path(out_dir) / "report.csv")
    return report


def _robust_preset(cfg, profile_kind, N, R, theta):
    """Solve the preset problem and build the partition and banks."""
    prof = DistortionProfile.make(profile_kind, N)
    q = int(math.ceil(R * N))
    if cfg.attack_model == "AM2":
        sol = solve_am2(prof, q, theta)
    else:
        sol = solve_robust_pls_am1(prof, q, theta)
    embed_bank = ChannelBank(sol.p)
    attack_bank = ChannelBank(sol.theta, role="attack")
    w_prof = _construct_profile(
        cfg.w_construction, embed_bank, cfg.mc_trials, cfg.merge_limit, cfg.seed, cfg.cache_dir
    )
    q_prof = _construct_profile(
        cfg.q_construction, attack_bank, cfg.mc_trials, cfg.merge_limit, cfg.seed + 1, cfg.cache_dir
    )
    mF = _frozen_budget(sol.theta, cfg.delta)
    part = select_robust_partition(w_prof, q_prof, q, mF)
    return sol, embed_bank, attack_bank, part, q


def _actual_theta_vec(cfg, actual, attack_bank, N):
    if cfg.attack_model == "AM1":
        return np.full(N, float(actual))
    return float(actual) * attack_bank.crossover


def _robust_cell(cfg: ExperimentConfig, profile_kind: str, N: int, R: float, theta: float):
    """One robust-scheme preset row group: embed once per trial, attack and
    extract once per actual-noise column."""
    cell = f"robust|{cfg.attack_model}|{profile_kind}|{N}|{R}|{theta}"
    sol, embed_bank, attack_bank, part, q = _robust_preset(cfg, profile_kind, N, R, theta)
    coder = CoderConfig(cfg.list_size)
    rho = DistortionProfile.make(profile_kind, N).weights
    columns = list(cfg.actual_grid)

    def one_trial(t: int):
        cover = sample_bss(N, _stream(cfg.seed, cell, t, "cover"))
        rng_m = np.random.default_rng(_stream(cfg.seed, cell, t, "message"))
        message = rng_m.integers(0, 2, q, dtype=np.uint8)
        key_seed = int(
            np.random.default_rng(_stream(cfg.seed, cell, t, "key")).integers(0, 2**31)
        )
        from .stego import make_frozen_key

        ctx = StegoContext(
            partition=part,
            embed_bank=embed_bank,
            attack_bank=attack_bank,
            frozen_key=make_frozen_key(key_seed, len(part.F)),
            coder=coder,
        )
        stego = robust_embed(cover, message, ctx)
        dist = float(np.sum(rho * (stego ^ cover))) / N
        errs = []
        for ci, actual in enumerate(columns):
            tv = _actual_theta_vec(cfg, actual, attack_bank, N)
            noise = sample_attack(tv, _stream(cfg.seed, cell, t, f"noise{ci}"))
            got = robust_extract(stego ^ noise, ctx)
            errs.append(int(np.count_nonzero(got != message)))
        return dist, errs

    results = _run_trials(one_trial, cfg.trials, cfg.workers)
    dists = [r[0] for r in results]
    mean_d, ci_d = _mean_ci(dists)
    rows = []
    records = []
    for ci, actual in enumerate(columns):
        bers = [r[1][ci] / q for r in results]
        mean_b, ci_b = _mean_ci(bers)
        rows.append(
            {
                "experiment": "robustness",
                "scheme": f"robust(theta={theta})",
                "profile": profile_kind,
                "attack_model": cfg.attack_model,
                "N": N,
                "R": R,
                "theta": theta,
                "actual": actual,
                "L": cfg.list_size,
                "trials": cfg.trials,
                "mean_distortion": mean_d,
                "ci95_distortion": ci_d,
                "mean_ber": mean_b,
                "ci95_ber": ci_b,
                "eb_bound": "",
                "wall_s": 0.0,
            }
        )
        records.extend(
            {
                "cell": cell,
                "actual": actual,
                "trial": t,
                "distortion": results[t][0],
                "bit_errors": results[t][1][ci],
                "msg_bits": q,
            }
            for t in range(cfg.trials)
        )
    return rows, records


def _adaptive_cell(cfg: ExperimentConfig, profile_kind: str, N: int, R: float):
    """Adaptive-scheme rows: plain payload-limited embedding, transform-only
    extraction after each attack column."""
    cell = f"adaptive|{cfg.attack_model}|{profile_kind}|{N}|{R}"
    prof = DistortionProfile.make(profile_kind, N)
    q = int(math.ceil(R * N))
    sol = solve_pls(prof, q)
    embed_bank = ChannelBank(sol.p)
    w_prof = _construct_profile(
        cfg.w_construction, embed_bank, cfg.mc_trials, cfg.merge_limit, cfg.seed, cfg.cache_dir
    )
    part = select_adaptive_partition(w_prof, q)
    coder = CoderConfig(cfg.list_size)
    rho = prof.weights
    columns = list(cfg.actual_grid)
    # AM2 columns scale the preset attack intensities of the lowest preset theta
    if cfg.attack_model == "AM2":
        base_theta = min(cfg.theta_grid)
        base = solve_am2(prof, q, base_theta)
        base_vec = base.theta
    else:
        base_vec = None

    def one_trial(t: int):
        cover = sample_bss(N, _stream(cfg.seed, cell, t, "cover"))
        rng_m = np.random.default_rng(_stream(cfg.seed, cell, t, "message"))
        message = rng_m.integers(0, 2, q, dtype=np.uint8)
        ctx = StegoContext(partition=part, embed_bank=embed_bank, coder=coder)
        stego = adaptive_embed(cover, message, ctx)
        dist = float(np.sum(rho * (stego ^ cover))) / N
        errs = []
        for ci, actual in enumerate(columns):
            tv = np.full(N, float(actual)) if base_vec is None else float(actual) * base_vec
            noise = sample_attack(tv, _stream(cfg.seed, cell, t, f"noise{ci}"))
            got = adaptive_extract(stego ^ noise, part)
            errs.append(int(np.count_nonzero(got != message)))
        return dist, errs

    results = _run_trials(one_trial, cfg.trials, cfg.workers)
    dists = [r[0] for r in results]
    mean_d, ci_d = _mean_ci(dists)
    rows = []
    records = []
    for ci, actual in enumerate(columns):
        bers = [r[1][ci] / q for r in results]
        mean_b, ci_b = _mean_ci(bers)
        rows.append(
            {
                "experiment": "robustness",
                "scheme": "adaptive",
                "profile": profile_kind,
                "attack_model": cfg.attack_model,
                "N": N,
                "R": R,
                "theta": 0.0,
                "actual": actual,
                "L": cfg.list_size,
                "trials": cfg.trials,
                "mean_distortion": mean_d,
                "ci95_distortion": ci_d,
                "mean_ber": mean_b,
                "ci95_ber": ci_b,
                "eb_bound": "",
                "wall_s": 0.0,
            }
        )
        records.extend(
            {
                "cell": cell,
                "actual": actual,
                "trial": t,
                "distortion": results[t][0],
                "bit_errors": results[t][1][ci],
                "msg_bits": q,
            }
            for t in range(cfg.trials)
        )
    return rows, records


def run_robustness_experiment(cfg: ExperimentConfig, out_dir=None) -> SimulationReport:
    """Embed, attack at each actual intensity, extract, count message errors.

    Raw means go to the CSV; the display convention (values below 1e-5 shown
    as 0) only affects formatted_table().
    """
    rows = []
    records_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        records_path = out_dir / "trials.ndrec"
        records_path.write_text("")
    for profile_kind in cfg.profiles:
        for N in cfg.n_grid:
            for R in cfg.r_grid:
                if "adaptive" in cfg.schemes:
                    t0 = time.time()
                    new_rows, records = _adaptive_cell(cfg, profile_kind, N, R)
                    wall = round(time.time() - t0, 3)
                    for row in new_rows:
                        row["wall_s"] = wall
                    rows.extend(new_rows)
                    if records_path is not None:
                        _write_ndrec(records_path, records)
                if "robust" in cfg.schemes:
                    for theta in cfg.theta_grid:
                        t0 = time.time()
                        new_rows, records = _robust_cell(cfg, profile_kind, N, R, theta)
                        wall = round(time.time() - t0, 3)
                        for row in new_rows:
                            row["wall_s"] = wall
                        rows.extend(new_rows)
                        if records_path is not None:
                            _write_ndrec(records_path, records)
    report = SimulationReport(rows, _metadata(cfg))
    if out_dir is not None:
        report.to_csv(Path(out_dir) / "report.csv")
    return report


def _metadata(cfg: ExperimentConfig) -> dict:
    meta = asdict(cfg)
    meta["library_version"] = __version__
    return meta


# -- threshold checking --------------------------------------------------------


def check_report(rows, expectations) -> list:
    """Compare report rows against expectation entries.

    Each entry: {"match": {column: value, ...}, "assert": {...}} with assert
    keys mean_ber_max, mean_ber_min, rel_eb_max (|distortion/eb - 1| bound).
    Returns a list of violation strings (empty = all good).
    """
    violations = []
    for exp in expectations:
        match = exp["match"]
        hits = [
            r
            for r in rows
            if all(str(r.get(k)) == str(v) for k, v in match.items())
        ]
        if not hits:
            violations.append(f"no report row matches {match}")
            continue
        for r in hits:
            checks = exp["assert"]
            if "mean_ber_max" in checks and not r["mean_ber"] <= checks["mean_ber_max"]:
                violations.append(
                    f"{match}: ber {r['mean_ber']} > {checks['mean_ber_max']}"
                )
            if "mean_ber_min" in checks and not r["mean_ber"] >= checks["mean_ber_min"]:
                violations.append(
                    f"{match}: ber {r['mean_ber']} < {checks['mean_ber_min']}"
                )
            if "rel_eb_max" in checks:
                rel = abs(r["mean_distortion"] / r["eb_bound"] - 1.0)
                if not rel <= checks["rel_eb_max"]:
                    violations.append(
                        f"{match}: |distortion/eb-1| = {rel:.4f} > {checks['rel_eb_max']}"
                    )
    return violations
