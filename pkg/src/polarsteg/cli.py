"""Command-line front end: construct / solve / embed / extract / simulate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import files
from .bitio import read_bits, write_bits
from .codec import CoderConfig, FrozenSpec
from .construction import (
    ChannelBank,
    default_frozen_budget,
    degrading_merge_construct,
    monte_carlo_construct,
    polarize_bhattacharyya,
    select_adaptive_partition,
    select_robust_partition,
)
from .optimizer import DistortionProfile, solve_am2, solve_dls, solve_pls, solve_robust_pls_am1
from .simulate import (
    ExperimentConfig,
    check_report,
    run_distortion_experiment,
    run_robustness_experiment,
)
from .stego import (
    StegoContext,
    adaptive_embed,
    adaptive_extract,
    make_frozen_key,
    robust_embed,
    robust_extract,
)


def _read_probs(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(line.strip()) for line in fh if line.strip()])


def _build_profile(cross, role, method, mu, mc_trials, seed):
    bank = ChannelBank(cross, role=role)
    if method == "bhattacharyya":
        return polarize_bhattacharyya(bank)
    if method == "degrading_merge":
        return degrading_merge_construct(bank, mu)
    if method == "monte_carlo":
        profile, _ = monte_carlo_construct(bank, 0, mc_trials, seed)
        return profile
    raise SystemExit(f"unknown method {method}")


def _cmd_construct(args) -> int:
    if args.probs:
        p = _read_probs(args.probs)
        theta = np.zeros(len(p))
    else:
        payload, _ = files.load_solution(args.solution)
        p = np.array(payload["p"])
        theta = np.array(payload["theta"])
    if args.N is not None and args.N != len(p):
        raise SystemExit(f"channel spec has {len(p)} entries, expected N={args.N}")
    w_prof = _build_profile(p, "embedding", args.method, args.mu, args.mc_trials, args.seed)
    robust = np.any(theta > 0)
    if robust:
        q_prof = _build_profile(
            theta, "attack", args.attack_method, args.mu, args.mc_trials, args.seed + 1
        )
        mF = args.mF if args.mF is not None else default_frozen_budget(theta, args.delta)
        part = select_robust_partition(w_prof, q_prof, args.q, mF)
        extra = {"attack_method": args.attack_method, "mF": mF}
    else:
        part = select_adaptive_partition(w_prof, args.q)
        extra = None
    checksum = files.save_construction(args.out, w_prof, part, extra)
    print(
        f"wrote {args.out} (checksum {checksum[:12]}, "
        f"|F|={len(part.F)} |I|={len(part.I)} |P|={len(part.P)})"
    )
    return 0


def _cmd_solve(args) -> int:
    if args.profile == "custom":
        prof = DistortionProfile.from_file(args.weights)
    else:
        prof = DistortionProfile.make(args.profile, args.N)
    if args.d_eps is not None:
        sol = solve_dls(prof, args.d_eps)
    else:
        q = args.q if args.q is not None else args.rate * prof.N
        if args.attack_model == "AM1" and args.theta > 0:
            sol = solve_robust_pls_am1(prof, q, args.theta)
        elif args.attack_model == "AM2" and args.theta > 0:
            sol = solve_am2(prof, q, args.theta)
        else:
            sol = solve_pls(prof, q)
    checksum = files.save_solution(args.out, sol, args.profile)
    print(
        f"wrote {args.out} (checksum {checksum[:12]}, lambda={sol.lam:.6g}, "
        f"payload={sol.achieved_payload:.3f} bits, E(D)={sol.achieved_distortion:.6g})"
    )
    return 0


def _load_pair(args):
    _, partition, cons_ck = files.load_construction(args.construction)
    payload, sol_ck = files.load_solution(args.solution)
    if payload["N"] != partition.N:
        raise SystemExit("solution and construction block lengths differ")
    return partition, payload, cons_ck, sol_ck


def _cmd_embed(args) -> int:
    partition, payload, cons_ck, sol_ck = _load_pair(args)
    cover = read_bits(args.cover)
    message = read_bits(args.message)
    embed_bank = ChannelBank(np.array(payload["p"]))
    coder = CoderConfig(args.list_size)
    robust = len(partition.P) > 0
    if robust:
        if args.key_seed is None:
            raise SystemExit("robust embedding requires --key-seed")
        ctx = StegoContext(
            partition=partition,
            embed_bank=embed_bank,
            attack_bank=ChannelBank(np.array(payload["theta"]), role="attack"),
            frozen_key=make_frozen_key(args.key_seed, len(partition.F)),
            coder=coder,
        )
        stego = robust_embed(cover, message, ctx)
        scheme = "robust"
    else:
        ctx = StegoContext(partition=partition, embed_bank=embed_bank, coder=coder)
        stego = adaptive_embed(cover, message, ctx)
        scheme = "adaptive"
    write_bits(args.out, stego)
    if args.context:
        files.save_context(args.context, scheme, partition.N, cons_ck, sol_ck, args.key_seed)
    print(f"wrote {args.out} ({scheme}, N={partition.N}, |msg|={len(message)})")
    return 0


def _cmd_extract(args) -> int:
    partition, payload, cons_ck, sol_ck = _load_pair(args)
    if args.context:
        ctx_doc = files.load_context(args.context)
        if ctx_doc["construction_checksum"] != cons_ck:
            raise SystemExit(
                "construction file does not match the one used for embedding; refusing to extract"
            )
        if ctx_doc["solution_checksum"] != sol_ck:
            raise SystemExit(
                "solution file does not match the one used for embedding; refusing to extract"
            )
        if ctx_doc["key_fingerprint"] is not None:
            if args.key_seed is None or files.key_fingerprint(args.key_seed) != ctx_doc["key_fingerprint"]:
                raise SystemExit("key seed does not match the embedding context; refusing to extract")
    stego = read_bits(args.stego)
    robust = len(partition.P) > 0
    if robust:
        if args.key_seed is None:
            raise SystemExit("robust extraction requires --key-seed")
        ctx = StegoContext(
            partition=partition,
            embed_bank=ChannelBank(np.array(payload["p"])),
            attack_bank=ChannelBank(np.array(payload["theta"]), role="attack"),
            frozen_key=make_frozen_key(args.key_seed, len(partition.F)),
            coder=CoderConfig(args.list_size),
        )
        message = robust_extract(stego, ctx)
    else:
        message = adaptive_extract(stego, partition)
    write_bits(args.out, message)
    print(f"wrote {args.out} ({len(message)} bits)")
    return 0


def _cmd_simulate(args) -> int:
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ExperimentConfig(**overrides)
    cfg = ExperimentConfig(**{**cfg.__dict__, "experiment": args.mode})
    out_dir = Path(args.out_dir)
    if cfg.cache_dir is None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "cache_dir": str(out_dir / "construction_cache")})
    if args.mode == "distortion":
        report = run_distortion_experiment(cfg, out_dir)
    else:
        report = run_robustness_experiment(cfg, out_dir)
    print(report.formatted_table())
    print(f"report: {out_dir / 'report.csv'}")
    if args.check:
        with open(args.check) as fh:
            expectations = json.load(fh)
        violations = check_report(report.rows, expectations)
        if violations:
            for v in violations:
                print(f"CHECK FAILED: {v}", file=sys.stderr)
            return 1
        print(f"all {len(expectations)} checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polarsteg", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="estimate subchannel reliability and derive a partition")
    c.add_argument("--N", type=int, default=None)
    c.add_argument("--method", default="bhattacharyya",
                   choices=["bhattacharyya", "degrading_merge", "monte_carlo"])
    c.add_argument("--probs", help="channel spec file: one crossover probability per line")
    c.add_argument("--solution", help="take the channel spec (p and theta) from a solution file")
    c.add_argument("--q", type=int, required=True, help="message bit count")
    c.add_argument("--attack-method", default="monte_carlo", dest="attack_method",
                   choices=["bhattacharyya", "degrading_merge", "monte_carlo"])
    c.add_argument("--mF", type=int, default=None, help="attack-side frozen count (robust)")
    c.add_argument("--delta", type=float, default=0.02, help="frozen margin rate when sizing mF")
    c.add_argument("--mu", type=int, default=256, help="degrading-merge alphabet limit")
    c.add_argument("--mc-trials", type=int, default=100000, dest="mc_trials")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_construct)

    s = sub.add_parser("solve", help="solve for the optimal embedding probabilities")
    s.add_argument("--profile", default="constant",
                   choices=["constant", "linear", "square", "custom"])
    s.add_argument("--weights", help="custom profile weights file (one cost per line)")
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--rate", type=float, default=None, help="payload rate in bpp")
    s.add_argument("--q", type=float, default=None, help="payload in bits (overrides --rate)")
    s.add_argument("--d-eps", type=float, default=None, dest="d_eps",
                   help="solve the distortion-limited problem at this total distortion")
    s.add_argument("--theta", type=float, default=0.0, help="preset attack intensity")
    s.add_argument("--attack-model", default="AM1", choices=["AM1", "AM2"], dest="attack_model")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_solve)

    e = sub.add_parser("embed", help="embed a message file into a cover file")
    e.add_argument("--construction", required=True)
    e.add_argument("--solution", required=True)
    e.add_argument("--cover", required=True)
    e.add_argument("--message", required=True)
    e.add_argument("--key-seed", type=int, default=None, dest="key_seed")
    e.add_argument("--list-size", type=int, default=16, dest="list_size")
    e.add_argument("--context", help="write an embedding context file here")
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_embed)

    x = sub.add_parser("extract", help="extract a message from a (possibly attacked) stego file")
    x.add_argument("--construction", required=True)
    x.add_argument("--solution", required=True)
    x.add_argument("--stego", required=True)
    x.add_argument("--key-seed", type=int, default=None, dest="key_seed")
    x.add_argument("--list-size", type=int, default=16, dest="list_size")
    x.add_argument("--context", help="verify against this embedding context file")
    x.add_argument("--out", required=True)
    x.set_defaults(func=_cmd_extract)

    m = sub.add_parser("simulate", help="run a seeded experiment grid")
    m.add_argument("mode", choices=["distortion", "robustness"])
    m.add_argument("--config", help="JSON config file (keys = ExperimentConfig fields)")
    m.add_argument("--trials", type=int, default=None)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--workers", type=int, default=None)
    m.add_argument("--out-dir", default="simout", dest="out_dir")
    m.add_argument("--check", help="expectations JSON; exit nonzero on violations")
    m.set_defaults(func=_cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
