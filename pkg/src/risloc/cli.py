"""Command line front end.

    risloc run --spec sweep.json [--out DIR] [--threads N] [--no-figures]
    risloc single --scene scene.json --scheme proposed --seed 42 [...]

`run` executes a sweep spec (or a previously written manifest) and writes
results.csv, manifest.json, and figures. `single` runs one positioning trial
and prints the per-cycle trace. Validation problems exit with code 2 and a
diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .harness import SCHEMES, load_sweep_spec, run_single, run_sweep
from .protocol import ProtocolConfig
from .report import emit_report
from .scene import load_scene_spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risloc",
        description="RSS positioning simulator with a reconfigurable reflecting surface")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep spec and write reports")
    run_p.add_argument("--spec", required=True, help="sweep spec or manifest JSON")
    run_p.add_argument("--out", help="output directory (default: spec's out_dir)")
    run_p.add_argument("--threads", type=int, help="worker processes (default: spec's)")
    run_p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering, write CSV and manifest only")

    one_p = sub.add_parser("single", help="run one positioning trial and print it")
    one_p.add_argument("--scene", required=True, help="scene spec JSON")
    one_p.add_argument("--scheme", required=True,
                       help="one of: " + ", ".join(SCHEMES))
    one_p.add_argument("--seed", type=int, required=True, help="trial seed (u64)")
    one_p.add_argument("--cycles", type=int, help="protocol cycles (default 3)")
    one_p.add_argument("--users", type=int, help="user count (default 1)")
    one_p.add_argument("--out", help="also write the trial trace as JSON here")
    return parser


def _cmd_run(args) -> int:
    spec = load_sweep_spec(args.spec)
    if args.threads is not None:
        spec.threads = args.threads
    out_dir = args.out if args.out is not None else spec.out_dir
    spec.validate()
    result = run_sweep(spec)
    paths = emit_report(result, out_dir, figures=not args.no_figures)
    for p in result.points:
        print(f"{p.scheme} {p.param}={p.value:g}: "
              f"error {p.mean_error_m:.4f} +/- {p.stderr_m:.4f} m, "
              f"{p.mean_evals:.0f} evals")
    print("wrote", paths["csv"])
    print("wrote", paths["manifest"])
    for fig in paths.get("figures", ()):
        print("wrote", fig)
    return 0


def _cmd_single(args) -> int:
    if args.seed < 0:
        raise ValueError("seed must be non-negative")
    scene_spec = load_scene_spec(args.scene)
    cfg = ProtocolConfig()
    if args.cycles is not None:
        cfg = dataclasses.replace(cfg, num_cycles=args.cycles)
    if args.users is not None:
        cfg = dataclasses.replace(cfg, num_users=args.users)
    err, estimates, true_blocks, records = run_single(
        scene_spec, args.scheme, args.seed, protocol=cfg)
    for r in records:
        print(f"cycle {r.cycle}: loss {r.loss:.4f}, {r.evals} evals, "
              f"rss {np.array2string(r.rss, precision=2)}")
    print(f"true blocks     {list(map(int, true_blocks))}")
    print(f"estimated blocks {list(map(int, estimates))}")
    print(f"mean error {err:.4f} m")
    if args.out:
        trace = {
            "scheme": args.scheme,
            "seed": args.seed,
            "error_m": err,
            "true_blocks": [int(b) for b in true_blocks],
            "estimates": [int(b) for b in estimates],
            "cycles": [
                {
                    "cycle": r.cycle,
                    "pattern": np.asarray(r.pattern).tolist(),
                    "rss": r.rss.tolist(),
                    "loss": r.loss,
                    "evals": r.evals,
                    "opt_seconds": r.opt_seconds,
                }
                for r in records
            ],
        }
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(trace, f, indent=2)
            f.write("\n")
        print("wrote", args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_single(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
