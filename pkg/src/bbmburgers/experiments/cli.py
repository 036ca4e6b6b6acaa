"""Command-line entry point ``bbm``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from ..errors import ConfigError
from .config import EXPERIMENTS, load_config
from .runner import run
from .verify import MUTATIONS, verify_suite


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbm", description="BBM-Burgers spectral experiments and verification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="TOML config (or a run manifest.json)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for randomized initial fields")
        p.add_argument("--modes", type=int, help="number of sine modes K")
        p.add_argument("--dt", type=float, help="time step")
        p.add_argument("--plot", action="store_true", help="also write an SVG log-norm plot")
    v = sub.add_parser("verify", help="run the acceptance checklist")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--inject-bug", choices=sorted(MUTATIONS), help="run against a deliberately broken operator")
    v.add_argument("--json", help="write per-criterion results to this file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        results = verify_suite(args.level, args.inject_bug)
        if args.json:
            with open(args.json, "w", encoding="utf-8") as fh:
                json.dump([r.__dict__ for r in results], fh, indent=2, sort_keys=True, default=str)
        return 0 if all(r.passed for r in results) else 1
    try:
        cfg = load_config(args.config, args.command, out=args.out, seed=args.seed, modes=args.modes, dt=args.dt, plot=args.plot)
    except ConfigError as exc:
        print(json.dumps({"status": "usage-error", "error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return 2
    status = run(cfg)
    print(json.dumps({"status": "ok" if status == 0 else "failed", "output_dir": str(cfg.output_dir)}))
    return status


if __name__ == "__main__":
    sys.exit(main())
