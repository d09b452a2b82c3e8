"""Command-line entry point: gen-world, run, eval, compare-policies.

Exit codes: 0 success, 1 runtime error, 2 configuration/validation error,
3 world-generation error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import (ConfigError, RunConfig, apply_overrides, load_config,
                     write_default_config)
from .episode import run_config
from .report import compare_policies, evaluate_paths
from .world import GenerationError, WorldSpec, generate_world
from .worldio import save_world

EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_GENERATION = 3


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "set", None):
        cfg = apply_overrides(cfg, args.set)
    return cfg


def _cmd_gen_world(args) -> int:
    spec = WorldSpec(width=args.width, height=args.height,
                     obstacle_density=args.density,
                     object_count=args.objects, seed=args.seed,
                     cell_size=args.cell_size)
    world = generate_world(spec)
    path = save_world(world, args.output)
    print(f"wrote {path} ({world.width}x{world.height}, "
          f"{len(world.objects)} objects, seed {world.rng_seed})")
    return 0


def _cmd_run(args) -> int:
    cfg = _load(args)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    artifacts = run_config(cfg)
    for art in artifacts:
        print(f"episode {art.log_path}")
    return 0


def _cmd_eval(args) -> int:
    paths: list[Path] = []
    for raw in args.logs:
        p = Path(raw)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.jsonl")))
        else:
            paths.append(p)
    if not paths:
        raise ConfigError("no logs to evaluate")
    written = evaluate_paths(paths, args.out)
    for name, path in written.items():
        print(f"{name}: {path}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _load(args)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    result = compare_policies(cfg, policies)
    for (a, b), counts in result.wins.items():
        line = ", ".join(f"{m}:{c}" for m, c in counts.items())
        print(f"{a} beats {b} on  {line}")
    print(f"comparison: {result.paths['comparison']}")
    return 0


def _cmd_init_config(args) -> int:
    path = write_default_config(args.output)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semgrid",
        description="deterministic episodic-object-memory exploration simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-world", help="generate a world file")
    p.add_argument("--width", type=int, default=30)
    p.add_argument("--height", type=int, default=30)
    p.add_argument("--density", type=float, default=0.15)
    p.add_argument("--objects", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cell-size", type=float, default=0.5)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_gen_world)

    p = sub.add_parser("run", help="run seeded episodes")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config field, e.g. exploration.alpha=0.5")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="recompute metrics from episode logs")
    p.add_argument("logs", nargs="+", help="log files or directories")
    p.add_argument("--out", default="reports")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare-policies", help="matched-seed policy comparison")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--policies", default="disagreement,frontier,random")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("init-config", help="write the default config file")
    p.add_argument("-o", "--output", default="semgrid.yaml")
    p.set_defaults(func=_cmd_init_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GenerationError as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
