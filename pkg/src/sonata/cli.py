"""Command-line front end: run, validate and list experiment configs."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .harness import ConfigFileError, load_config, parse_config, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def preset_names() -> list[str]:
    root = resources.files("sonata").joinpath("presets")
    return sorted(p.name[: -len(".cfg")] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_preset_or_path(ref: str):
    path = Path(ref)
    if path.exists():
        return load_config(path)
    if ref in preset_names():
        text = resources.files("sonata").joinpath(f"presets/{ref}.cfg").read_text()
        return parse_config(text)
    raise ConfigFileError(f"{ref!r} is neither a config file nor a known preset")


def _apply_overrides(cfg, args):
    updates = {}
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.out is not None:
        updates["output"] = args.out
    return replace(cfg, **updates) if updates else cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sonata-sim",
        description="Distributed-optimization experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config or preset")
    p_run.add_argument("config", help="path to a config file, or a preset name")
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", type=str, default=None)
    p_run.add_argument("--quiet", action="store_true")
    sub.add_parser("presets", help="list shipped experiment presets")
    p_val = sub.add_parser("validate", help="parse and validate a config file")
    p_val.add_argument("config")
    args = parser.parse_args(argv)

    try:
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return EXIT_OK
        if args.command == "validate":
            cfg = load_preset_or_path(args.config)
            print(f"ok: {cfg.name} ({len(cfg.algorithms)} algorithms, {cfg.trials} trials)")
            return EXIT_OK
        cfg = _apply_overrides(load_preset_or_path(args.config), args)
    except ConfigFileError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(cfg, quiet=args.quiet)
        if not args.quiet:
            print(f"wrote {summary.out_dir}")
        return EXIT_OK
    except ConfigFileError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure -> distinct exit code
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
