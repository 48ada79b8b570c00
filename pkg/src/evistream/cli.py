"""Command-line experiment runner.

`run` executes one strategy, `compare` runs every strategy on shared
seeds and merges the tables.  Exit codes: 0 success, 2 configuration
error, 3 runtime error; errors print a single diagnostic line to stderr.
"""

import argparse
import sys

from .config import ConfigError, Strategy, parse_config
from .generator import synthesize_scene
from .harness import rows_from_results, write_results, write_tagged_results
from .streaming import run_stream


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evistream",
        description="Streaming view-selection simulator over a deterministic "
        "voxel toy generator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run a single strategy and write per-chunk metrics"),
        ("compare", "run all strategies on shared seeds into one table"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="path to a key=value config file")
        cmd.add_argument(
            "--strategy",
            choices=[s.value for s in Strategy],
            help="override the configured strategy (run only)"
            if name == "run"
            else argparse.SUPPRESS,
        )
        cmd.add_argument(
            "--seeds",
            type=int,
            default=1,
            metavar="N",
            help="number of independent seed offsets to run (default 1)",
        )
        cmd.add_argument("--out", help="output path (default: config output_path)")
        cmd.add_argument(
            "--format", choices=["csv", "json"], help="output format override"
        )
        cmd.add_argument(
            "--no-timing",
            action="store_true",
            help="write wall_ms as 0 for byte-stable output",
        )
        cmd.add_argument(
            "overrides",
            nargs="*",
            metavar="key=value",
            help="configuration overrides applied after the config file",
        )
    return parser


def _load_config(args):
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    config = parse_config(text, args.overrides)
    if getattr(args, "strategy", None):
        config = config.with_strategy(args.strategy)
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    return config


def _run_one(config):
    scene = synthesize_scene(
        config.shape_kind, config.grid_size, config.stream.seeds.scene
    )
    return run_stream(config, scene)


def _cmd_run(args) -> int:
    config = _load_config(args)
    path = args.out or config.output_path
    fmt = args.format or config.format
    if args.seeds == 1:
        rows = rows_from_results(_run_one(config), args.no_timing)
        write_results(rows, config, path, fmt)
    else:
        tagged = []
        for offset in range(args.seeds):
            sub = config.with_seed_offset(offset)
            for row in rows_from_results(_run_one(sub), args.no_timing):
                tagged.append(((offset,), row))
        write_tagged_results(tagged, config, path, fmt, ("seed",))
    print(f"wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    config = _load_config(args)
    path = args.out or config.output_path
    fmt = args.format or config.format
    tagged = []
    for strategy in Strategy:
        base = config.with_strategy(strategy)
        for offset in range(args.seeds):
            sub = base.with_seed_offset(offset)
            for row in rows_from_results(_run_one(sub), args.no_timing):
                tagged.append(((strategy.value, offset), row))
    write_tagged_results(tagged, config, path, fmt, ("strategy", "seed"))
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_compare(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single-line CLI diagnostic
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
