"""
Experiment runner.

Usage:
    python -m src.cli.run --config src/config/config.yaml --out results/cell
    python -m src.cli.run gamma --config experiments/laminate.yaml --threads 4
    python -m src.cli.run --list-builtins
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import structlog

from .. import __version__
from ..config.loader import DEFAULT_CONFIG, load_config, validate_config
from ..exceptions import (
    ConfigError,
    HomogenizationError,
    InvalidArgumentError,
    NumericalFailureError,
    UnderResolvedError,
)
from ..utils.log import configure_logging
from .catalog import list_builtins
from .commands import COMMANDS, write_json
from .tracking import log_run

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Two-scale homogenization experiments")
    parser.add_argument("command", nargs="?", choices=sorted(COMMANDS), help="Override the config command")
    parser.add_argument("--config", default=str(DEFAULT_CONFIG), help="Config file path (YAML or JSON)")
    parser.add_argument("--out", default=None, help="Override output directory")
    parser.add_argument("--seed", type=int, default=None, help="Override global seed")
    parser.add_argument("--threads", type=int, default=None, help="Override worker count")
    parser.add_argument("--verbose", action="store_true", help="Debug logging and progress bars")
    parser.add_argument("--list-builtins", action="store_true", help="Print the built-in catalog as JSON")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.list_builtins:
        print(json.dumps(list_builtins(), indent=2))
        return EXIT_OK

    try:
        config = load_config(args.config)
        overrides = config.model_dump(mode="json")
        if args.command:
            overrides["command"] = args.command
        if args.out:
            overrides["output_dir"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads:
            overrides["threads"] = args.threads
        config = validate_config(overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    configure_logging("DEBUG" if args.verbose else config.logging.level)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(
        out_dir / "manifest.json",
        {"version": __version__, "seed": config.seed, "config": config.model_dump(mode="json")},
    )
    logger.info("run_started", command=config.command, out=str(out_dir), seed=config.seed)

    try:
        results = COMMANDS[config.command](config, out_dir, progress=args.verbose)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidArgumentError, UnderResolvedError) as e:
        # parameters that validate alone but not together, e.g. epsilon vs resolution
        print(f"invalid parameters: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailureError as e:
        logger.error("numerical_failure", error=str(e))
        write_json(out_dir / "results.json", {"command": config.command, "status": "numerical_failure", "error": str(e)})
        return EXIT_NUMERICAL
    except HomogenizationError as e:
        logger.error("run_failed", error=str(e))
        write_json(out_dir / "results.json", {"command": config.command, "status": "failed", "error": str(e)})
        return EXIT_FAILURE

    record = {"command": config.command, "status": "ok", **results}
    write_json(out_dir / "results.json", record)
    log_run(config, record, out_dir)
    logger.info("run_finished", command=config.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
