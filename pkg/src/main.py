"""Main entry point: `python -m src.main {train-apis,run,report}`."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from config.settings import settings
from src.cli import METHODS, ConfigError, cmd_report, cmd_run, cmd_train_apis
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfcl-apis",
        description="Continual learning from a stream of query-only classification APIs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train-apis", help="train (or reuse) one teacher per task and seed")
    train.add_argument("config", type=Path, nargs="?", help="TOML experiment file (defaults if omitted)")
    train.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    run = sub.add_parser("run", help="run one method over the configured seeds")
    run.add_argument("config", type=Path, nargs="?", help="TOML experiment file (defaults if omitted)")
    run.add_argument("--method", choices=METHODS, default="dfcl")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--budget", help="per-task query budget, e.g. 12K")
    run.add_argument("--name", help="run directory name under the runs dir")
    run.add_argument("--resume", action="store_true", help="continue from the last finished task")

    report = sub.add_parser("report", help="tables and figures from finished runs")
    report.add_argument("runs", type=Path, nargs="*")
    report.add_argument("--out", type=Path, help="output directory (default: <runs dir>/report)")
    report.add_argument("--cka", type=Path, nargs=2, metavar=("RUN_A", "RUN_B"))
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.info(f"dfcl-apis {args.command} (data dir {settings.data_dir}, output dir {settings.output_dir}, device {settings.device})")
    try:
        if args.command == "train-apis":
            cmd_train_apis(args.config, args.overrides)
        elif args.command == "run":
            run_dir = cmd_run(args.config, args.method, args.overrides, args.budget, args.name, args.resume)
            logger.info(f"Results in {run_dir}")
        else:
            cmd_report(args.runs, args.out, tuple(args.cka) if args.cka else None)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_RUNTIME_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
