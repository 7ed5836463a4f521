"""
Command line entry point: ``pr-szz <command> [options]``.

Commands: ingest, match, trace, evaluate, fixture, run. A stage summary is printed to
stdout as JSON; logs go to stderr. Failures print one error record line on stderr and
exit with 1 (pipeline failure) or 2 (usage, configuration or input error).
"""

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import ProjectConfig, load_config
from .errors import EXIT_OK, EXIT_PIPELINE_FAILURE, ConfigError, PrSzzError
from .fixtures import build_fixture
from .pipeline import Pipeline
from .snapshot import canonical_json

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="project configuration (YAML)")
    common.add_argument("--repo", type=Path, help="git repository of the project")
    common.add_argument("--snapshot", type=Path, help="forge snapshot directory")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument(
        "--variant", action="append", help="variant to trace (repeatable; default: all configured)"
    )
    common.add_argument("--jobs", type=int, help="parallel workers per stage")
    common.add_argument("--live", action="store_true", default=None, help="fetch from the forges")
    common.add_argument("--replay-dir", type=Path, help="recorded forge responses")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="pr-szz", description="Pull-request-aware SZZ pipeline")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands.add_parser("ingest", parents=[common], help="fetch forge data into a snapshot")
    commands.add_parser("match", parents=[common], help="map bugs to fixing commits")
    commands.add_parser("trace", parents=[common], help="trace bug-inducing commits")
    evaluate = commands.add_parser("evaluate", parents=[common], help="score against ground truth")
    evaluate.add_argument("--truth", type=Path, help="ground truth JSON")
    run = commands.add_parser("run", parents=[common], help="all stages")
    run.add_argument("--truth", type=Path, help="ground truth JSON")
    fixture = commands.add_parser("fixture", parents=[common], help="generate a synthetic fixture")
    fixture.add_argument("script", type=Path, help="fixture script (YAML)")
    fixture.add_argument("target", type=Path, help="directory to create")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "repo_path": args.repo,
        "snapshot_dir": args.snapshot,
        "output_dir": args.out,
        "variants": args.variant,
        "jobs": args.jobs,
        "live": args.live,
        "replay_dir": args.replay_dir,
        "truth_path": getattr(args, "truth", None),
    }


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def execute(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == "fixture":
        result = build_fixture(args.script, args.target)
        return {
            "stage": "fixture",
            "root": str(result.root),
            "commits": len(result.labels),
            "config": str(result.config_path),
        }

    config: ProjectConfig = load_config(args.config, _overrides(args))
    pipeline = Pipeline(config)
    if args.command == "ingest":
        return pipeline.ingest()
    elif args.command == "match":
        return pipeline.match()
    elif args.command == "trace":
        return pipeline.trace(args.variant)
    elif args.command == "evaluate":
        return pipeline.evaluate(args.truth)
    elif args.command == "run":
        return {"stage": "run", "stages": pipeline.run(args.variant)}
    raise ConfigError(f"Unknown command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args)
        summary = execute(args)
    except PrSzzError as e:
        logger.debug(f"{type(e).__name__}: {e.message}")
        sys.stderr.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")
        return e.exit_code
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        record = {
            "status": "error",
            "error": type(e).__name__,
            "message": f"Unexpected failure: {e}",
            "exit_code": EXIT_PIPELINE_FAILURE,
            "timestamp": datetime.now().isoformat(),
        }
        sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
        return EXIT_PIPELINE_FAILURE
    sys.stdout.write(canonical_json(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
