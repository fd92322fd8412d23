"""
SDDA command line

Resolves settings (defaults < TOML file < flags), configures logging and
dispatches to one subcommand. Exit codes: 0 success, 1 package error,
2 usage error, 3 training diverged.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from sdda import __version__
from sdda.commands import COMMANDS
from sdda.commands.common import deep_merge
from sdda.config import load_settings
from sdda.exceptions import DivergenceError, SDDAError
from sdda.manifest import check_inputs, load_manifest

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdda",
        description="Siamese deep domain adaptation for cross-session EEG classification",
    )
    parser.add_argument("--version", action="version", version=f"sdda {__version__}")
    parser.add_argument("--config", type=Path, help="TOML settings file")
    parser.add_argument("--from-manifest", type=Path, help="replay the command recorded in a manifest")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging level")
    parser.add_argument("--dtype", choices=["float64", "float32"], help="numeric width for training")
    parser.add_argument("--n-jobs", type=int, help="worker processes for grid cells and repetitions")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )


def _overrides(args: argparse.Namespace) -> dict:
    top = {key: getattr(args, key) for key in ("log_level", "dtype", "n_jobs") if getattr(args, key) is not None}
    return deep_merge(top, args.overrides(args))


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        if args.from_manifest is not None:
            manifest = load_manifest(args.from_manifest)
            check_inputs(manifest)
            argv = manifest.argv
            args = parser.parse_args(argv)
            settings = load_settings(None, manifest.settings)
        elif args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        else:
            settings = load_settings(args.config, _overrides(args))
        configure_logging(settings.log_level)
        logger.debug(f"resolved settings: {settings.model_dump(mode='json')}")
        return args.handler(args, settings, argv)
    except DivergenceError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except SDDAError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
