"""sdda report: method x participant table from eval.json files."""
import argparse
import json
import logging
from pathlib import Path

from sdda.commands.common import new_manifest
from sdda.config import RunSettings
from sdda.exceptions import ConfigError
from sdda.metrics.tables import results_table, write_table

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("report", help="tabulate acc(kappa) per method and participant")
    parser.add_argument("evals", nargs="+", type=Path, help="eval.json files or the directories holding them")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--domain", default="target", help="which evaluated domain to tabulate")
    parser.set_defaults(handler=run, overrides=lambda args: {})


def collect_rows(paths: list[Path], domain: str) -> list[dict]:
    rows = []
    for path in paths:
        path = path / "eval.json" if path.is_dir() else path
        if not path.is_file():
            raise ConfigError(f"evaluation file not found: {path}")
        for row in json.loads(path.read_text()):
            if row["domain"] != domain:
                continue
            rows.append({"method": row["method"], "participant": row["participant"] or "-",
                         "accuracy": row["report"]["accuracy"], "kappa": row["report"]["kappa"]})
    if not rows:
        raise ConfigError(f"no {domain!r} evaluations among {len(paths)} input(s)")
    return rows


def run(args: argparse.Namespace, settings: RunSettings, argv: list[str]) -> int:
    rows = collect_rows(args.evals, args.domain)
    table = results_table(rows)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = new_manifest("report", argv, settings)
    for path in args.evals:
        path = path / "eval.json" if path.is_dir() else path
        manifest.add_input(path)
    write_table(table, out / "table.csv", out / "table.txt")
    manifest.add_output("table_csv", out / "table.csv")
    manifest.add_output("table_txt", out / "table.txt")
    manifest.write(out)
    print(table.to_string())
    return 0
