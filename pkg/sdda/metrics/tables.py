"""Method x participant result tables, cells written as ``acc(kappa)``."""
from pathlib import Path
from typing import Iterable, Mapping

import pandas as pd


def format_cell(accuracy: float, kappa: float) -> str:
    return f"{100.0 * accuracy:.2f}({kappa:.3f})"


def results_table(rows: Iterable[Mapping[str, object]]) -> pd.DataFrame:
    """Rows need ``method``, ``participant``, ``accuracy`` and ``kappa``.

    Repeated (method, participant) rows are averaged. A ``Mean`` column
    averages each method over participants.
    """
    frame = pd.DataFrame(list(rows), columns=["method", "participant", "accuracy", "kappa"])
    if frame.empty:
        raise ValueError("no results to tabulate")
    cells = frame.groupby(["method", "participant"], sort=False)[["accuracy", "kappa"]].mean()
    means = cells.groupby(level="method", sort=False).mean()
    table = cells.apply(lambda r: format_cell(r["accuracy"], r["kappa"]), axis=1).unstack("participant")
    table["Mean"] = means.apply(lambda r: format_cell(r["accuracy"], r["kappa"]), axis=1)
    table.index.name = "method"
    table.columns.name = None
    return table


def write_table(table: pd.DataFrame, csv_path: Path | str, text_path: Path | str | None = None) -> None:
    table.to_csv(csv_path)
    if text_path is not None:
        Path(text_path).write_text(table.to_string() + "\n")
