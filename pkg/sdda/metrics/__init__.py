"""Accuracy, kappa and report tables."""
from sdda.metrics.evaluate import EvalReport, SummaryReport, evaluate, predict, report_from_predictions, summarize
from sdda.metrics.kappa import kappa
from sdda.metrics.tables import format_cell, results_table, write_table

__all__ = [
    "EvalReport",
    "SummaryReport",
    "evaluate",
    "format_cell",
    "kappa",
    "predict",
    "report_from_predictions",
    "results_table",
    "summarize",
    "write_table",
]
