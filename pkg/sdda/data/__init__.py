"""Trial sets: container I/O, CSV import, session splits and the synthetic generator."""
from sdda.data.container import read_container, write_container
from sdda.data.csv_import import import_csv
from sdda.data.splits import POLICIES, merge_sessions, split_sessions
from sdda.data.synthetic import bandpower_features, generate_synthetic, probe_accuracy, session_shift_pvalue
from sdda.data.trialset import TrialSet

__all__ = [
    "POLICIES",
    "TrialSet",
    "bandpower_features",
    "generate_synthetic",
    "import_csv",
    "merge_sessions",
    "probe_accuracy",
    "read_container",
    "session_shift_pvalue",
    "split_sessions",
    "write_container",
]
