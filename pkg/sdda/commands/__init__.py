"""One module per subcommand; each exposes ``register`` and ``run``."""
from sdda.commands import evaluate, export_embeddings, gridsearch, preprocess, report, synth, train

COMMANDS = (preprocess, train, gridsearch, evaluate, export_embeddings, synth, report)

__all__ = ["COMMANDS"]
