"""sdda export-embeddings: feature-extractor outputs of both domains as CSV rows."""
import argparse
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from sdda.commands.common import add_input_arguments, load_domain, new_manifest, prepare, settings_for_checkpoint
from sdda.config import RunSettings
from sdda.models.network import Network
from sdda.train.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("export-embeddings", help="write embeddings with label and domain columns")
    parser.add_argument("checkpoint", type=Path, help="model.ckpt written by `sdda train`")
    parser.add_argument("source", type=Path, help="source domain")
    parser.add_argument("target", type=Path, help="target domain")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--preprocessed", action="store_true", help="inputs already went through `sdda preprocess`")
    add_input_arguments(parser)
    parser.set_defaults(handler=run, overrides=lambda args: {})


def embedding_frame(embeddings: np.ndarray, labels: np.ndarray | None, domain: str) -> pd.DataFrame:
    frame = pd.DataFrame(embeddings, columns=[f"h{i}" for i in range(embeddings.shape[1])])
    frame.insert(0, "label", pd.array(labels if labels is not None else [None] * len(frame), dtype="Int64"))
    frame.insert(0, "domain", domain)
    return frame


def run(args: argparse.Namespace, settings: RunSettings, argv: list[str]) -> int:
    spec, store, _ = load_checkpoint(args.checkpoint)
    settings, _ = settings_for_checkpoint(args.checkpoint, settings)
    network = Network(spec, store)

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = new_manifest("export-embeddings", argv, settings)
    manifest.add_input(args.checkpoint)
    frames = []
    for domain, path in (("source", args.source), ("target", args.target)):
        if path.is_file():
            manifest.add_input(path)
        trial_set, _ = prepare(load_domain(path, args.fs, args.classes), settings, args.preprocessed)
        embeddings = network.embed(trial_set.trials.astype(store.dtype))
        frames.append(embedding_frame(embeddings, trial_set.labels, domain))

    path = out / "embeddings.csv"
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
    manifest.add_output("embeddings", path)
    manifest.notes["embedding_width"] = spec.embedding_width
    manifest.write(out)
    print(f"✅ wrote {sum(len(f) for f in frames)} x {spec.embedding_width} embeddings to {path}")
    return 0
