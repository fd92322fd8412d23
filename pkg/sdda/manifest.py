"""Run manifests.

Every command writes ``manifest.json`` next to its outputs: the argv it was
called with, the fully resolved settings, digests of every input file and an
index of what it wrote. ``python -m sdda --from-manifest`` replays one.
"""
import hashlib
import logging
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError

from sdda import __version__
from sdda.exceptions import ConfigError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class RunManifest(BaseModel):
    command: str
    argv: list[str]
    settings: dict[str, Any]
    seed: int
    code_version: str = __version__
    inputs: dict[str, str] = Field(default_factory=dict, description="path -> sha256")
    outputs: dict[str, str] = Field(default_factory=dict, description="role -> path")
    notes: dict[str, Any] = Field(default_factory=dict)

    def add_input(self, path: Path | str) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, role: str, path: Path | str) -> None:
        self.outputs[role] = str(path)

    def write(self, directory: Path | str) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2))
        logger.info(f"✅ manifest written to {path}")
        return path


def file_digest(path: Path | str) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_manifest(path: Path | str) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        return RunManifest.model_validate_json(path.read_text())
    except ValidationError as e:
        raise ConfigError(f"unreadable manifest {path}: {e}") from e


def check_inputs(manifest: RunManifest) -> list[str]:
    """Inputs whose content no longer matches the recorded digest."""
    changed = []
    for name, digest in manifest.inputs.items():
        if not Path(name).is_file() or file_digest(name) != digest:
            changed.append(name)
            logger.warning(f"⚠️ input {name} changed since the manifest was written")
    return changed
