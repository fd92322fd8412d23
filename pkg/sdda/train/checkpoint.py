"""Checkpoint files: one JSON header line, then raw little-endian float64 buffers."""
import logging
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from sdda.autodiff.params import ParamStore
from sdda.exceptions import ContainerError, TruncatedPayloadError
from sdda.losses.center import CenterBank
from sdda.models.spec import ModelSpec

logger = logging.getLogger(__name__)

FORMAT = "sdda-checkpoint/1"


class ArrayEntry(BaseModel):
    name: str
    role: Literal["param", "buffer", "centers"]
    shape: list[int]
    group: Optional[str] = None


class CheckpointHeader(BaseModel):
    format: str = FORMAT
    spec: str
    center_rate: Optional[float] = None
    center_metric: Optional[str] = None
    arrays: list[ArrayEntry]


def save_checkpoint(path: Path | str, spec: ModelSpec, store: ParamStore, bank: Optional[CenterBank] = None) -> Path:
    path = Path(path)
    entries, buffers = [], []
    for name in store:
        entries.append(ArrayEntry(name=name, role="param", shape=list(store.values[name].shape),
                                  group=store.groups[name]))
        buffers.append(store.values[name])
    for name, value in store.buffers.items():
        entries.append(ArrayEntry(name=name, role="buffer", shape=list(value.shape)))
        buffers.append(value)
    if bank is not None:
        entries.append(ArrayEntry(name="centers", role="centers", shape=list(bank.centers.shape)))
        buffers.append(bank.centers)
    header = CheckpointHeader(
        spec=spec.to_text(),
        center_rate=None if bank is None else bank.rate,
        center_metric=None if bank is None else bank.metric,
        arrays=entries,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(header.model_dump_json().encode("utf-8") + b"\n")
        for value in buffers:
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
    logger.info(f"✅ checkpoint written to {path}")
    return path


def load_checkpoint(path: Path | str) -> tuple[ModelSpec, ParamStore, Optional[CenterBank]]:
    path = Path(path)
    blob = path.read_bytes()
    newline = blob.find(b"\n")
    if newline < 0:
        raise ContainerError(f"{path}: missing checkpoint header")
    try:
        header = CheckpointHeader.model_validate_json(blob[:newline])
    except ValidationError as e:
        raise ContainerError(f"{path}: unreadable checkpoint header: {e}") from e
    if header.format != FORMAT:
        raise ContainerError(f"{path}: unsupported checkpoint format {header.format!r}")

    spec = ModelSpec.from_text(header.spec)
    store, bank = ParamStore(np.float64), None
    offset = newline + 1
    for entry in header.arrays:
        size = int(np.prod(entry.shape)) * 8
        if offset + size > len(blob):
            raise TruncatedPayloadError(f"{path}: buffer {entry.name} runs past the end of the file")
        value = np.frombuffer(blob, dtype="<f8", count=size // 8, offset=offset).reshape(entry.shape).copy()
        offset += size
        if entry.role == "param":
            store.add(entry.name, value, entry.group or "feature")
        elif entry.role == "buffer":
            store.add_buffer(entry.name, value)
        else:
            bank = CenterBank(centers=value, rate=header.center_rate or 0.5,
                              metric=header.center_metric or "cosine")
    return spec, store, bank
