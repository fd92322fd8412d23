"""Binary trial container.

Layout, little-endian throughout::

    magic "TRL1" | version u16 | flags u16 | n u32 | E u32 | T u32 | fs f32 | C u16 | reserved u16
    labels i16 x n                      (flags bit 0)
    payload f32 x n*E*T                 trial-major, then channel-major
    u32 length + UTF-8 JSON provenance  (flags bit 1)
"""
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from sdda.data.trialset import TrialSet
from sdda.exceptions import (
    BadMagicError,
    ContainerError,
    LabelRangeError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

logger = logging.getLogger(__name__)

MAGIC = b"TRL1"
VERSION = 1
FLAG_LABELS = 0x1
FLAG_PROVENANCE = 0x2

HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u2"),
    ("flags", "<u2"),
    ("n", "<u4"),
    ("E", "<u4"),
    ("T", "<u4"),
    ("fs", "<f4"),
    ("C", "<u2"),
    ("reserved", "<u2"),
])


class Provenance(BaseModel):
    participant: str = ""
    sessions: list[int] = []


def encode(trial_set: TrialSet) -> bytes:
    n, e, t = trial_set.trials.shape
    flags = FLAG_LABELS if trial_set.labeled else 0
    provenance = None
    if trial_set.participant or trial_set.sessions is not None:
        flags |= FLAG_PROVENANCE
        provenance = Provenance(
            participant=trial_set.participant,
            sessions=[] if trial_set.sessions is None else [int(s) for s in trial_set.sessions],
        )
    header = np.zeros((), dtype=HEADER)
    header["magic"] = MAGIC
    header["version"] = VERSION
    header["flags"] = flags
    header["n"], header["E"], header["T"] = n, e, t
    header["fs"] = trial_set.fs
    header["C"] = trial_set.n_classes
    parts = [header.tobytes()]
    if trial_set.labeled:
        parts.append(trial_set.labels.astype("<i2").tobytes())
    parts.append(np.ascontiguousarray(trial_set.trials, dtype="<f4").tobytes())
    if provenance is not None:
        text = provenance.model_dump_json().encode("utf-8")
        parts.append(np.uint32(len(text)).astype("<u4").tobytes() + text)
    return b"".join(parts)


def decode(blob: bytes, source: str = "<bytes>") -> TrialSet:
    if len(blob) < len(MAGIC) or blob[:len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{source}: not a trial container (expected magic {MAGIC!r})")
    if len(blob) < HEADER.itemsize:
        raise TruncatedPayloadError(f"{source}: header needs {HEADER.itemsize} bytes, file has {len(blob)}")
    header = np.frombuffer(blob, dtype=HEADER, count=1)[0]
    if int(header["version"]) != VERSION:
        raise UnsupportedVersionError(f"{source}: container version {int(header['version'])}, expected {VERSION}")
    flags = int(header["flags"])
    n, e, t = int(header["n"]), int(header["E"]), int(header["T"])
    n_classes = int(header["C"])
    offset = HEADER.itemsize

    def take(nbytes: int, what: str) -> bytes:
        nonlocal offset
        if offset + nbytes > len(blob):
            raise TruncatedPayloadError(
                f"{source}: {what} needs {nbytes} bytes at offset {offset}, only {len(blob) - offset} remain"
            )
        chunk = blob[offset:offset + nbytes]
        offset += nbytes
        return chunk

    labels = None
    if flags & FLAG_LABELS:
        labels = np.frombuffer(take(2 * n, "labels"), dtype="<i2").astype(np.int64)
        bad = (labels < 0) | (labels >= n_classes)
        if bad.any():
            raise LabelRangeError(f"{source}: label {int(labels[bad][0])} outside [0, {n_classes})")
    trials = np.frombuffer(take(4 * n * e * t, "payload"), dtype="<f4").reshape(n, e, t).astype(np.float32)
    provenance = Provenance()
    if flags & FLAG_PROVENANCE:
        length = int(np.frombuffer(take(4, "provenance length"), dtype="<u4")[0])
        try:
            provenance = Provenance.model_validate_json(take(length, "provenance"))
        except ValidationError as e:
            raise ContainerError(f"{source}: unreadable provenance block: {e}") from e
    return TrialSet(
        trials=trials,
        fs=float(header["fs"]),
        n_classes=n_classes,
        labels=labels,
        participant=provenance.participant,
        sessions=np.asarray(provenance.sessions) if provenance.sessions else None,
    )


def write_container(trial_set: TrialSet, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(trial_set))
    logger.info(f"✅ wrote {trial_set.n_trials} trials to {path}")
    return path


def read_container(path: Path | str) -> TrialSet:
    path = Path(path)
    trial_set = decode(path.read_bytes(), source=str(path))
    logger.debug(f"read {trial_set.n_trials}x{trial_set.n_channels}x{trial_set.n_samples} trials from {path}")
    return trial_set
