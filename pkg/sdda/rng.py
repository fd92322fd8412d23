"""Named, splittable random streams.

All randomness in a run flows from one integer seed. Components ask for a
stream by label (``"init"``, ``"dropout/source"``, ``"batches/target"`` ...)
and get an independent ``numpy.random.Generator`` whose state depends only on
(seed, label), so adding a consumer never perturbs another one.
"""
import hashlib

import numpy as np


def _label_key(label: str) -> tuple[int, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class SeedBank:
    """Derives labeled generators from a root seed."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)

    def sequence(self, label: str) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=_label_key(label))

    def generator(self, label: str) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence(label)))

    def child(self, label: str) -> "SeedBank":
        """Sub-bank for a repetition or grid cell."""
        return SeedBank(int(self.sequence(label).generate_state(1, np.uint32)[0]))

    def __repr__(self) -> str:
        return f"SeedBank(seed={self.seed})"
