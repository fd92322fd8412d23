"""Chance-corrected accuracy."""


def kappa(acc: float, n_classes: int) -> float:
    """(acc - p0) / (1 - p0) with chance level p0 = 1/C."""
    if n_classes < 2:
        raise ValueError(f"kappa needs at least 2 classes, got {n_classes}")
    if not 0.0 <= acc <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {acc}")
    chance = 1.0 / n_classes
    return (acc - chance) / (1.0 - chance)
