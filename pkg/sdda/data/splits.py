"""Session-based source/target splits of one participant's recordings."""
import logging

import numpy as np

from sdda.data.trialset import TrialSet
from sdda.exceptions import SessionSplitError

logger = logging.getLogger(__name__)

# policy -> (source sessions, target sessions)
POLICIES: dict[str, tuple[tuple[int, ...], tuple[int, ...]]] = {
    "IIA": ((1,), (2,)),
    "IIB": ((1, 2, 3), (4, 5)),
}


def split_sessions(trial_set: TrialSet, policy: str) -> tuple[TrialSet, TrialSet]:
    if policy not in POLICIES:
        raise SessionSplitError(f"unknown split policy {policy!r}; known: {sorted(POLICIES)}")
    if trial_set.sessions is None:
        raise SessionSplitError("trial set carries no session tags")
    source_tags, target_tags = POLICIES[policy]
    unknown = sorted(set(np.unique(trial_set.sessions).tolist()) - set(source_tags) - set(target_tags))
    if unknown:
        raise SessionSplitError(f"session tag(s) {unknown} are not part of policy {policy}", tags=unknown)
    source_mask = np.isin(trial_set.sessions, source_tags)
    source = trial_set.subset(np.flatnonzero(source_mask))
    target = trial_set.subset(np.flatnonzero(~source_mask))
    logger.info(f"{policy} split: {source.n_trials} source trials (sessions {list(source_tags)}), "
                f"{target.n_trials} target trials (sessions {list(target_tags)})")
    return source, target


def merge_sessions(*sets: TrialSet) -> TrialSet:
    """Concatenate session-tagged sets of one participant."""
    if not sets:
        raise SessionSplitError("nothing to merge")
    first = sets[0]
    if any(s.sessions is None for s in sets):
        raise SessionSplitError("every set needs session tags to be merged")
    labeled = all(s.labeled for s in sets)
    return TrialSet(
        trials=np.concatenate([s.trials for s in sets]),
        fs=first.fs,
        n_classes=first.n_classes,
        labels=np.concatenate([s.labels for s in sets]) if labeled else None,
        participant=first.participant,
        sessions=np.concatenate([s.sessions for s in sets]),
    )
