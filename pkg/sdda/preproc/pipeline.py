"""Per-domain preprocessing as a small LangGraph pipeline.

Enabled stages run in the fixed order filter -> ema -> normalize -> align,
one graph node per stage. Each domain is fitted on its own trials.
"""
import logging
from typing import Optional, TypedDict

import numpy as np
from langgraph.graph import END, StateGraph
from pydantic import BaseModel

from sdda.config import PreprocSwitches
from sdda.data.trialset import TrialSet
from sdda.preproc.alignment import AlignmentState, apply_alignment, fit_alignment
from sdda.preproc.filters import design_fir, filter_trials
from sdda.preproc.standardize import Diagnostics, channel_normalize, ema_standardize

logger = logging.getLogger(__name__)

STAGE_ORDER = ("filter", "ema", "normalize", "align")


class PreprocState(TypedDict):
    trials: np.ndarray
    zero_channels: int
    alignment: Optional[AlignmentState]


class PreprocReport(BaseModel):
    """What preprocessing did to one domain."""

    stages: list[str]
    n_trials: int
    zero_channels: int = 0
    floored_eigenvalues: int = 0


def enabled_stages(switches: PreprocSwitches) -> list[str]:
    return [stage for stage in STAGE_ORDER if getattr(switches, stage)]


def build_pipeline(switches: PreprocSwitches, fs: float):
    """Compile the graph for one switch set and sample rate."""
    stages = enabled_stages(switches)

    def filter_node(state: PreprocState) -> dict:
        fir = design_fir(switches.filter_order, switches.low_hz, switches.high_hz, fs, switches.window)
        return {"trials": filter_trials(state["trials"], fir)}

    def ema_node(state: PreprocState) -> dict:
        return {"trials": ema_standardize(state["trials"], switches.ema_decay, switches.ema_eps)}

    def normalize_node(state: PreprocState) -> dict:
        diagnostics = Diagnostics()
        trials = channel_normalize(state["trials"], diagnostics)
        return {"trials": trials, "zero_channels": state["zero_channels"] + diagnostics.zero_channels}

    def align_node(state: PreprocState) -> dict:
        alignment = fit_alignment(state["trials"])
        return {"trials": apply_alignment(state["trials"], alignment), "alignment": alignment}

    def passthrough_node(state: PreprocState) -> dict:
        return {"trials": state["trials"]}

    nodes = {"filter": filter_node, "ema": ema_node, "normalize": normalize_node, "align": align_node}

    graph_builder = StateGraph(PreprocState)

    # Add nodes
    names = stages or ["passthrough"]
    for name in names:
        graph_builder.add_node(name, nodes.get(name, passthrough_node))

    # Add edges
    for current, following in zip(names, names[1:]):
        graph_builder.add_edge(current, following)
    graph_builder.add_edge(names[-1], END)

    graph_builder.set_entry_point(names[0])
    return graph_builder.compile()


def preprocess_domain(trial_set: TrialSet, switches: PreprocSwitches) -> tuple[TrialSet, PreprocReport]:
    """Run the enabled stages over one domain's trials."""
    pipeline = build_pipeline(switches, trial_set.fs)
    stages = enabled_stages(switches)
    logger.info(f"preprocessing {trial_set.n_trials} trials ({trial_set.participant or 'unnamed'}): "
                f"{' -> '.join(stages) or 'no stages'}")
    result = pipeline.invoke({
        "trials": np.asarray(trial_set.trials, dtype=float),
        "zero_channels": 0,
        "alignment": None,
    })
    alignment = result.get("alignment")
    report = PreprocReport(
        stages=stages,
        n_trials=trial_set.n_trials,
        zero_channels=result["zero_channels"],
        floored_eigenvalues=alignment.n_floored if alignment is not None else 0,
    )
    return trial_set.replace(trials=result["trials"]), report


def preprocess_pair(source: TrialSet, target: TrialSet,
                    switches: PreprocSwitches) -> tuple[TrialSet, TrialSet, dict[str, PreprocReport]]:
    """Preprocess source and target independently."""
    source_out, source_report = preprocess_domain(source, switches)
    target_out, target_report = preprocess_domain(target, switches)
    return source_out, target_out, {"source": source_report, "target": target_report}


def invariant_switches(switches: PreprocSwitches, use_invariants: bool) -> PreprocSwitches:
    """Switch set for a run; without domain invariants only filter and EMA remain."""
    if use_invariants:
        return switches
    return switches.model_copy(update={"normalize": False, "align": False})
