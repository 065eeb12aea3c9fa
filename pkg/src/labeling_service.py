"""
Process and output-use labeling of AI-assisted steps, and label distributions.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

try:
    from .batch_runner import run_ordered
    from .exceptions import BackendError, DataValidationError, ProtocolError, StepError
    from .models import Actor
    from .prompts import OUTPUT_USE_LABEL, PROCESS_LABEL
except ImportError:
    from batch_runner import run_ordered
    from exceptions import BackendError, DataValidationError, ProtocolError, StepError
    from models import Actor
    from prompts import OUTPUT_USE_LABEL, PROCESS_LABEL

logger = logging.getLogger(__name__)

NONE_TEXT = "(none)"
DENOMINATOR_MODES = ("labeled_interactions", "workflow_steps")


class ProcessType(str, Enum):
    PLANNING = "planning"
    EXECUTION = "execution"
    FEEDBACK = "feedback"
    CONTROL = "control"


class OutputUse(str, Enum):
    REUSE = "reuse"
    APPLY = "apply"
    PUSHBACK = "pushback"
    REJECT = "reject"


@dataclass(frozen=True)
class ProcessLabel:
    value: ProcessType
    justification: str


@dataclass(frozen=True)
class OutputUseLabel:
    value: OutputUse
    justification: str


@dataclass(frozen=True)
class ActionContext:
    previous_action: str
    current_action: str
    next_action: str


@dataclass(frozen=True)
class WorkflowContext:
    previous_step: str
    matched_step: str
    next_step: str


@dataclass(frozen=True)
class StepLabels:
    step_index: int
    text: str
    process: ProcessLabel
    output_use: Optional[OutputUseLabel]

    def to_dict(self):
        return {
            "text": self.text,
            "process": self.process.value.value,
            "process_justification": self.process.justification,
            "output_use": self.output_use.value.value if self.output_use else None,
            "output_use_justification": self.output_use.justification if self.output_use else None,
        }


@dataclass(frozen=True)
class LabelDistribution:
    counts: Dict[str, int]
    fractions: Dict[str, float]
    denominator_mode: str
    denominator: int
    note: str = ""

    def to_dict(self):
        return {
            "counts": dict(self.counts),
            "fractions": dict(self.fractions),
            "denominator_mode": self.denominator_mode,
            "denominator": self.denominator,
            "note": self.note,
        }


def _text(steps, index):
    return steps[index].text if 0 <= index < len(steps) else NONE_TEXT


def build_contexts(w, index, segments=None):
    """Action and workflow context around step index.

    Actions are the annotations of the segments just before, inside and just
    after the step when segments are available; otherwise the neighbouring
    step texts stand in for them.
    """
    steps = w.steps
    step = steps[index]
    workflow_context = WorkflowContext(_text(steps, index - 1), step.text, _text(steps, index + 1))

    if segments and step.segment_refs:
        def _annotation(i):
            if 0 <= i < len(segments) and segments[i].annotation:
                return segments[i].annotation
            return NONE_TEXT

        first, last = min(step.segment_refs), max(step.segment_refs)
        current = "; ".join(_annotation(i) for i in sorted(step.segment_refs))
        action_context = ActionContext(_annotation(first - 1), current, _annotation(last + 1))
    else:
        action_context = ActionContext(_text(steps, index - 1), step.text, _text(steps, index + 1))
    return action_context, workflow_context


def _require_ai_step(step):
    if step.actor is not Actor.AI_ASSISTED:
        raise DataValidationError(f"Step {step.index} is not AI-assisted; only AI steps are labeled")


def label_process(step, action_context, workflow_context, gateway):
    """Which cognitive process the AI-assisted step serves."""
    _require_ai_step(step)
    reply = gateway.judge(
        PROCESS_LABEL,
        previous_action=action_context.previous_action,
        current_action=action_context.current_action,
        next_action=action_context.next_action,
        previous_workflow_step=workflow_context.previous_step,
        matched_workflow_step=workflow_context.matched_step,
        next_workflow_step=workflow_context.next_step,
    )
    return ProcessLabel(ProcessType(reply.process_type), reply.justification)


def label_output_use(step, previous_human_step, next_steps, workflow_context, gateway, task_description=""):
    """How the output of the AI-assisted step is used by the following steps."""
    _require_ai_step(step)
    if not next_steps:
        raise DataValidationError(f"Step {step.index} has no following steps to judge output use from")
    reply = gateway.judge(
        OUTPUT_USE_LABEL,
        task_description=task_description or NONE_TEXT,
        previous_human_step=previous_human_step or NONE_TEXT,
        current_ai_assisted_step=step.text,
        previous_workflow_step=workflow_context.previous_step,
        matched_workflow_step=workflow_context.matched_step,
        next_workflow_step=workflow_context.next_step,
        next_steps_sequence="\n".join(f"{i + 1}. {t}" for i, t in enumerate(next_steps)),
    )
    return OutputUseLabel(OutputUse(reply.label), reply.justification)


def _previous_human_step(w, index):
    for step in reversed(w.steps[:index]):
        if step.actor is Actor.HUMAN_ONLY:
            return step.text
    return None


def label_workflow(w, gateway, task_description="", segments=None, next_window=5, max_concurrency=1, show_progress=False):
    """Label every AI-assisted step of a workflow.

    The last step of a workflow has no following steps, so its output use is
    left unlabeled.

    Returns:
        dict: step index -> StepLabels
    """

    def _label(_, step):
        try:
            action_context, workflow_context = build_contexts(w, step.index, segments)
            process = label_process(step, action_context, workflow_context, gateway)
            following = [s.text for s in w.steps[step.index + 1:step.index + 1 + next_window]]
            output_use = None
            if following:
                output_use = label_output_use(
                    step, _previous_human_step(w, step.index), following, workflow_context, gateway, task_description
                )
            else:
                logger.warning(f"{w.participant_id}: step {step.index} is last; output use not labeled")
            return StepLabels(step.index, step.text, process, output_use)
        except (BackendError, ProtocolError) as e:
            raise StepError(step.index, e, w.participant_id) from e

    labeled = run_ordered(_label, w.ai_steps(), max_concurrency, desc=f"Labeling {w.participant_id}", show_progress=show_progress)
    return {entry.step_index: entry for entry in labeled}


def label_distribution(labels, w, mode, vocabulary=None):
    """Counts and fractions of labels.

    Args:
        labels: Mapping step index -> ProcessLabel / OutputUseLabel (or enum values)
        w: Workflow the labels belong to
        mode: "labeled_interactions" (divide by label count) or
              "workflow_steps" (divide by the workflow's step count)
        vocabulary: Enum class of the labels; inferred from the labels when omitted

    Returns:
        LabelDistribution
    """
    if mode not in DENOMINATOR_MODES:
        raise DataValidationError(f"Unknown denominator mode {mode!r}")

    values = {}
    for index, label in labels.items():
        if not 0 <= index < w.n:
            raise DataValidationError(f"Label for step {index} outside workflow of {w.n} steps")
        values[index] = getattr(label, "value", label)

    if vocabulary is None:
        first = next(iter(values.values()), None)
        vocabulary = type(first) if isinstance(first, Enum) else ProcessType
    counts = {member.value: 0 for member in vocabulary}
    for index, value in values.items():
        try:
            counts[vocabulary(value).value] += 1
        except ValueError as e:
            raise DataValidationError(f"Unknown label {value!r} at step {index}") from e

    denominator = len(values) if mode == "labeled_interactions" else w.n
    if denominator == 0:
        fractions = {k: 0.0 for k in counts}
        return LabelDistribution(counts, fractions, mode, 0, "no labeled interactions")
    fractions = {k: c / denominator for k, c in counts.items()}
    note = "" if values else "no labeled interactions"
    return LabelDistribution(counts, fractions, mode, denominator, note)


def process_labels(ledger):
    return {i: entry.process for i, entry in ledger.items()}


def output_use_labels(ledger):
    return {i: entry.output_use for i, entry in ledger.items() if entry.output_use is not None}


def expansion_length_by_label(ledger, expansions):
    """Counterfactual lengths k grouped by process and by output-use label."""
    k_by_step = {e.source_step_index: e.k for e in expansions}
    result = {"process": {p.value: [] for p in ProcessType}, "output_use": {o.value: [] for o in OutputUse}}
    for index in sorted(ledger):
        if index not in k_by_step:
            continue
        entry = ledger[index]
        result["process"][entry.process.value.value].append(k_by_step[index])
        if entry.output_use is not None:
            result["output_use"][entry.output_use.value.value].append(k_by_step[index])
    return result


def ledger_to_dict(ledger):
    return {str(i): ledger[i].to_dict() for i in sorted(ledger)}


def ledger_from_dict(document):
    ledger = {}
    for key, entry in document.items():
        output_use = None
        if entry.get("output_use"):
            output_use = OutputUseLabel(OutputUse(entry["output_use"]), entry.get("output_use_justification") or "")
        ledger[int(key)] = StepLabels(
            int(key),
            entry["text"],
            ProcessLabel(ProcessType(entry["process"]), entry.get("process_justification") or ""),
            output_use,
        )
    return ledger
