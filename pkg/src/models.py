"""
Domain types shared by every stage of the toolkit, with their invariant
checks and the canonical workflow encoding.

All types are frozen dataclasses; collections are stored as tuples so values
can be shared between worker threads.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

try:
    from .exceptions import DataValidationError
except ImportError:
    from exceptions import DataValidationError

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    CLICK = "click"
    KEY = "key"
    SCROLL = "scroll"
    PASTE = "paste"
    IDLE = "idle"


class Actor(str, Enum):
    HUMAN_ONLY = "human_only"
    AI_ASSISTED = "ai_assisted"
    UNKNOWN = "unknown"


class TaskId(str, Enum):
    TIMER = "timer"
    RECIPES = "recipes"
    VISION_BOARD = "vision_board"
    PLANNER = "planner"


class Condition(str, Enum):
    SHORT = "short"
    LONG = "long"
    UNLABELED = "unlabeled"


SURVEY_SCALES = {
    "tlx_load": (1, 7),
    "trust": (1, 5),
    "ownership": (1, 5),
    "cognitive_split": (1, 5),
}


@dataclass(frozen=True)
class ActionEvent:
    timestamp_ms: int
    kind: EventKind
    payload: Optional[str] = None
    screenshot_ref: Optional[str] = None

    def to_dict(self):
        return {
            "timestamp_ms": self.timestamp_ms,
            "kind": self.kind.value,
            "payload": self.payload,
            "screenshot_ref": self.screenshot_ref,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            timestamp_ms=int(data["timestamp_ms"]),
            kind=EventKind(data["kind"]),
            payload=data.get("payload"),
            screenshot_ref=data.get("screenshot_ref"),
        )


@dataclass(frozen=True)
class Segment:
    start_event_index: int
    end_event_index: int
    annotation: Optional[str] = None

    def to_dict(self):
        return {
            "start_event_index": self.start_event_index,
            "end_event_index": self.end_event_index,
            "annotation": self.annotation,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["start_event_index"]), int(data["end_event_index"]), data.get("annotation"))


@dataclass(frozen=True)
class WorkflowStep:
    index: int
    text: str
    actor: Actor = Actor.UNKNOWN
    segment_refs: Tuple[int, ...] = ()

    def to_dict(self):
        return {
            "index": self.index,
            "text": self.text,
            "actor": self.actor.value,
            "segment_refs": list(self.segment_refs),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            index=int(data["index"]),
            text=data["text"],
            actor=Actor(data.get("actor", Actor.UNKNOWN.value)),
            segment_refs=tuple(int(i) for i in data.get("segment_refs", ())),
        )


@dataclass(frozen=True)
class Workflow:
    participant_id: str
    task_id: TaskId
    condition: Condition
    steps: Tuple[WorkflowStep, ...]

    @property
    def n(self):
        return len(self.steps)

    def with_steps(self, steps):
        """Copy of this workflow with new steps, re-indexed densely."""
        reindexed = tuple(
            WorkflowStep(i, s.text, s.actor, s.segment_refs) for i, s in enumerate(steps)
        )
        return Workflow(self.participant_id, self.task_id, self.condition, reindexed)

    def ai_steps(self):
        return [s for s in self.steps if s.actor is Actor.AI_ASSISTED]

    def to_dict(self):
        return {
            "participant_id": self.participant_id,
            "task_id": self.task_id.value,
            "condition": self.condition.value,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            participant_id=data["participant_id"],
            task_id=TaskId(data["task_id"]),
            condition=Condition(data.get("condition", Condition.UNLABELED.value)),
            steps=tuple(WorkflowStep.from_dict(s) for s in data.get("steps", ())),
        )


@dataclass(frozen=True)
class CounterfactualExpansion:
    source_step_index: int
    replacement_steps: Tuple[str, ...]

    @property
    def k(self):
        return len(self.replacement_steps)

    def to_dict(self):
        return {"source_step_index": self.source_step_index, "replacement_steps": list(self.replacement_steps)}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["source_step_index"]), tuple(data["replacement_steps"]))


@dataclass(frozen=True)
class CounterfactualWorkflow:
    base: Workflow
    expansions: Tuple[CounterfactualExpansion, ...]

    def __post_init__(self):
        validate_workflow(self.base).raise_for_violations()
        sources = [e.source_step_index for e in self.expansions]
        ai_indices = [s.index for s in self.base.ai_steps()]
        if sources != ai_indices:
            raise DataValidationError(
                f"Counterfactual of {self.base.participant_id} expands steps {sources}, "
                f"expected one expansion per AI-assisted step {ai_indices} in order"
            )
        for e in self.expansions:
            if e.k < 1 or any(not text.strip() for text in e.replacement_steps):
                raise DataValidationError(f"Expansion of step {e.source_step_index} needs non-empty replacement steps")

    @property
    def m(self):
        return self.base.n - len(self.expansions) + sum(e.k for e in self.expansions)

    def steps(self):
        """Materialized human-only step texts of W'."""
        by_index = {e.source_step_index: e for e in self.expansions}
        texts = []
        for step in self.base.steps:
            if step.index in by_index:
                texts.extend(by_index[step.index].replacement_steps)
            else:
                texts.append(step.text)
        return texts


@dataclass(frozen=True)
class ParticipantRecord:
    workflow: Optional[Workflow]
    participant_id: str
    task_id: TaskId
    condition: Condition
    survey: Dict[str, float] = field(default_factory=dict)
    recall_answers: Tuple[Tuple[str, str], ...] = ()
    repo_path: Optional[str] = None
    task_description: Optional[str] = None


@dataclass(frozen=True)
class Violation:
    message: str
    step_index: Optional[int] = None

    def __str__(self):
        where = f"step {self.step_index}: " if self.step_index is not None else ""
        return f"{where}{self.message}"


@dataclass(frozen=True)
class ValidationResult:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self):
        return not self.violations

    def raise_for_violations(self, what="workflow"):
        if self.violations:
            details = "; ".join(str(v) for v in self.violations)
            raise DataValidationError(f"Invalid {what}: {details}")


def validate_workflow(w):
    """Check every workflow invariant and return all violations found.

    Args:
        w: Workflow to check

    Returns:
        ValidationResult: ok when no invariant is violated
    """
    violations = []
    if not w.participant_id:
        violations.append(Violation("empty participant_id"))
    if not w.steps:
        violations.append(Violation("workflow has no steps"))

    indices = [s.index for s in w.steps]
    if indices != list(range(len(w.steps))):
        violations.append(Violation(f"non-dense indices {indices}"))

    for step in w.steps:
        if not step.text or not step.text.strip():
            violations.append(Violation("empty step text", step.index))
        if any(ref < 0 for ref in step.segment_refs):
            violations.append(Violation("negative segment reference", step.index))
    return ValidationResult(tuple(violations))


def validate_trace(events):
    """Check trace invariants: non-negative, non-decreasing timestamps; paste payloads."""
    violations = []
    previous = None
    for i, event in enumerate(events):
        if event.timestamp_ms < 0:
            violations.append(Violation(f"event {i}: negative timestamp"))
        if previous is not None and event.timestamp_ms < previous:
            violations.append(Violation(f"event {i}: timestamp decreases"))
        if event.kind is EventKind.PASTE and not event.payload:
            violations.append(Violation(f"event {i}: paste without payload"))
        previous = event.timestamp_ms
    return ValidationResult(tuple(violations))


def _canonical_bytes(document):
    text = json.dumps(document, sort_keys=True, ensure_ascii=False, indent=2)
    return (text + "\n").encode("utf-8")


def canonical_serialize(w):
    """Encode a valid workflow as canonical bytes.

    Raises:
        DataValidationError: If the workflow is invalid
    """
    validate_workflow(w).raise_for_violations()
    return _canonical_bytes(w.to_dict())


def canonical_parse(data):
    """Decode canonical workflow bytes; inverse of canonical_serialize."""
    try:
        document = json.loads(data.decode("utf-8") if isinstance(data, bytes) else data)
        workflow = Workflow.from_dict(document)
    except (ValueError, KeyError, TypeError) as e:
        raise DataValidationError(f"Malformed workflow document: {e}") from e
    validate_workflow(workflow).raise_for_violations()
    return workflow


def dump_document(document):
    """Canonical bytes for any JSON-compatible document (reports, ledgers)."""
    return _canonical_bytes(document)


def read_trace(path):
    """Read a line-delimited trace file into ActionEvents."""
    events = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                events.append(ActionEvent.from_dict(json.loads(line)))
            except (ValueError, KeyError) as e:
                raise DataValidationError(f"{path}:{line_number}: bad trace record ({e})") from e
    validate_trace(events).raise_for_violations("trace")
    logger.debug(f"Read {len(events)} events from {path}")
    return events


def write_trace(events, path):
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")


def _survey_scales(raw):
    survey = {}
    for name, value in raw.items():
        if value is None:
            continue
        if name in SURVEY_SCALES:
            low, high = SURVEY_SCALES[name]
            if not low <= float(value) <= high:
                raise DataValidationError(f"Survey scale {name}={value} outside [{low}, {high}]")
        survey[name] = float(value)
    return survey


def load_participant(session_dir):
    """Load participant.json (and workflow.json if present) from a session directory.

    Args:
        session_dir: Session directory path

    Returns:
        ParticipantRecord: the participant record with validated survey scales
    """
    path = os.path.join(session_dir, "participant.json")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError as e:
        raise DataValidationError(f"Missing participant.json in {session_dir}") from e
    except json.JSONDecodeError as e:
        raise DataValidationError(f"Invalid participant.json in {session_dir}: {e}") from e

    try:
        survey = _survey_scales(data.get("survey") or {})
        participant_id = data["participant_id"]
        task_id = TaskId(data["task_id"])
        condition = Condition(data.get("condition") or Condition.UNLABELED.value)
        recall_answers = tuple((a["question_id"], a["answer"]) for a in data.get("recall_answers", ()))
    except (KeyError, ValueError, TypeError, AttributeError) as e:
        raise DataValidationError(f"Invalid participant.json in {session_dir}: {e!r}") from e

    workflow = None
    workflow_path = os.path.join(session_dir, "workflow.json")
    if os.path.isfile(workflow_path):
        with open(workflow_path, "rb") as handle:
            workflow = canonical_parse(handle.read())

    repo_path = os.path.join(session_dir, "repo")
    return ParticipantRecord(
        workflow=workflow,
        participant_id=participant_id,
        task_id=task_id,
        condition=condition,
        survey=survey,
        recall_answers=recall_answers,
        repo_path=repo_path if os.path.isdir(repo_path) else None,
        task_description=data.get("task_description"),
    )
