"""
Workflow induction: visual-change segmentation of an interaction trace,
segment annotation and grouping through the gateway, and empty-step filtering.
"""

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

try:
    from .batch_runner import run_ordered
    from .config import DEFAULT_EMPTY_STEP_PATTERNS
    from .exceptions import BackendError, DataValidationError, InductionError, ProtocolError
    from .models import Actor, Condition, EventKind, Segment, Workflow, WorkflowStep
    from .prompts import SEGMENT_ANNOTATE, SEGMENT_GROUP
except ImportError:
    from batch_runner import run_ordered
    from config import DEFAULT_EMPTY_STEP_PATTERNS
    from exceptions import BackendError, DataValidationError, InductionError, ProtocolError
    from models import Actor, Condition, EventKind, Segment, Workflow, WorkflowStep
    from prompts import SEGMENT_ANNOTATE, SEGMENT_GROUP

logger = logging.getLogger(__name__)

RECOVERED_TEXT_LIMIT = 600


@dataclass(frozen=True, eq=False)
class ScreenshotFrame:
    """Grayscale frame; pixels are stored row-major as a flat read-only array."""

    pixels: np.ndarray
    width: int
    height: int
    event_index: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DataValidationError(f"Frame at event {self.event_index} has non-positive dimensions")
        flat = np.asarray(self.pixels, dtype=np.float64).ravel()
        if flat.size != self.width * self.height:
            raise DataValidationError(
                f"Frame at event {self.event_index}: {flat.size} pixels for {self.width}x{self.height}"
            )
        flat.setflags(write=False)
        object.__setattr__(self, "pixels", flat)

    @classmethod
    def from_grid(cls, grid, event_index):
        arr = np.asarray(grid, dtype=np.float64)
        if arr.ndim != 2:
            raise DataValidationError("Frame grid must be two-dimensional")
        return cls(arr.ravel(), arr.shape[1], arr.shape[0], event_index)


@dataclass(frozen=True)
class InductionConfig:
    mse_threshold: float = 500.0
    empty_step_patterns: tuple = field(default_factory=lambda: tuple(DEFAULT_EMPTY_STEP_PATTERNS))

    def __post_init__(self):
        if self.mse_threshold < 0:
            raise DataValidationError("mse_threshold must be non-negative")

    @classmethod
    def from_config(cls, config):
        return cls(config.mse_threshold, tuple(config.empty_step_patterns))


def mse(a, b):
    """Mean squared intensity difference between two frames of equal size."""
    if (a.width, a.height) != (b.width, b.height):
        raise DataValidationError(
            f"Frame dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    diff = a.pixels - b.pixels
    return float(np.mean(diff * diff))


def segment_trace(events, frames, cfg):
    """Split a trace into contiguous segments at visual-change boundaries.

    A segment starts at the event of every frame whose MSE against the
    previous frame exceeds cfg.mse_threshold. A change of frame dimensions
    also counts as a boundary.

    Args:
        events: Trace (list of ActionEvent)
        frames: ScreenshotFrames sorted by event_index
        cfg: InductionConfig

    Returns:
        list: Segments partitioning [0, len(events) - 1]
    """
    if not events:
        raise DataValidationError("Cannot segment an empty trace")
    indices = [f.event_index for f in frames]
    if indices != sorted(indices):
        raise DataValidationError("Frames must be sorted by event_index")

    boundaries = set()
    for previous, current in zip(frames, frames[1:]):
        if (previous.width, previous.height) != (current.width, current.height):
            changed = True
        else:
            changed = mse(previous, current) > cfg.mse_threshold
        if changed and 0 < current.event_index < len(events):
            boundaries.add(current.event_index)

    starts = [0] + sorted(boundaries)
    ends = [s - 1 for s in starts[1:]] + [len(events) - 1]
    segments = [Segment(s, e) for s, e in zip(starts, ends)]
    logger.debug(f"Segmented {len(events)} events into {len(segments)} segments")
    return segments


def filter_empty_steps(w, cfg):
    """Drop steps whose text contains any empty-step pattern (case-insensitive)."""
    patterns = [p.lower() for p in cfg.empty_step_patterns]
    survivors = [s for s in w.steps if not any(p in s.text.lower() for p in patterns)]
    if len(survivors) != len(w.steps):
        logger.info(f"Filtered {len(w.steps) - len(survivors)} empty steps from {w.participant_id}")
    return w.with_steps(survivors)


def load_frames(session_dir, events):
    """Load grayscale frames for a session.

    Reads frames.jsonl (records with event_index, width, height, pixels) when
    present; otherwise decodes each event's screenshot_ref with OpenCV.
    Unreadable screenshots are skipped so the previous frame persists.
    """
    frames_path = os.path.join(session_dir, "frames.jsonl")
    frames = []
    if os.path.isfile(frames_path):
        with open(frames_path, "r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    frames.append(
                        ScreenshotFrame(record["pixels"], int(record["width"]), int(record["height"]), int(record["event_index"]))
                    )
                except (ValueError, KeyError) as e:
                    raise DataValidationError(f"{frames_path}:{line_number}: bad frame record ({e})") from e
        return sorted(frames, key=lambda f: f.event_index)

    import cv2

    for index, event in enumerate(events):
        if not event.screenshot_ref:
            continue
        path = os.path.join(session_dir, event.screenshot_ref)
        image = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
        if image is None:
            logger.warning(f"Could not decode screenshot {path}; keeping previous frame")
            continue
        frames.append(ScreenshotFrame.from_grid(image, index))
    return frames


def _segment_summary(segment, events):
    span_events = events[segment.start_event_index:segment.end_event_index + 1]
    counts = Counter(e.kind.value for e in span_events)
    typed = "".join(e.payload or "" for e in span_events if e.kind in (EventKind.KEY, EventKind.PASTE))
    screenshots = [e.screenshot_ref for e in span_events if e.screenshot_ref]
    start_ms = span_events[0].timestamp_ms
    end_ms = span_events[-1].timestamp_ms
    return {
        "span": f"events {segment.start_event_index}-{segment.end_event_index}, {start_ms}-{end_ms} ms",
        "event_counts": ", ".join(f"{k}={v}" for k, v in sorted(counts.items())),
        "recovered_text": typed[:RECOVERED_TEXT_LIMIT] or "(none)",
        "screenshots": ", ".join(screenshots) or "(none)",
    }


class SegmentAnnotator:
    """Annotates one segment at a time through the gateway."""

    def __init__(self, gateway, events):
        self.gateway = gateway
        self.events = events

    def annotate(self, index, segment):
        reply = self.gateway.judge(SEGMENT_ANNOTATE, **_segment_summary(segment, self.events))
        return reply.description.strip()


class IdentityGrouper:
    """One workflow step per segment."""

    def group(self, annotations):
        return [([i], text) for i, text in enumerate(annotations)]


class SegmentGrouper:
    """Merges consecutive annotated segments into workflow steps through the gateway."""

    def __init__(self, gateway):
        self.gateway = gateway

    def group(self, annotations):
        listing = "\n".join(f"{i}: {text}" for i, text in enumerate(annotations))
        reply = self.gateway.judge(SEGMENT_GROUP, segments=listing)
        groups = [(list(g.segments), g.text.strip()) for g in reply.steps]
        check_grouping(groups, len(annotations))
        return groups


def check_grouping(groups, segment_count):
    """Groups must be consecutive and cover every segment exactly once, in order."""
    flat = [i for members, _ in groups for i in members]
    if flat != list(range(segment_count)):
        raise ProtocolError(f"Grouping does not cover segments 0..{segment_count - 1} in order: {flat}")


def induce_workflow(
    segments,
    annotator,
    grouper,
    participant_id,
    task_id,
    condition=Condition.UNLABELED,
    cfg=None,
    max_concurrency=1,
    show_progress=False,
):
    """Annotate segments, group them into steps and filter empty steps.

    Args:
        segments: Segments of one trace
        annotator: Object with annotate(index, segment) -> text
        grouper: Object with group(annotations) -> [(segment indices, text)]
        participant_id: Owner of the workflow
        task_id: TaskId of the session
        condition: Study condition
        cfg: InductionConfig for empty-step filtering
        max_concurrency: Bound on concurrent annotation calls

    Returns:
        tuple: (filtered Workflow with actors unresolved, segments carrying
        their annotations)

    Raises:
        InductionError: Backend failure while annotating a segment
        ProtocolError: Invalid annotation or grouping reply
    """
    cfg = cfg or InductionConfig()
    if not segments:
        raise DataValidationError("No segments to induce a workflow from")

    def _annotate(index, segment):
        try:
            return annotator.annotate(index, segment)
        except ProtocolError:
            logger.error(f"Invalid annotation reply for segment {index} of {participant_id}")
            raise
        except BackendError as e:
            raise InductionError(index, e) from e

    annotations = run_ordered(
        _annotate, segments, max_concurrency, desc=f"Annotating {participant_id}", show_progress=show_progress
    )
    try:
        groups = grouper.group(annotations)
    except BackendError as e:
        raise InductionError(0, e) from e
    check_grouping(groups, len(segments))

    steps = [WorkflowStep(i, text, Actor.UNKNOWN, tuple(members)) for i, (members, text) in enumerate(groups)]
    workflow = Workflow(participant_id, task_id, condition, tuple(steps))
    workflow = filter_empty_steps(workflow, cfg)
    logger.info(f"Induced {workflow.n} steps from {len(segments)} segments for {participant_id}")
    annotated = [replace(s, annotation=text) for s, text in zip(segments, annotations)]
    return workflow, annotated
