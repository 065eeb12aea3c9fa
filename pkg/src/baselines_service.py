"""
Baseline reliance measures: AI interaction count, AI time fraction, AI code
fraction from attribution, and primary-tool detection.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

try:
    from .attribution_service import AttributionSettings, attribute_code
    from .exceptions import DataValidationError
    from .models import Actor
    from .tool_keywords import KeywordTable
except ImportError:
    from attribution_service import AttributionSettings, attribute_code
    from exceptions import DataValidationError
    from models import Actor
    from tool_keywords import KeywordTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineMeasures:
    ai_interaction_count: int
    ai_time_fraction: Optional[float]
    ai_code_fraction_strict: Optional[float]
    ai_code_fraction_soft: Optional[float]
    primary_tool: Optional[str]
    tool_mention_counts: Dict[str, int] = field(default_factory=dict)
    tlx_load: Optional[float] = None

    def __post_init__(self):
        for name in ("ai_time_fraction", "ai_code_fraction_strict", "ai_code_fraction_soft"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise DataValidationError(f"{name}={value} outside [0, 1]")
        strict, soft = self.ai_code_fraction_strict, self.ai_code_fraction_soft
        if strict is not None and soft is not None and soft < strict:
            raise DataValidationError(f"Soft AI code fraction {soft} below strict {strict}")

    def to_dict(self):
        return {
            "ai_interaction_count": self.ai_interaction_count,
            "ai_time_fraction": self.ai_time_fraction,
            "ai_code_fraction_strict": self.ai_code_fraction_strict,
            "ai_code_fraction_soft": self.ai_code_fraction_soft,
            "primary_tool": self.primary_tool,
            "tool_mention_counts": dict(self.tool_mention_counts),
            "tlx_load": self.tlx_load,
        }


def _require_resolved(w):
    unresolved = [s.index for s in w.steps if s.actor is Actor.UNKNOWN]
    if unresolved:
        raise DataValidationError(f"Steps {unresolved} have no actor; run AI-step identification first")


def count_ai_interactions(w):
    _require_resolved(w)
    return len(w.ai_steps())


def ai_time_fraction(w, trace, segments, idle_gap_seconds=120.0):
    """Share of active trace time spent in AI-assisted steps.

    Each gap between consecutive events belongs to the segment of its first
    event; gaps longer than idle_gap_seconds count as idle and are dropped
    from both numerator and denominator.

    Raises:
        DataValidationError: If no active time remains
    """
    _require_resolved(w)
    owner = [None] * len(trace)
    for segment_index, segment in enumerate(segments):
        for i in range(segment.start_event_index, min(segment.end_event_index, len(trace) - 1) + 1):
            owner[i] = segment_index

    ai_segments = set()
    for step in w.ai_steps():
        for ref in step.segment_refs:
            if not 0 <= ref < len(segments):
                raise DataValidationError(f"Step {step.index} references unknown segment {ref}")
            ai_segments.add(ref)

    idle_ms = idle_gap_seconds * 1000.0
    total = ai = 0
    for i in range(len(trace) - 1):
        gap = trace[i + 1].timestamp_ms - trace[i].timestamp_ms
        if gap > idle_ms:
            continue
        total += gap
        if owner[i] in ai_segments:
            ai += gap
    if total == 0:
        raise DataValidationError("Trace has zero active duration")
    return ai / total


def tool_mention_counts(w, table=None):
    table = table or KeywordTable.load()
    counts = {tool: 0 for tool in table.tools}
    for step in w.steps:
        for tool, hits in table.mentions(step.text).items():
            counts[tool] += hits
    return counts


def primary_tool(w, table=None):
    """Tool with the most keyword mentions; ties go to the earlier table entry."""
    table = table or KeywordTable.load()
    counts = tool_mention_counts(w, table)
    best, best_count = None, 0
    for tool in table.tools:
        if counts[tool] > best_count:
            best, best_count = tool, counts[tool]
    return best


def tool_mention_fractions(workflows, table=None):
    """Per tool, the fraction of workflows that mention it at least once."""
    table = table or KeywordTable.load()
    workflows = list(workflows)
    if not workflows:
        return {tool: 0.0 for tool in table.tools}
    mentioned = {tool: 0 for tool in table.tools}
    for w in workflows:
        for tool, count in tool_mention_counts(w, table).items():
            if count:
                mentioned[tool] += 1
    return {tool: mentioned[tool] / len(workflows) for tool in table.tools}


def compute_baselines(w, trace, segments, record=None, config=None, table=None):
    """All baseline measures for one participant.

    Returns:
        tuple: (BaselineMeasures, {"strict": ProvenanceMap, "soft": ProvenanceMap} or {})
    """
    table = table or KeywordTable.load(getattr(config, "keyword_table_path", None))
    idle_gap = config.idle_gap_seconds if config else 120.0

    time_fraction = None
    if trace and segments:
        try:
            time_fraction = ai_time_fraction(w, trace, segments, idle_gap)
        except DataValidationError as e:
            logger.warning(f"{w.participant_id}: AI time fraction unavailable ({e})")

    provenance = {}
    repo_path = record.repo_path if record else None
    if repo_path:
        settings = AttributionSettings.from_config(config) if config else AttributionSettings()
        for mode in ("strict", "soft"):
            provenance[mode] = attribute_code(repo_path, trace or [], w, mode, segments, settings)

    measures = BaselineMeasures(
        ai_interaction_count=count_ai_interactions(w),
        ai_time_fraction=time_fraction,
        ai_code_fraction_strict=provenance["strict"].ai_code_fraction if provenance else None,
        ai_code_fraction_soft=provenance["soft"].ai_code_fraction if provenance else None,
        primary_tool=primary_tool(w, table),
        tool_mention_counts=tool_mention_counts(w, table),
        tlx_load=record.survey.get("tlx_load") if record else None,
    )
    return measures, provenance
