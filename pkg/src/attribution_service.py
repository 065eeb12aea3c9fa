"""
Rule-based code attribution: labels every line of a participant's final
repository human, tool, unknown or excluded from trace evidence.
"""

import fnmatch
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

try:
    from .batch_runner import run_ordered
    from .config import DEFAULT_EXCLUDE_GLOBS
    from .exceptions import DataValidationError
    from .models import Actor, EventKind
except ImportError:
    from batch_runner import run_ordered
    from config import DEFAULT_EXCLUDE_GLOBS
    from exceptions import DataValidationError
    from models import Actor, EventKind

logger = logging.getLogger(__name__)

MODES = ("strict", "soft")

# AI-assisted steps that apply generated edits to files.
APPLY_CUES = re.compile(r"\b(accept\w*|appl(?:y|ied|ies)|insert\w*|keep changes|editing generation)\b", re.IGNORECASE)
FILE_MENTION = re.compile(r"[\w./-]+\.[A-Za-z0-9]{1,6}\b")


class LineLabel(str, Enum):
    HUMAN = "human"
    TOOL = "tool"
    UNKNOWN = "unknown"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class AttributionSettings:
    exclude_globs: Tuple[str, ...] = tuple(DEFAULT_EXCLUDE_GLOBS)
    paste_heavy_ratio: float = 0.8
    min_fragment_chars: int = 4
    max_concurrency: int = 1

    @classmethod
    def from_config(cls, config):
        return cls(
            tuple(config.attribution_exclude_globs),
            config.paste_heavy_ratio,
            config.min_fragment_chars,
            config.max_concurrency,
        )


@dataclass(frozen=True)
class FileProvenance:
    path: str
    labels: Tuple[LineLabel, ...]
    evidence: Dict[str, int] = field(default_factory=dict)

    def counts(self):
        counts = Counter(label.value for label in self.labels)
        return {label.value: counts.get(label.value, 0) for label in LineLabel}


@dataclass(frozen=True)
class ProvenanceMap:
    mode: str
    files: Tuple[FileProvenance, ...]
    excluded_files: Tuple[str, ...] = ()

    def counts(self):
        totals = Counter()
        for f in self.files:
            totals.update(f.counts())
        return {label.value: totals.get(label.value, 0) for label in LineLabel}

    @property
    def attributable_lines(self):
        counts = self.counts()
        return counts["human"] + counts["tool"] + counts["unknown"]

    @property
    def coverage(self):
        counts = self.counts()
        total = self.attributable_lines
        return (counts["human"] + counts["tool"]) / total if total else 0.0

    @property
    def ai_code_fraction(self):
        total = self.attributable_lines
        return self.counts()["tool"] / total if total else 0.0

    def tool_lines(self):
        return {
            (f.path, i) for f in self.files for i, label in enumerate(f.labels) if label is LineLabel.TOOL
        }

    def summary(self):
        return {
            "mode": self.mode,
            "counts": self.counts(),
            "coverage": self.coverage,
            "ai_code_fraction": self.ai_code_fraction,
            "files": len(self.files),
            "excluded_files": len(self.excluded_files),
        }

    def to_dict(self):
        return {
            "mode": self.mode,
            "summary": self.summary(),
            "files": {
                f.path: {"labels": [label.value for label in f.labels], "evidence": dict(sorted(f.evidence.items()))}
                for f in self.files
            },
            "excluded_files": list(self.excluded_files),
        }


def normalize_line(text):
    return " ".join(text.split())


@dataclass
class TraceEvidence:
    """Normalized text corpora recovered from the trace."""

    typed: str = ""
    paste_ai_episode: str = ""
    paste_heavy: str = ""
    paste_any: str = ""
    ai_apply_files: Tuple[str, ...] = ()


def _corpus(fragments, min_chars):
    lines = []
    for fragment in fragments:
        for line in fragment.splitlines():
            norm = normalize_line(line)
            if len(norm) >= min_chars:
                lines.append(norm)
    return "\n".join(lines)


def _episode_of_events(segments, event_count):
    owner = [None] * event_count
    for segment_index, segment in enumerate(segments or ()):
        for i in range(segment.start_event_index, min(segment.end_event_index, event_count - 1) + 1):
            owner[i] = segment_index
    return owner


def collect_evidence(trace, workflow, segments=None, settings=None):
    """Recover typed fragments, paste payloads and AI-apply file mentions.

    Typed fragments are runs of consecutive key events. A paste is strong
    tool evidence when it happens in a segment of an AI-assisted step or in a
    paste-heavy segment (paste characters / inserted characters >= ratio).
    """
    settings = settings or AttributionSettings()
    owner = _episode_of_events(segments, len(trace))

    ai_segments = set()
    apply_files = set()
    if workflow is not None:
        for step in workflow.steps:
            if step.actor is Actor.AI_ASSISTED:
                ai_segments.update(step.segment_refs)
                if APPLY_CUES.search(step.text):
                    apply_files.update(os.path.basename(m) for m in FILE_MENTION.findall(step.text))

    inserted = Counter()
    pasted = Counter()
    for i, event in enumerate(trace):
        if event.kind in (EventKind.KEY, EventKind.PASTE) and event.payload:
            inserted[owner[i]] += len(event.payload)
            if event.kind is EventKind.PASTE:
                pasted[owner[i]] += len(event.payload)

    typed_runs, run = [], []
    ai_pastes, heavy_pastes, all_pastes = [], [], []
    for i, event in enumerate(trace):
        if event.kind is EventKind.KEY:
            run.append(event.payload or "")
            continue
        if run:
            typed_runs.append("".join(run))
            run = []
        if event.kind is EventKind.PASTE:
            all_pastes.append(event.payload)
            episode = owner[i]
            if episode is not None and episode in ai_segments:
                ai_pastes.append(event.payload)
            if inserted[episode] and pasted[episode] / inserted[episode] >= settings.paste_heavy_ratio:
                heavy_pastes.append(event.payload)
    if run:
        typed_runs.append("".join(run))

    min_chars = settings.min_fragment_chars
    return TraceEvidence(
        typed=_corpus(typed_runs, min_chars),
        paste_ai_episode=_corpus(ai_pastes, min_chars),
        paste_heavy=_corpus(heavy_pastes, min_chars),
        paste_any=_corpus(all_pastes, min_chars),
        ai_apply_files=tuple(sorted(apply_files)),
    )


def is_excluded(rel_path, globs):
    name = os.path.basename(rel_path)
    for pattern in globs:
        if fnmatch.fnmatch(rel_path, pattern) or fnmatch.fnmatch(name, pattern):
            return True
        if fnmatch.fnmatch(rel_path, f"*/{pattern}"):
            return True
    return False


def label_line(line, evidence, mode, min_chars, file_mentioned):
    """Label one line; returns (label, evidence type or None).

    Precedence: strong tool evidence, then typed (human), then in soft mode
    weak tool evidence, else unknown.
    """
    norm = normalize_line(line)
    if not norm:
        return LineLabel.EXCLUDED, None
    matchable = len(norm) >= min_chars
    if matchable and norm in evidence.paste_ai_episode:
        return LineLabel.TOOL, "paste_ai_episode"
    if matchable and norm in evidence.paste_heavy:
        return LineLabel.TOOL, "paste_heavy"
    if matchable and norm in evidence.typed:
        return LineLabel.HUMAN, "typed_match"
    if mode == "soft":
        if matchable and norm in evidence.paste_any:
            return LineLabel.TOOL, "paste_weak"
        if file_mentioned:
            return LineLabel.TOOL, "file_mention_ai_episode"
    return LineLabel.UNKNOWN, None


def _read_text(path):
    with open(path, "rb") as handle:
        data = handle.read()
    if b"\x00" in data:
        return None
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return None


def list_repo_files(repo_root, globs):
    """Relative posix paths of all files, plus those excluded by glob."""
    if not os.path.isdir(repo_root):
        raise DataValidationError(f"Repository is not a readable directory: {repo_root}")
    included, excluded = [], []
    for directory, dirnames, filenames in os.walk(repo_root):
        rel_dir = os.path.relpath(directory, repo_root).replace(os.sep, "/")
        rel_dir = "" if rel_dir == "." else rel_dir + "/"
        dirnames[:] = sorted(d for d in dirnames if not is_excluded(f"{rel_dir}{d}/x", globs))
        for filename in sorted(filenames):
            rel_path = f"{rel_dir}{filename}"
            (excluded if is_excluded(rel_path, globs) else included).append(rel_path)
    return sorted(included), sorted(excluded)


def attribute_code(repo_root, trace, workflow, mode, segments=None, settings=None):
    """Build the line-level provenance map of a repository.

    Args:
        repo_root: Final repository directory
        trace: ActionEvents of the session
        workflow: Workflow with actors resolved (AI-apply steps and AI segments)
        mode: "strict" or "soft"
        segments: Trace segments referenced by the workflow steps
        settings: AttributionSettings

    Returns:
        ProvenanceMap
    """
    if mode not in MODES:
        raise DataValidationError(f"Unknown attribution mode {mode!r}")
    settings = settings or AttributionSettings()
    evidence = collect_evidence(trace, workflow, segments, settings)
    included, excluded = list_repo_files(repo_root, settings.exclude_globs)

    def _attribute(_, rel_path):
        text = _read_text(os.path.join(repo_root, rel_path))
        if text is None:
            return None
        mentioned = os.path.basename(rel_path) in evidence.ai_apply_files
        labels, tallies = [], Counter()
        for line in text.splitlines():
            label, kind = label_line(line, evidence, mode, settings.min_fragment_chars, mentioned)
            labels.append(label)
            if kind:
                tallies[kind] += 1
        return FileProvenance(rel_path, tuple(labels), dict(tallies))

    results = run_ordered(_attribute, included, settings.max_concurrency, show_progress=False)
    files = []
    for rel_path, provenance in zip(included, results):
        if provenance is None:
            logger.debug(f"Excluding binary or undecodable file {rel_path}")
            excluded.append(rel_path)
        else:
            files.append(provenance)

    provenance_map = ProvenanceMap(mode, tuple(files), tuple(sorted(excluded)))
    logger.info(
        f"Attribution ({mode}) of {repo_root}: {len(files)} files, coverage {provenance_map.coverage:.3f}, "
        f"AI code fraction {provenance_map.ai_code_fraction:.3f}"
    )
    return provenance_map
