"""
System recall: grading participants' answers about their own code against
lexically retrieved repository snippets, and the overreliance analysis of
offloading versus recall.
"""

import json
import logging
import math
import os
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

try:
    from .attribution_service import list_repo_files
    from .batch_runner import run_ordered
    from .config import DEFAULT_EXCLUDE_GLOBS
    from .exceptions import BackendError, ConfigError, DataValidationError, DegenerateInputError, FitError, ProtocolError, StepError
    from .prompts import RECALL_GRADE
    from .stats import pearson_r
except ImportError:
    from attribution_service import list_repo_files
    from batch_runner import run_ordered
    from config import DEFAULT_EXCLUDE_GLOBS
    from exceptions import BackendError, ConfigError, DataValidationError, DegenerateInputError, FitError, ProtocolError, StepError
    from prompts import RECALL_GRADE
    from stats import pearson_r

logger = logging.getLogger(__name__)

DEFAULT_BANK_PATH = os.path.join(os.path.dirname(__file__), "data", "question_banks.json")

STOPWORDS = frozenset(
    """a an and are as at be by did do does for from how i in is it its of on or
    the this to was what when where which who why with you your my we our via use used
    using into than then there their them they that these those not no yes""".split()
)

_TOKEN = re.compile(r"[a-z_][a-z0-9_]*")


class GradeLabel(str, Enum):
    INCORRECT = "incorrect"
    PARTIALLY_CORRECT = "partially_correct"
    MOSTLY_CORRECT = "mostly_correct"
    FULLY_CORRECT = "fully_correct"


GRADE_SCORES = {
    GradeLabel.INCORRECT: 0.0,
    GradeLabel.PARTIALLY_CORRECT: 0.33,
    GradeLabel.MOSTLY_CORRECT: 0.67,
    GradeLabel.FULLY_CORRECT: 1.0,
}


@dataclass(frozen=True)
class Snippet:
    path: str
    start_line: int
    end_line: int
    text: str
    score: int = 0


@dataclass(frozen=True)
class RecallGrade:
    question_id: str
    label: GradeLabel
    evidence: Tuple[Tuple[str, int, int], ...] = ()
    reason: str = ""

    @property
    def score(self):
        return GRADE_SCORES[self.label]

    def to_dict(self):
        return {
            "question_id": self.question_id,
            "label": self.label.value,
            "score": self.score,
            "evidence": [f"{p}:{s}-{e}" for p, s, e in self.evidence],
            "reason": self.reason,
        }


@dataclass(frozen=True)
class ClusterRule:
    min_recall: float = 0.33
    min_offloading: float = 0.40

    def contains(self, offloading, recall):
        return recall >= self.min_recall and offloading >= self.min_offloading

    def describe(self):
        return f"recall >= {self.min_recall} and offloading >= {self.min_offloading}"


@dataclass(frozen=True)
class OverrelianceVerdict:
    participant_id: str
    offloading: float
    recall_mean: Optional[float]
    understood: Optional[bool]
    overreliant: Optional[bool]
    in_outlier_cluster: bool
    status: str

    def to_dict(self):
        return {
            "participant_id": self.participant_id,
            "offloading": self.offloading,
            "recall_mean": self.recall_mean,
            "understood": self.understood,
            "overreliant": self.overreliant,
            "in_outlier_cluster": self.in_outlier_cluster,
            "status": self.status,
        }


@dataclass(frozen=True)
class FitSummary:
    slope: float
    intercept: float
    pearson_r: Optional[float]
    n_points: int

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "pearson_r": self.pearson_r, "n_points": self.n_points}


def tokenize(text):
    return [t for t in _TOKEN.findall(text.lower()) if t not in STOPWORDS and len(t) > 1]


def segment_repo(repo_root, window=40, overlap=0.5, exclude_globs=DEFAULT_EXCLUDE_GLOBS):
    """Cut every text file into windows of `window` lines overlapping by `overlap`."""
    stride = max(1, int(window * (1 - overlap)))
    included, _ = list_repo_files(repo_root, exclude_globs)
    snippets = []
    for rel_path in included:
        try:
            with open(os.path.join(repo_root, rel_path), "r", encoding="utf-8") as handle:
                lines = handle.read().splitlines()
        except (UnicodeDecodeError, OSError):
            continue
        start = 0
        while start < len(lines):
            end = min(start + window, len(lines))
            snippets.append(Snippet(rel_path, start + 1, end, "\n".join(lines[start:end])))
            if end == len(lines):
                break
            start += stride
    return snippets


class SnippetIndex:
    """Tokenized repository windows, built once and searched per question."""

    def __init__(self, snippets):
        self.snippets = list(snippets)
        self._tokens = [
            (set(tokenize(s.text)), set(tokenize(re.sub(r"[/._\-]", " ", s.path))))
            for s in self.snippets
        ]

    @classmethod
    def build(cls, repo_root, window=40, overlap=0.5, exclude_globs=DEFAULT_EXCLUDE_GLOBS):
        index = cls(segment_repo(repo_root, window, overlap, exclude_globs))
        logger.debug(f"Indexed {len(index.snippets)} snippets from {repo_root}")
        return index

    def search(self, question, answer, k):
        """Top-k snippets by lexical overlap with the question and answer.

        Score = shared content tokens + 2 * shared file-path tokens. Snippets with
        no overlap are dropped; ties go to path, then line offset.
        """
        if k <= 0:
            return []
        query = set(tokenize(f"{question}\n{answer}"))
        scored = []
        for snippet, (content, path) in zip(self.snippets, self._tokens):
            score = len(query & content) + 2 * len(query & path)
            if score > 0:
                scored.append(replace(snippet, score=score))
        scored.sort(key=lambda s: (-s.score, s.path, s.start_line))
        return scored[:k]


def retrieve_snippets(repo_root, question, answer, k, window=40, overlap=0.5, exclude_globs=DEFAULT_EXCLUDE_GLOBS):
    """One-off search; use SnippetIndex when several questions share a repository."""
    if k <= 0:
        return []
    return SnippetIndex.build(repo_root, window, overlap, exclude_globs).search(question, answer, k)


def _format_snippets(snippets):
    if not snippets:
        return "(no matching repository snippets)"
    blocks = []
    for s in snippets:
        numbered = "\n".join(f"{s.start_line + i}: {line}" for i, line in enumerate(s.text.splitlines()))
        blocks.append(f"--- {s.path} (lines {s.start_line}-{s.end_line}) ---\n{numbered}")
    return "\n\n".join(blocks)


def grade_answer(question, answer, snippets, gateway, question_id=""):
    """Grade one answer on the four-level rubric."""
    reply = gateway.judge(RECALL_GRADE, question=question, answer=answer or "(no answer)", snippets=_format_snippets(snippets))
    label = GradeLabel(reply.answer.replace(" ", "_"))
    evidence = tuple((s.path, s.start_line, s.end_line) for s in snippets)
    return RecallGrade(question_id, label, evidence, reply.reason)


def recall_score(grades):
    """Mean score over one participant's graded questions."""
    grades = list(grades)
    if not grades:
        raise DataValidationError("Cannot compute recall from zero grades")
    return math.fsum(g.score for g in grades) / len(grades)


def load_question_bank(path=None):
    path = path or DEFAULT_BANK_PATH
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read question bank {path}: {e}") from e
    return {task: {q["question_id"]: q["question"] for q in questions} for task, questions in document.items()}


def grade_participant(record, repo_root, gateway, bank, config=None, show_progress=False):
    """Grade every recall answer of a participant against their repository."""
    questions = bank.get(record.task_id.value, {})
    items = []
    for question_id, answer in record.recall_answers:
        if question_id not in questions:
            logger.warning(f"{record.participant_id}: no question '{question_id}' in bank for {record.task_id.value}")
            continue
        items.append((question_id, questions[question_id], answer))

    window = config.snippet_window_lines if config else 40
    overlap = config.snippet_overlap if config else 0.5
    k = config.retrieval_k if config else 5
    globs = config.attribution_exclude_globs if config else DEFAULT_EXCLUDE_GLOBS
    workers = config.max_concurrency if config else 1
    index = SnippetIndex.build(repo_root, window, overlap, globs) if repo_root and items else None

    def _grade(position, item):
        question_id, question, answer = item
        snippets = index.search(question, answer, k) if index else []
        try:
            return grade_answer(question, answer, snippets, gateway, question_id)
        except (BackendError, ProtocolError) as e:
            raise StepError(position, e, record.participant_id) from e

    return run_ordered(_grade, items, workers, desc=f"Grading {record.participant_id}", show_progress=show_progress)


def overreliance_verdict(participant_id, offloading, recall_mean, cluster_rule=None, recall_threshold=0.33, offloading_threshold=0.33):
    """Verdict for one participant; recall_mean None means no recall data."""
    cluster_rule = cluster_rule or ClusterRule()
    high = offloading > offloading_threshold
    if recall_mean is None:
        return OverrelianceVerdict(participant_id, offloading, None, None, high, False, "predicted")
    understood = recall_mean >= recall_threshold
    if cluster_rule.contains(offloading, recall_mean):
        return OverrelianceVerdict(participant_id, offloading, recall_mean, understood, False, True, "threshold undefined")
    overreliant = high and not understood
    status = "overreliant" if overreliant else "not overreliant"
    return OverrelianceVerdict(participant_id, offloading, recall_mean, understood, overreliant, False, status)


def overreliance_analysis(results, cluster_rule=None, recall_threshold=0.33, offloading_threshold=0.33):
    """Per-participant overreliance verdicts and a linear fit outside the cluster.

    Args:
        results: (participant_id, offloading, recall_mean or None) tuples
        cluster_rule: ClusterRule marking the high-reliance, high-recall cluster
        recall_threshold: Recall at or above which a participant understood the system
        offloading_threshold: Offloading above which reliance counts as high

    Returns:
        tuple: (list of OverrelianceVerdict, FitSummary or None)

    Raises:
        FitError: If the fit points have no spread in offloading
    """
    verdicts = []
    fit_points = []
    for participant_id, offloading, recall_mean in results:
        verdict = overreliance_verdict(
            participant_id, offloading, recall_mean, cluster_rule, recall_threshold, offloading_threshold
        )
        verdicts.append(verdict)
        if recall_mean is not None and not verdict.in_outlier_cluster:
            fit_points.append((offloading, recall_mean))

    if len(fit_points) < 3:
        logger.warning(f"Only {len(fit_points)} participants outside the cluster; skipping the linear fit")
        return verdicts, None

    x = np.array([p[0] for p in fit_points])
    y = np.array([p[1] for p in fit_points])
    if np.ptp(x) == 0:
        raise FitError("Linear fit undefined: all offloading scores are equal")
    slope, intercept = np.polyfit(x, y, 1)
    try:
        r = pearson_r(x, y)
    except DegenerateInputError:
        r = None
    return verdicts, FitSummary(float(slope), float(intercept), r, len(fit_points))


def recall_correlations(rows, measures):
    """Pearson r of each measure against recall_mean over rows that have both."""
    result = {}
    for measure in measures:
        pairs = [(row[measure], row["recall_mean"]) for row in rows
                 if row.get(measure) is not None and row.get("recall_mean") is not None]
        try:
            result[measure] = pearson_r([p[0] for p in pairs], [p[1] for p in pairs])
        except DegenerateInputError as e:
            logger.warning(f"Correlation of {measure} with recall is degenerate: {e}")
            result[measure] = "degenerate"
    return result
