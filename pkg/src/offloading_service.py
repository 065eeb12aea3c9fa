"""
Offloading score: AI-step identification, counterfactual expansion of each
AI-assisted step into human-only steps, and the (m - n) / m score.
"""

import logging
import re
from dataclasses import dataclass
from typing import Tuple

try:
    from .batch_runner import run_ordered
    from .exceptions import BackendError, DataValidationError, ProtocolError, StepError
    from .models import Actor, CounterfactualExpansion, CounterfactualWorkflow, WorkflowStep
    from .prompts import AI_STEP_CLASSIFY, COUNTERFACTUAL
    from .tool_keywords import KeywordTable
except ImportError:
    from batch_runner import run_ordered
    from exceptions import BackendError, DataValidationError, ProtocolError, StepError
    from models import Actor, CounterfactualExpansion, CounterfactualWorkflow, WorkflowStep
    from prompts import AI_STEP_CLASSIFY, COUNTERFACTUAL
    from tool_keywords import KeywordTable

logger = logging.getLogger(__name__)

AI_ACTIVITY_TAGS = ("(reading generation)", "(writing prompt)", "(editing generation)")

NO_STEP = "(none)"


@dataclass(frozen=True)
class OffloadingResult:
    n: int
    m: int
    score: float
    expansions: Tuple[CounterfactualExpansion, ...]

    def to_dict(self):
        return {
            "n": self.n,
            "m": self.m,
            "score": self.score,
            "expansion_count": len(self.expansions),
            "k": {str(e.source_step_index): e.k for e in self.expansions},
        }


@dataclass(frozen=True)
class CounterfactualContext:
    preceding: Tuple[str, ...]
    following: str = NO_STEP


class HeuristicIdentifier:
    """Tags a step AI-assisted when it names a tool, carries an AI activity tag,
    or matches one of the AI cue patterns."""

    def __init__(self, keyword_table=None, cue_patterns=(r"\bai\b",)):
        self.keyword_table = keyword_table or KeywordTable.load()
        self.cues = [re.compile(p, re.IGNORECASE) for p in cue_patterns]

    def is_ai_step(self, text):
        lowered = text.lower()
        if any(tag in lowered for tag in AI_ACTIVITY_TAGS):
            return True
        if self.keyword_table.mentions_any(text):
            return True
        return any(cue.search(text) for cue in self.cues)


def _neighbour(steps, index):
    return steps[index].text if 0 <= index < len(steps) else NO_STEP


def identify_ai_steps(w, mode, gateway=None, identifier=None, max_concurrency=1, show_progress=False):
    """Resolve the actor of every step that is still unknown.

    Args:
        w: Workflow whose steps are unknown or pre-tagged
        mode: "judge" (ask the gateway per step) or "heuristic"
        gateway: LLMGateway, required in judge mode
        identifier: HeuristicIdentifier for heuristic mode

    Returns:
        Workflow: every step human_only or ai_assisted

    Raises:
        StepError: Gateway failure in judge mode, carrying the step index
    """
    if mode not in ("judge", "heuristic"):
        raise DataValidationError(f"Unknown AI-step mode {mode!r}")
    steps = w.steps

    if mode == "heuristic":
        identifier = identifier or HeuristicIdentifier()

        def _decide(index, step):
            if step.actor is not Actor.UNKNOWN:
                return step.actor
            return Actor.AI_ASSISTED if identifier.is_ai_step(step.text) else Actor.HUMAN_ONLY

    else:
        if gateway is None:
            raise DataValidationError("Judge mode needs a gateway")

        def _decide(index, step):
            if step.actor is not Actor.UNKNOWN:
                return step.actor
            try:
                reply = gateway.judge(
                    AI_STEP_CLASSIFY,
                    previous_step=_neighbour(steps, index - 1),
                    current_step=step.text,
                    next_step=_neighbour(steps, index + 1),
                )
            except (BackendError, ProtocolError) as e:
                raise StepError(step.index, e, w.participant_id) from e
            return Actor.AI_ASSISTED if reply.ai_assisted else Actor.HUMAN_ONLY

    actors = run_ordered(_decide, steps, max_concurrency, desc=f"Identifying AI steps ({w.participant_id})", show_progress=show_progress)
    tagged = [WorkflowStep(s.index, s.text, actor, s.segment_refs) for s, actor in zip(steps, actors)]
    result = w.with_steps(tagged)
    logger.info(f"{w.participant_id}: {len(result.ai_steps())} of {result.n} steps AI-assisted ({mode} mode)")
    return result


def counterfactual_context(w, index, window=5):
    preceding = tuple(s.text for s in w.steps[max(0, index - window):index])
    return CounterfactualContext(preceding, _neighbour(w.steps, index + 1))


def expand_counterfactual(step, context, gateway, max_steps=25, model_id=None, params=()):
    """Ask the gateway for the human-only steps that replace one AI step.

    Replies longer than max_steps are truncated with a warning.

    Returns:
        CounterfactualExpansion with k >= 1
    """
    if step.actor is not Actor.AI_ASSISTED:
        raise DataValidationError(f"Step {step.index} is not AI-assisted; nothing to expand")
    context_block = "\n".join(f"- {t}" for t in context.preceding) or NO_STEP
    replacement = gateway.judge(
        COUNTERFACTUAL,
        model_id=model_id,
        params=params,
        context_block=context_block,
        tool_block=step.text,
        next_block=context.following,
    )
    if len(replacement) > max_steps:
        logger.warning(
            f"Counterfactual for step {step.index} has {len(replacement)} steps; truncating to {max_steps}"
        )
        replacement = replacement[:max_steps]
    return CounterfactualExpansion(step.index, tuple(replacement))


def expand_all(w, gateway, context_steps=5, max_steps=25, max_concurrency=1, show_progress=False, model_id=None, params=()):
    """Expand every AI-assisted step; results come back in step order."""

    def _expand(_, step):
        try:
            context = counterfactual_context(w, step.index, context_steps)
            return expand_counterfactual(step, context, gateway, max_steps, model_id, params)
        except (BackendError, ProtocolError) as e:
            raise StepError(step.index, e, w.participant_id) from e

    return run_ordered(_expand, w.ai_steps(), max_concurrency, desc=f"Counterfactuals ({w.participant_id})", show_progress=show_progress)


def _index_expansions(w, expansions):
    by_index = {}
    for expansion in expansions:
        if expansion.k < 1:
            raise DataValidationError(f"Expansion for step {expansion.source_step_index} is empty")
        if expansion.source_step_index in by_index:
            raise DataValidationError(f"Duplicate expansion for step {expansion.source_step_index}")
        by_index[expansion.source_step_index] = expansion

    ai_indices = {s.index for s in w.ai_steps()}
    for index in sorted(by_index):
        if index not in ai_indices:
            raise DataValidationError(f"Expansion given for step {index}, which is not AI-assisted")
    for index in sorted(ai_indices):
        if index not in by_index:
            raise DataValidationError(f"AI-assisted step {index} has no counterfactual expansion")
    return by_index


def offloading_score(w, expansions):
    """Compute the offloading score of a workflow.

    m = n - (number of expansions) + sum of k_i and score = (m - n) / m.

    Raises:
        DataValidationError: Empty workflow, or an AI step without exactly one expansion
    """
    if w.n < 1:
        raise DataValidationError("Cannot score a workflow with no steps")
    by_index = _index_expansions(w, expansions)
    ordered = tuple(by_index[i] for i in sorted(by_index))
    m = w.n - len(ordered) + sum(e.k for e in ordered)
    return OffloadingResult(w.n, m, (m - w.n) / m, ordered)


def counterfactual_workflow(w, expansions):
    by_index = _index_expansions(w, expansions)
    return CounterfactualWorkflow(w, tuple(by_index[i] for i in sorted(by_index)))


def counterfactual_ledger(result, w):
    """Per-step document mapping each observed step to its replacement steps."""
    by_index = {e.source_step_index: e for e in result.expansions}
    steps = []
    for step in w.steps:
        entry = {"index": step.index, "text": step.text, "actor": step.actor.value}
        if step.index in by_index:
            entry["replacements"] = list(by_index[step.index].replacement_steps)
            entry["k"] = by_index[step.index].k
        steps.append(entry)
    return {
        "participant_id": w.participant_id,
        "n": result.n,
        "m": result.m,
        "score": result.score,
        "steps": steps,
    }


def workflow_step_stats(w):
    ai = sum(1 for s in w.steps if s.actor is Actor.AI_ASSISTED)
    human = sum(1 for s in w.steps if s.actor is Actor.HUMAN_ONLY)
    return {
        "total_steps": w.n,
        "ai_assisted_steps": ai,
        "human_only_steps": human,
        "unknown_steps": w.n - ai - human,
        "ai_step_proportion": ai / w.n if w.n else 0.0,
    }
