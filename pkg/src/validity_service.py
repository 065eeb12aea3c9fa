"""
Construct-validity checks of the offloading score: sensitivity to
reliance-reducing perturbations, stability across reliance-neutral re-runs,
and same-task similarity of synthetic counterfactual workflows.
"""

import json
import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from itertools import combinations
from typing import Dict, Tuple

import numpy as np

try:
    from .batch_runner import run_ordered
    from .exceptions import ConfigError, DataValidationError, DegenerateInputError
    from .models import Actor, CounterfactualExpansion, WorkflowStep
    from .offloading_service import expand_all, offloading_score
    from .prompts import STEP_PARAPHRASE, SYNTHETIC_WORKFLOW
    from .stats import cosine_similarity, describe, paired_t_test, permutation_sign_test, wilcoxon_signed_rank
except ImportError:
    from batch_runner import run_ordered
    from exceptions import ConfigError, DataValidationError, DegenerateInputError
    from models import Actor, CounterfactualExpansion, WorkflowStep
    from offloading_service import expand_all, offloading_score
    from prompts import STEP_PARAPHRASE, SYNTHETIC_WORKFLOW
    from stats import cosine_similarity, describe, paired_t_test, permutation_sign_test, wilcoxon_signed_rank

logger = logging.getLogger(__name__)

INSTABILITY_ALPHA = 0.05


@dataclass(frozen=True)
class PerturbationSpec:
    fraction: float
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise DataValidationError(f"Perturbation fraction {self.fraction} outside (0, 1]")


@dataclass(frozen=True)
class PerturbationResult:
    workflow: object
    expansions: Tuple[CounterfactualExpansion, ...]
    replaced_steps: Tuple[int, ...]


@dataclass(frozen=True)
class StabilityRun:
    name: str
    scores: Dict[str, float]
    metadata: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class LabeledWorkflow:
    workflow_id: str
    task_id: str
    steps: Tuple[str, ...]

    @property
    def text(self):
        return "\n".join(self.steps)


@dataclass(frozen=True)
class SameTaskStat:
    workflow_id: str
    task_id: str
    d: float


def round_half_up(value):
    return int(Decimal(str(value)).quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def perturbation_count(fraction, ai_step_count):
    if ai_step_count < 1:
        return 0
    return min(ai_step_count, max(1, round_half_up(Decimal(str(fraction)) * ai_step_count)))


def perturb_workflow(w, expansions, spec):
    """Replace a random subset of AI steps by their human-only counterfactuals.

    round_half_up(fraction * #AI steps) steps (at least one) are chosen under
    the seed; each is spliced into the workflow as human-only steps.

    Returns:
        PerturbationResult: the perturbed workflow and the expansions of the
        AI steps that remain, re-indexed to the new workflow
    """
    ai_indices = [s.index for s in w.ai_steps()]
    if not ai_indices:
        raise DataValidationError(f"{w.participant_id}: nothing to perturb (no AI-assisted steps)")
    by_index = {e.source_step_index: e for e in expansions}
    missing = [i for i in ai_indices if i not in by_index]
    if missing:
        raise DataValidationError(f"{w.participant_id}: AI steps {missing} have no expansion")

    count = perturbation_count(spec.fraction, len(ai_indices))
    rng = np.random.default_rng(spec.rng_seed)
    chosen = set(int(i) for i in rng.choice(ai_indices, size=count, replace=False))

    steps, remaining = [], []
    for step in w.steps:
        if step.index in chosen:
            for text in by_index[step.index].replacement_steps:
                steps.append(WorkflowStep(len(steps), text, Actor.HUMAN_ONLY, step.segment_refs))
            continue
        if step.actor is Actor.AI_ASSISTED:
            remaining.append(CounterfactualExpansion(len(steps), by_index[step.index].replacement_steps))
        steps.append(WorkflowStep(len(steps), step.text, step.actor, step.segment_refs))
    return PerturbationResult(w.with_steps(steps), tuple(remaining), tuple(sorted(chosen)))


def _safe_test(test, *args, **kwargs):
    try:
        return test(*args, **kwargs).to_dict()
    except DegenerateInputError as e:
        logger.warning(f"{test.__name__} degenerate: {e}")
        return "degenerate"


def sensitivity_suite(dataset, expansions, fractions=(0.05, 0.10, 0.20), seed=0, wilcoxon_cutoff=12):
    """Score drop when a fraction of AI steps is replaced by counterfactuals.

    Args:
        dataset: Workflows with actors resolved, each with >= 1 AI step
        expansions: participant_id -> expansions of that workflow
        fractions: Perturbation fractions
        seed: Base seed; workflow i uses seed + i

    Returns:
        dict: per fraction, mean relative change plus paired t and Wilcoxon
        (original > perturbed) results
    """
    dataset = list(dataset)
    if len(dataset) < 2:
        raise DataValidationError("Sensitivity suite needs at least two workflows")
    for w in dataset:
        if not w.ai_steps():
            raise DataValidationError(f"{w.participant_id} has no AI-assisted step to perturb")

    originals = [offloading_score(w, expansions[w.participant_id]).score for w in dataset]
    report = {"workflows": len(dataset), "seed": seed, "fractions": []}
    for fraction in fractions:
        perturbed = []
        for i, w in enumerate(dataset):
            result = perturb_workflow(w, expansions[w.participant_id], PerturbationSpec(fraction, seed + i))
            perturbed.append(offloading_score(result.workflow, result.expansions).score)

        changes = [(p - o) / o if o > 0 else 0.0 for o, p in zip(originals, perturbed)]
        entry = {
            "fraction": fraction,
            "mean_original": float(np.mean(originals)),
            "mean_perturbed": float(np.mean(perturbed)),
            "mean_relative_change": float(np.mean(changes)),
            "paired_t": _safe_test(paired_t_test, originals, perturbed, "greater"),
            "wilcoxon": _safe_test(
                wilcoxon_signed_rank, np.subtract(originals, perturbed), "greater", exact_cutoff=wilcoxon_cutoff
            ),
        }
        logger.info(f"Sensitivity at {fraction:.2f}: mean relative change {entry['mean_relative_change']:+.4f}")
        report["fractions"].append(entry)
    return report


def stability_suite(run_results, wilcoxon_cutoff=12):
    """Compare score lists from reliance-neutral re-runs.

    Flags instability when any pairwise two-sided Wilcoxon p < 0.05.
    """
    runs = list(run_results)
    if len(runs) < 2:
        raise DataValidationError("Stability suite needs at least two runs")
    participants = sorted(runs[0].scores)
    for run in runs[1:]:
        if sorted(run.scores) != participants:
            raise DataValidationError(f"Run '{run.name}' covers different participants than '{runs[0].name}'")

    report = {"runs": [], "pairwise": [], "participants": len(participants)}
    for run in runs:
        report["runs"].append({"name": run.name, "metadata": dict(run.metadata), **describe([run.scores[p] for p in participants])})

    flagged = False
    for a, b in combinations(runs, 2):
        d = [a.scores[p] - b.scores[p] for p in participants]
        if all(x == 0 for x in d):
            test = {"statistic": 0.0, "p_value": 1.0, "method": "identical", "n_effective": 0, "alternative": "two_sided", "note": "all differences zero"}
        else:
            test = wilcoxon_signed_rank(d, "two_sided", exact_cutoff=wilcoxon_cutoff).to_dict()
        unstable = test["p_value"] < INSTABILITY_ALPHA
        flagged = flagged or unstable
        report["pairwise"].append({"runs": [a.name, b.name], "wilcoxon": test, "unstable": unstable})
    report["unstable"] = flagged
    if flagged:
        logger.warning("Stability check flagged at least one pair of runs as different")
    return report


def paraphrase_workflow(w, fraction, seed, gateway):
    """Paraphrase a random fraction of step texts; actors are kept."""
    count = min(w.n, max(1, round_half_up(Decimal(str(fraction)) * w.n)))
    rng = np.random.default_rng(seed)
    chosen = set(int(i) for i in rng.choice(w.n, size=count, replace=False))
    steps = []
    for step in w.steps:
        text = gateway.judge(STEP_PARAPHRASE, step=step.text).text if step.index in chosen else step.text
        steps.append(WorkflowStep(step.index, text, step.actor, step.segment_refs))
    return w.with_steps(steps)


def parse_variant(variant):
    """'effort:low' -> params, 'model:<id>' -> model override, 'paraphrase'."""
    kind, _, value = variant.partition(":")
    if kind == "effort" and value:
        return {"params": (("reasoning_effort", value),)}
    if kind == "model" and value:
        return {"model_id": value}
    if kind == "paraphrase":
        return {"paraphrase": True}
    raise ConfigError(f"Unknown stability variant {variant!r}")


def stability_runs(dataset, variants, gateway, config, baseline=None):
    """Re-score every workflow under each variant.

    Args:
        dataset: Workflows with actors resolved
        variants: Variant strings such as "effort:low", "model:gpt-5.1", "paraphrase"
        baseline: Optional participant_id -> score of the default run

    Returns:
        list: StabilityRun per variant (baseline first when given)
    """
    runs = []
    if baseline is not None:
        runs.append(StabilityRun("baseline", dict(baseline), {"variant": "default"}))
    for variant in variants:
        options = parse_variant(variant)
        scores = {}
        for i, w in enumerate(dataset):
            target = w
            if options.get("paraphrase"):
                target = paraphrase_workflow(w, config.paraphrase_fraction, config.seed + i, gateway)
            expansions = expand_all(
                target,
                gateway,
                config.counterfactual_context_steps,
                config.max_replacement_steps,
                config.max_concurrency,
                False,
                model_id=options.get("model_id"),
                params=options.get("params", ()),
            )
            scores[w.participant_id] = offloading_score(target, expansions).score
        runs.append(StabilityRun(variant, scores, {"variant": variant}))
    return runs


def synthesize_workflows(task_instructions, per_task, gateway):
    """Human-only workflows synthesized from task instructions."""
    synthetic = []
    for task_id in sorted(task_instructions):
        instructions = task_instructions[task_id]
        if not instructions:
            raise DataValidationError(f"Task '{task_id}' has no instructions")
        for j in range(per_task):
            steps = gateway.judge(SYNTHETIC_WORKFLOW, instruction=instructions[j % len(instructions)], variant=str(j + 1))
            synthetic.append(LabeledWorkflow(f"synthetic-{task_id}-{j}", task_id, tuple(steps)))
    return synthetic


def load_same_task_dataset(path):
    """Human workflows and per-task instructions from a JSON dataset file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read same-task dataset {path}: {e}") from e
    humans = [
        LabeledWorkflow(item["workflow_id"], item["task_id"], tuple(item["steps"]))
        for item in document.get("human_workflows", ())
    ]
    return humans, dict(document.get("task_instructions", {}))


def same_task_validation(
    human_workflows, synthetic_workflows, embedder, n_perm=10000, seed=0, max_concurrency=1, wilcoxon_cutoff=12, permutation_cutoff=20
):
    """Are synthetic workflows closer to human workflows of their own task?

    d_i = mean cosine to same-task human workflows minus mean cosine to the
    human workflows of all other tasks.

    Args:
        human_workflows: LabeledWorkflows observed from people
        synthetic_workflows: LabeledWorkflows to validate
        embedder: Object with embed_text(text) -> EmbeddingVector

    Returns:
        dict: per-workflow d, one-sided Wilcoxon and permutation results, and
        the similarity matrix (rows synthetic, columns human)
    """
    human_workflows = list(human_workflows)
    synthetic_workflows = list(synthetic_workflows)
    tasks = sorted({h.task_id for h in human_workflows})
    if len(tasks) < 2:
        raise DataValidationError("Same-task validation needs human workflows from at least two tasks")
    for s in synthetic_workflows:
        if s.task_id not in tasks:
            raise DataValidationError(f"No human workflow for task '{s.task_id}' of {s.workflow_id}")
    if not synthetic_workflows:
        raise DataValidationError("No synthetic workflows to validate")

    def _embed(_, item):
        return embedder.embed_text(item.text)

    human_vectors = run_ordered(_embed, human_workflows, max_concurrency, show_progress=False)
    synthetic_vectors = run_ordered(_embed, synthetic_workflows, max_concurrency, show_progress=False)

    matrix = []
    stats = []
    for s, sv in zip(synthetic_workflows, synthetic_vectors):
        row = [cosine_similarity(sv, hv) for hv in human_vectors]
        matrix.append(row)
        same = [sim for sim, h in zip(row, human_workflows) if h.task_id == s.task_id]
        other = [sim for sim, h in zip(row, human_workflows) if h.task_id != s.task_id]
        stats.append(SameTaskStat(s.workflow_id, s.task_id, float(np.mean(same) - np.mean(other))))

    d = [stat.d for stat in stats]
    return {
        "embedding_input": "step texts joined by newline",
        "d": [{"workflow_id": st.workflow_id, "task_id": st.task_id, "d": st.d} for st in stats],
        "mean_d": float(np.mean(d)),
        "wilcoxon": _safe_test(wilcoxon_signed_rank, d, "greater", exact_cutoff=wilcoxon_cutoff),
        "permutation": permutation_sign_test(d, n_perm=n_perm, rng_seed=seed, alternative="greater", exact_cutoff=permutation_cutoff).to_dict(),
        "similarity": {
            "human_ids": [h.workflow_id for h in human_workflows],
            "rows": [
                {"synthetic_id": s.workflow_id, "synthetic_task": s.task_id, "values": row}
                for s, row in zip(synthetic_workflows, matrix)
            ],
        },
    }
