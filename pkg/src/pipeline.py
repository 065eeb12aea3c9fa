"""
Pipeline orchestration: runs the requested stages per session in dependency
order, persists their artifacts, and assembles reports and cohort tables.

Artifacts live under <out_dir>/<participant_id>/. A stage that is not
requested reuses the artifact a previous run left behind.
"""

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

try:
    from .baselines_service import compute_baselines, tool_mention_fractions
    from .batch_runner import run_ordered
    from .exceptions import ConfigError, DataValidationError, DegenerateInputError, DependencyError, FitError
    from .induction_service import (
        InductionConfig,
        SegmentAnnotator,
        SegmentGrouper,
        induce_workflow,
        load_frames,
        segment_trace,
    )
    from .labeling_service import (
        DENOMINATOR_MODES,
        OutputUse,
        ProcessType,
        expansion_length_by_label,
        label_distribution,
        label_workflow,
        ledger_from_dict,
        ledger_to_dict,
        output_use_labels,
        process_labels,
    )
    from .models import (
        Condition,
        CounterfactualExpansion,
        Segment,
        canonical_parse,
        canonical_serialize,
        load_participant,
        read_trace,
        write_trace,
    )
    from .offloading_service import (
        HeuristicIdentifier,
        counterfactual_ledger,
        expand_all,
        identify_ai_steps,
        offloading_score,
        workflow_step_stats,
    )
    from .recall_service import (
        ClusterRule,
        grade_participant,
        load_question_bank,
        overreliance_analysis,
        overreliance_verdict,
        recall_correlations,
        recall_score,
    )
    from .report_writer import (
        RelianceReport,
        write_cohort,
        write_counterfactual_ledger,
        write_document,
        write_grade_ledger,
        write_report,
        write_similarity_matrix,
    )
    from .stats import pearson_r, welch_t_test
    from .tool_keywords import KeywordTable
    from .validity_service import (
        load_same_task_dataset,
        same_task_validation,
        sensitivity_suite,
        stability_runs,
        stability_suite,
        synthesize_workflows,
    )
except ImportError:
    from baselines_service import compute_baselines, tool_mention_fractions
    from batch_runner import run_ordered
    from exceptions import ConfigError, DataValidationError, DegenerateInputError, DependencyError, FitError
    from induction_service import (
        InductionConfig,
        SegmentAnnotator,
        SegmentGrouper,
        induce_workflow,
        load_frames,
        segment_trace,
    )
    from labeling_service import (
        DENOMINATOR_MODES,
        OutputUse,
        ProcessType,
        expansion_length_by_label,
        label_distribution,
        label_workflow,
        ledger_from_dict,
        ledger_to_dict,
        output_use_labels,
        process_labels,
    )
    from models import (
        Condition,
        CounterfactualExpansion,
        Segment,
        canonical_parse,
        canonical_serialize,
        load_participant,
        read_trace,
        write_trace,
    )
    from offloading_service import (
        HeuristicIdentifier,
        counterfactual_ledger,
        expand_all,
        identify_ai_steps,
        offloading_score,
        workflow_step_stats,
    )
    from recall_service import (
        ClusterRule,
        grade_participant,
        load_question_bank,
        overreliance_analysis,
        overreliance_verdict,
        recall_correlations,
        recall_score,
    )
    from report_writer import (
        RelianceReport,
        write_cohort,
        write_counterfactual_ledger,
        write_document,
        write_grade_ledger,
        write_report,
        write_similarity_matrix,
    )
    from stats import pearson_r, welch_t_test
    from tool_keywords import KeywordTable
    from validity_service import (
        load_same_task_dataset,
        same_task_validation,
        sensitivity_suite,
        stability_runs,
        stability_suite,
        synthesize_workflows,
    )

logger = logging.getLogger(__name__)

STAGES = ("ingest", "induce", "score", "label", "baselines", "recall", "validate")
SESSION_STAGES = STAGES[:-1]

PREREQUISITES = {
    "ingest": (),
    "induce": ("ingest",),
    "score": ("induce",),
    "label": ("score",),
    "baselines": ("score",),
    "recall": ("ingest",),
    "validate": ("score",),
}

# Artifact whose presence shows a stage has run.
STAGE_ARTIFACTS = {
    "ingest": "trace.jsonl",
    "induce": "workflow_induced.json",
    "score": "offloading.json",
    "label": "labels.json",
    "baselines": "baselines.json",
    "recall": "recall.json",
}

COMPARED_MEASURES = (
    "offloading_score",
    "ai_interaction_count",
    "ai_time_fraction",
    "ai_code_fraction_strict",
    "ai_code_fraction_soft",
    "recall_mean",
    "tlx_load",
)
SURVEY_MEASURES = ("trust", "ownership", "cognitive_split", "tlx_load")
CONDITION_CODES = {Condition.SHORT.value: 1, Condition.LONG.value: 0}


def parse_stages(text):
    """Comma-separated stage names in dependency order; "all" selects every stage."""
    if not text or text.strip() == "all":
        return STAGES
    names = [s.strip() for s in text.split(",") if s.strip()]
    unknown = [n for n in names if n not in STAGES]
    if unknown:
        raise ConfigError(f"Unknown stage(s) {unknown}; choose from {', '.join(STAGES)}")
    return tuple(s for s in STAGES if s in names)


def discover_sessions(paths):
    """Session directories among paths; a directory without participant.json
    contributes its immediate sub-directories that have one."""
    sessions = []
    for path in paths:
        if os.path.isfile(os.path.join(path, "participant.json")):
            sessions.append(path)
            continue
        if not os.path.isdir(path):
            raise DataValidationError(f"Session directory not found: {path}")
        children = sorted(
            os.path.join(path, name) for name in os.listdir(path)
            if os.path.isfile(os.path.join(path, name, "participant.json"))
        )
        if not children:
            raise DataValidationError(f"No participant.json in {path} or its sub-directories")
        sessions.extend(children)
    return sessions


class SessionArtifacts:
    """Reads and writes the artifacts of one participant."""

    def __init__(self, out_dir, participant_id):
        self.participant_id = participant_id
        self.root = os.path.join(out_dir, participant_id)

    def path(self, name):
        return os.path.join(self.root, name)

    def has(self, stage):
        return os.path.isfile(self.path(STAGE_ARTIFACTS[stage]))

    def exists(self, name):
        return os.path.isfile(self.path(name))

    def read(self, name):
        try:
            with open(self.path(name), "r", encoding="utf-8") as handle:
                return json.load(handle)
        except FileNotFoundError as e:
            raise DataValidationError(f"Missing artifact {self.path(name)}") from e

    def write(self, name, document):
        write_document(document, self.path(name))

    def read_workflow(self, name):
        with open(self.path(name), "rb") as handle:
            return canonical_parse(handle.read())

    def write_workflow(self, name, w):
        os.makedirs(self.root, exist_ok=True)
        with open(self.path(name), "wb") as handle:
            handle.write(canonical_serialize(w))

    def trace(self):
        return read_trace(self.path("trace.jsonl"))

    def segments(self):
        if not self.exists("segments.json"):
            return []
        return [Segment.from_dict(s) for s in self.read("segments.json")["segments"]]

    def expansions(self):
        return [CounterfactualExpansion.from_dict(e) for e in self.read("expansions.json")]


@dataclass
class CohortResult:
    reports: List[RelianceReport]
    verdicts: list = field(default_factory=list)
    fit: Optional[object] = None
    tool_mentions: dict = field(default_factory=dict)
    validity: Optional[dict] = None

    @property
    def report(self):
        if len(self.reports) != 1:
            raise DataValidationError(f"Cohort has {len(self.reports)} reports, not one")
        return self.reports[0]


class Pipeline:
    """Runs pipeline stages for sessions against a shared gateway."""

    def __init__(self, config, gateway, out_dir, show_progress=None):
        self.config = config
        self.gateway = gateway
        self.out_dir = out_dir
        self.show_progress = config.show_progress if show_progress is None else show_progress
        self.keyword_table = KeywordTable.load(config.keyword_table_path)
        self._question_bank = None

    @property
    def question_bank(self):
        if self._question_bank is None:
            self._question_bank = load_question_bank(self.config.question_bank_path)
        return self._question_bank

    def check_dependencies(self, stages, artifacts):
        for stage in stages:
            for prerequisite in PREREQUISITES[stage]:
                if prerequisite not in stages and not artifacts.has(prerequisite):
                    raise DependencyError(
                        prerequisite,
                        f"Stage '{stage}' for {artifacts.participant_id} needs the output of stage "
                        f"'{prerequisite}'; request it or run it first",
                    )

    # Stages

    def _ingest(self, session_dir, record, artifacts):
        trace_path = os.path.join(session_dir, "trace.jsonl")
        if not os.path.isfile(trace_path):
            raise DataValidationError(f"Missing trace.jsonl in {session_dir}")
        events = read_trace(trace_path)
        frames = load_frames(session_dir, events) if events else []
        os.makedirs(artifacts.root, exist_ok=True)
        write_trace(events, artifacts.path("trace.jsonl"))
        artifacts.write("ingest.json", {
            "participant_id": record.participant_id,
            "task_id": record.task_id.value,
            "condition": record.condition.value,
            "events": len(events),
            "frames": len(frames),
            "duration_ms": events[-1].timestamp_ms - events[0].timestamp_ms if events else 0,
            "event_kinds": dict(sorted(Counter(e.kind.value for e in events).items())),
            "has_repo": record.repo_path is not None,
            "recall_answers": len(record.recall_answers),
        })
        logger.info(f"Ingested {len(events)} events and {len(frames)} frames for {record.participant_id}")

    def _induce(self, session_dir, record, artifacts):
        events = artifacts.trace()
        cfg = InductionConfig.from_config(self.config)
        segments = segment_trace(events, load_frames(session_dir, events), cfg) if events else []

        if record.workflow is not None:
            logger.info(f"{record.participant_id}: using the provided workflow.json")
            workflow = record.workflow
        else:
            workflow, segments = induce_workflow(
                segments,
                SegmentAnnotator(self.gateway, events),
                SegmentGrouper(self.gateway),
                record.participant_id,
                record.task_id,
                record.condition,
                cfg,
                self.config.max_concurrency,
                self.show_progress,
            )
        artifacts.write("segments.json", {"segments": [s.to_dict() for s in segments]})
        artifacts.write_workflow("workflow_induced.json", workflow)

    def _score(self, session_dir, record, artifacts):
        workflow = artifacts.read_workflow("workflow_induced.json")
        identifier = HeuristicIdentifier(self.keyword_table, self.config.ai_cue_patterns)
        resolved = identify_ai_steps(
            workflow, self.config.ai_step_mode, self.gateway, identifier, self.config.max_concurrency, self.show_progress
        )
        expansions = expand_all(
            resolved,
            self.gateway,
            self.config.counterfactual_context_steps,
            self.config.max_replacement_steps,
            self.config.max_concurrency,
            self.show_progress,
        )
        result = offloading_score(resolved, expansions)
        ledger = counterfactual_ledger(result, resolved)

        artifacts.write_workflow("workflow.json", resolved)
        artifacts.write("expansions.json", [e.to_dict() for e in result.expansions])
        artifacts.write("counterfactual_ledger.json", ledger)
        write_counterfactual_ledger(ledger, artifacts.path("counterfactual_ledger.csv"))
        artifacts.write("offloading.json", {
            **result.to_dict(),
            "ai_step_mode": self.config.ai_step_mode,
            "step_stats": workflow_step_stats(resolved),
        })
        logger.info(
            f"{record.participant_id}: offloading score {result.score:.4f} "
            f"(n={result.n}, m={result.m}, {self.config.ai_step_mode} AI-step identification)"
        )

    def _label(self, session_dir, record, artifacts):
        workflow = artifacts.read_workflow("workflow.json")
        ledger = label_workflow(
            workflow,
            self.gateway,
            record.task_description or "",
            artifacts.segments(),
            self.config.next_steps_window,
            self.config.max_concurrency,
            self.show_progress,
        )
        artifacts.write("labels.json", {
            "ledger": ledger_to_dict(ledger),
            "expansion_length_by_label": expansion_length_by_label(ledger, artifacts.expansions()),
        })

    def _baselines(self, session_dir, record, artifacts):
        workflow = artifacts.read_workflow("workflow.json")
        trace = artifacts.trace() if artifacts.has("ingest") else []
        measures, provenance = compute_baselines(
            workflow, trace, artifacts.segments(), record, self.config, self.keyword_table
        )
        for mode, provenance_map in provenance.items():
            artifacts.write(f"provenance_{mode}.json", provenance_map.to_dict())
        artifacts.write("baselines.json", {
            "measures": measures.to_dict(),
            "provenance": {mode: pm.summary() for mode, pm in sorted(provenance.items())},
        })

    def _recall(self, session_dir, record, artifacts):
        if not record.recall_answers:
            logger.warning(f"{record.participant_id}: no recall answers; recall not graded")
            artifacts.write("recall.json", {"mean": None, "grades": [], "note": "no recall answers"})
            return
        grades = grade_participant(
            record, record.repo_path, self.gateway, self.question_bank, self.config, self.show_progress
        )
        document = {"mean": recall_score(grades) if grades else None, "grades": [g.to_dict() for g in grades]}
        if not grades:
            document["note"] = "no answer matched the question bank"
        artifacts.write("recall.json", document)
        write_grade_ledger(document["grades"], artifacts.path("grade_ledger.csv"))

    # Reports

    def assemble_report(self, record, artifacts):
        """RelianceReport from whatever artifacts exist for the participant."""
        config = self.config
        offloading = artifacts.read("offloading.json") if artifacts.has("score") else None

        process_distribution = output_use_distribution = None
        if artifacts.has("label"):
            ledger = ledger_from_dict(artifacts.read("labels.json")["ledger"])
            workflow = artifacts.read_workflow("workflow.json")
            process_distribution = {
                mode: label_distribution(process_labels(ledger), workflow, mode, ProcessType).to_dict()
                for mode in DENOMINATOR_MODES
            }
            output_use_distribution = {
                mode: label_distribution(output_use_labels(ledger), workflow, mode, OutputUse).to_dict()
                for mode in DENOMINATOR_MODES
            }

        baselines = provenance = None
        if artifacts.has("baselines"):
            document = artifacts.read("baselines.json")
            baselines = document["measures"]
            provenance = document["provenance"] or None

        recall = None
        if artifacts.has("recall"):
            recall = artifacts.read("recall.json")
            if offloading is not None:
                verdict = overreliance_verdict(
                    record.participant_id,
                    offloading["score"],
                    recall["mean"],
                    ClusterRule(config.cluster_min_recall, config.cluster_min_offloading),
                    config.recall_threshold,
                    config.offloading_threshold,
                )
                recall = {**recall, "verdict": verdict.to_dict()}

        return RelianceReport(
            participant_id=record.participant_id,
            task_id=record.task_id.value,
            condition=record.condition.value,
            config_fingerprint=config.fingerprint(),
            ai_step_mode=offloading.get("ai_step_mode") if offloading else None,
            offloading=offloading,
            process_distribution=process_distribution,
            output_use_distribution=output_use_distribution,
            baselines=baselines,
            provenance=provenance,
            recall=recall,
            survey=dict(record.survey),
        )

    def run_session(self, session_dir, stages):
        record = load_participant(session_dir)
        artifacts = SessionArtifacts(self.out_dir, record.participant_id)
        session_stages = [s for s in stages if s in SESSION_STAGES]
        self.check_dependencies(stages, artifacts)
        for stage in session_stages:
            logger.info(f"Running stage '{stage}' for {record.participant_id}")
            getattr(self, f"_{stage}")(session_dir, record, artifacts)
        report = self.assemble_report(record, artifacts)
        write_report(report, artifacts.root)
        return report

    # Cohort

    def run_cohort(self, session_dirs, stages):
        """Run stages for every session, then cohort tables and validity suites."""
        stages = tuple(stages)
        records = [load_participant(d) for d in session_dirs]
        duplicates = [pid for pid, c in Counter(r.participant_id for r in records).items() if c > 1]
        if duplicates:
            raise DataValidationError(f"Duplicate participant ids in cohort: {duplicates}")

        parallel = self.config.max_concurrency > 1 and len(session_dirs) > 1
        show_inner = self.show_progress
        if parallel:
            self.show_progress = False
        try:
            reports = run_ordered(
                lambda _, d: self.run_session(d, stages),
                session_dirs,
                self.config.max_concurrency,
                desc="Participants",
                show_progress=show_inner and parallel,
            )
        finally:
            self.show_progress = show_inner

        result = CohortResult(list(reports))
        scored = [r for r in reports if r.offloading_score is not None]
        if any(r.recall_mean is not None for r in scored):
            rule = ClusterRule(self.config.cluster_min_recall, self.config.cluster_min_offloading)
            points = [(r.participant_id, r.offloading_score, r.recall_mean) for r in scored]
            try:
                result.verdicts, result.fit = overreliance_analysis(
                    points, rule, self.config.recall_threshold, self.config.offloading_threshold
                )
            except FitError as e:
                logger.warning(f"Score-vs-recall fit skipped: {e}")
                result.verdicts = [
                    overreliance_verdict(*p, rule, self.config.recall_threshold, self.config.offloading_threshold)
                    for p in points
                ]

        workflows = [
            SessionArtifacts(self.out_dir, r.participant_id).read_workflow("workflow.json")
            for r in records if SessionArtifacts(self.out_dir, r.participant_id).has("score")
        ]
        if workflows:
            result.tool_mentions = tool_mention_fractions(workflows, self.keyword_table)

        if "validate" in stages:
            result.validity = self.run_validity(records)
        write_cohort(result.reports, result.verdicts, result.fit, self.out_dir)
        return result

    def run_validity(self, records):
        """Sensitivity, stability and (when configured) same-task suites."""
        config = self.config
        out = os.path.join(self.out_dir, "validity")
        workflows, expansions, baseline = [], {}, {}
        for record in records:
            artifacts = SessionArtifacts(self.out_dir, record.participant_id)
            if not artifacts.has("score"):
                raise DependencyError("score", f"Validation needs scored workflows; {record.participant_id} has none")
            w = artifacts.read_workflow("workflow.json")
            workflows.append(w)
            expansions[w.participant_id] = artifacts.expansions()
            baseline[w.participant_id] = artifacts.read("offloading.json")["score"]

        eligible = [w for w in workflows if w.ai_steps()]
        if len(eligible) != len(workflows):
            logger.warning(f"{len(workflows) - len(eligible)} workflows without AI steps left out of the sensitivity suite")
        validity = {"sensitivity": sensitivity_suite(
            eligible, expansions, config.sensitivity_fractions, config.seed, config.wilcoxon_exact_cutoff
        )}
        write_document(validity["sensitivity"], os.path.join(out, "sensitivity.json"))

        if config.stability_variants:
            runs = stability_runs(workflows, config.stability_variants, self.gateway, config, baseline=baseline)
            validity["stability"] = stability_suite(runs, config.wilcoxon_exact_cutoff)
            write_document(validity["stability"], os.path.join(out, "stability.json"))
        else:
            logger.warning("No stability variants configured; stability suite skipped")
            validity["stability"] = None

        if config.same_task_dataset:
            humans, instructions = load_same_task_dataset(config.same_task_dataset)
            synthetic = synthesize_workflows(instructions, config.synthetic_per_task, self.gateway)
            same_task = same_task_validation(
                humans,
                synthetic,
                self.gateway,
                config.n_perm,
                config.seed,
                config.max_concurrency,
                config.wilcoxon_exact_cutoff,
                config.permutation_exact_cutoff,
            )
            validity["same_task"] = same_task
            write_document(same_task, os.path.join(out, "same_task.json"))
            write_similarity_matrix(same_task, os.path.join(out, "similarity_matrix.csv"))
        else:
            logger.info("SAME_TASK_DATASET not set; same-task validation skipped")
            validity["same_task"] = None
        return validity

    def load_reports(self, session_dirs):
        """Assemble reports from existing artifacts without running any stage."""
        reports = []
        for session_dir in session_dirs:
            record = load_participant(session_dir)
            artifacts = SessionArtifacts(self.out_dir, record.participant_id)
            if not artifacts.has("score"):
                raise DependencyError("score", f"No scored workflow for {record.participant_id} in {self.out_dir}")
            reports.append(self.assemble_report(record, artifacts))
        return reports


def run_pipeline(session_dir, config, stages, gateway, out_dir):
    """Run stages for one session directory (or a directory of sessions).

    Returns:
        CohortResult: reports plus validity reports when requested
    """
    pipeline = Pipeline(config, gateway, out_dir)
    return pipeline.run_cohort(discover_sessions([session_dir]), parse_stages(stages) if isinstance(stages, str) else tuple(stages))


def run_cohort(session_dirs, config, stages, gateway, out_dir):
    pipeline = Pipeline(config, gateway, out_dir)
    return pipeline.run_cohort(discover_sessions(session_dirs), tuple(stages))


def _welch(short, long):
    try:
        return welch_t_test(short, long, "two_sided").to_dict()
    except DegenerateInputError as e:
        if len(short) >= 2 and len(long) >= 2 and np.ptp(short + long) == 0:
            return {"statistic": 0.0, "p_value": 1.0, "method": "identical", "n_effective": len(short) + len(long),
                    "alternative": "two_sided", "note": "both groups constant and equal"}
        logger.warning(f"Welch test degenerate: {e}")
        return "degenerate"


def _correlation(x, y, what):
    try:
        return pearson_r(x, y)
    except DegenerateInputError as e:
        logger.warning(f"Correlation {what} degenerate: {e}")
        return "degenerate"


def _mean(values):
    return float(np.mean(values)) if values else None


def _pooled_distribution(reports, section, vocabulary):
    counts = {member.value: 0 for member in vocabulary}
    steps = 0
    for report in reports:
        distribution = getattr(report, section)
        if not distribution:
            continue
        for label, count in distribution["labeled_interactions"]["counts"].items():
            counts[label] += count
        steps += report.offloading["n"]
    labeled = sum(counts.values())
    return {
        "counts": counts,
        "labeled_interactions": {k: (c / labeled if labeled else 0.0) for k, c in counts.items()},
        "workflow_steps": {k: (c / steps if steps else 0.0) for k, c in counts.items()},
    }


def compare_conditions(reports):
    """Short-vs-long comparison of every measure across a cohort.

    Welch p-values per measure and Pearson r against the condition coded
    short = 1, long = 0. Unlabeled participants are excluded with a warning.

    Raises:
        DataValidationError: If a condition has fewer than two scored participants
    """
    reports = sorted(reports, key=lambda r: r.participant_id)
    labeled = [r for r in reports if r.condition in CONDITION_CODES and r.offloading_score is not None]
    excluded = len(reports) - len(labeled)
    if excluded:
        logger.warning(f"Excluded {excluded} participants without a condition label or score from the comparison")
    groups = {c: [r for r in labeled if r.condition == c] for c in CONDITION_CODES}
    for condition, members in groups.items():
        if len(members) < 2:
            raise DataValidationError(f"Condition '{condition}' has {len(members)} participants; need at least two")

    measures = {}
    for measure in COMPARED_MEASURES:
        rows = [(r.condition, r.measure(measure)) for r in labeled if r.measure(measure) is not None]
        short = [float(v) for c, v in rows if c == Condition.SHORT.value]
        long = [float(v) for c, v in rows if c == Condition.LONG.value]
        measures[measure] = {
            "n_short": len(short),
            "n_long": len(long),
            "mean_short": _mean(short),
            "mean_long": _mean(long),
            "welch": _welch(short, long),
            "pearson_r": _correlation([CONDITION_CODES[c] for c, _ in rows], [float(v) for _, v in rows], f"of {measure} with condition"),
        }

    per_task = {}
    for task in sorted({r.task_id for r in labeled}):
        entry = {}
        for condition in CONDITION_CODES:
            values = [r.offloading_score for r in labeled if r.task_id == task and r.condition == condition]
            entry[condition] = {"n": len(values), "mean_offloading": _mean(values)}
        per_task[task] = entry

    by_tool = {}
    for r in labeled:
        tool = (r.baselines or {}).get("primary_tool") or "none"
        by_tool.setdefault(tool, []).append(r.offloading_score)
    by_tool = {tool: {"n": len(v), "mean_offloading": _mean(v)} for tool, v in sorted(by_tool.items())}

    survey = {}
    for name in SURVEY_MEASURES:
        pairs = [(r.offloading_score, r.survey[name]) for r in labeled if name in r.survey]
        survey[name] = _correlation([p[0] for p in pairs], [p[1] for p in pairs], f"of offloading with {name}")

    recall_rows = [{m: labeled_report.measure(m) for m in COMPARED_MEASURES} for labeled_report in labeled]
    recall_measures = [m for m in COMPARED_MEASURES if m != "recall_mean"]

    return {
        "participants": {"included": len(labeled), "excluded": excluded,
                         **{c: len(groups[c]) for c in CONDITION_CODES}},
        "condition_coding": dict(CONDITION_CODES),
        "measures": measures,
        "per_task": per_task,
        "by_primary_tool": by_tool,
        "survey_correlations": survey,
        "recall_correlations": recall_correlations(recall_rows, recall_measures),
        "label_distributions": {
            c: {
                "process": _pooled_distribution(groups[c], "process_distribution", ProcessType),
                "output_use": _pooled_distribution(groups[c], "output_use_distribution", OutputUse),
            }
            for c in CONDITION_CODES
        },
    }
