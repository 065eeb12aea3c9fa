"""
Report documents and CSV exports.

Everything here formats values computed elsewhere; no measure is derived in
this module.
"""

import csv
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional

try:
    from .config import TOOL_VERSION
    from .exceptions import DataValidationError
    from .models import dump_document
except ImportError:
    from config import TOOL_VERSION
    from exceptions import DataValidationError
    from models import dump_document

logger = logging.getLogger(__name__)

MEASURE_FIELDS = [
    "participant_id",
    "task_id",
    "condition",
    "offloading_score",
    "n",
    "m",
    "ai_step_mode",
    "ai_interaction_count",
    "ai_time_fraction",
    "ai_code_fraction_strict",
    "ai_code_fraction_soft",
    "primary_tool",
    "recall_mean",
    "tlx_load",
    "trust",
    "ownership",
    "cognitive_split",
]


@dataclass(frozen=True)
class RelianceReport:
    """Per-participant reliance report.

    Sections are None when their stage has not produced output.
    """

    participant_id: str
    task_id: str
    condition: str
    config_fingerprint: str
    ai_step_mode: Optional[str] = None
    offloading: Optional[dict] = None
    process_distribution: Optional[dict] = None
    output_use_distribution: Optional[dict] = None
    baselines: Optional[dict] = None
    provenance: Optional[dict] = None
    recall: Optional[dict] = None
    survey: Dict[str, float] = field(default_factory=dict)
    tool_version: str = TOOL_VERSION

    def __post_init__(self):
        if self.offloading is not None and not 0.0 <= self.offloading["score"] < 1.0:
            raise DataValidationError(f"{self.participant_id}: offloading score {self.offloading['score']} outside [0, 1)")
        for section in (self.process_distribution, self.output_use_distribution):
            for mode, distribution in (section or {}).items():
                for label, value in distribution["fractions"].items():
                    if not 0.0 <= value <= 1.0:
                        raise DataValidationError(f"{self.participant_id}: {mode} fraction of {label} is {value}")
        if self.recall is not None and self.recall.get("mean") is not None and not 0.0 <= self.recall["mean"] <= 1.0:
            raise DataValidationError(f"{self.participant_id}: recall mean {self.recall['mean']} outside [0, 1]")

    def to_dict(self):
        return {
            "participant_id": self.participant_id,
            "task_id": self.task_id,
            "condition": self.condition,
            "config_fingerprint": self.config_fingerprint,
            "tool_version": self.tool_version,
            "ai_step_mode": self.ai_step_mode,
            "offloading": self.offloading,
            "process_distribution": self.process_distribution,
            "output_use_distribution": self.output_use_distribution,
            "baselines": self.baselines,
            "provenance": self.provenance,
            "recall": self.recall,
            "survey": dict(sorted(self.survey.items())),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            participant_id=data["participant_id"],
            task_id=data["task_id"],
            condition=data["condition"],
            config_fingerprint=data["config_fingerprint"],
            ai_step_mode=data.get("ai_step_mode"),
            offloading=data.get("offloading"),
            process_distribution=data.get("process_distribution"),
            output_use_distribution=data.get("output_use_distribution"),
            baselines=data.get("baselines"),
            provenance=data.get("provenance"),
            recall=data.get("recall"),
            survey=dict(data.get("survey") or {}),
            tool_version=data.get("tool_version", TOOL_VERSION),
        )

    @property
    def offloading_score(self):
        return self.offloading["score"] if self.offloading else None

    @property
    def recall_mean(self):
        return self.recall.get("mean") if self.recall else None

    def measure(self, name):
        """Value of a cohort measure by column name, or None."""
        if name == "offloading_score":
            return self.offloading_score
        if name in ("n", "m"):
            return self.offloading[name] if self.offloading else None
        if name == "recall_mean":
            return self.recall_mean
        if name in self.survey:
            return self.survey[name]
        if self.baselines and name in self.baselines:
            return self.baselines[name]
        return None


def write_document(document, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(dump_document(document))
    logger.debug(f"Wrote {path}")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path, fieldnames, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fieldnames})
    logger.debug(f"Wrote {len(rows)} rows to {path}")


def write_report(report, out_dir):
    """Write report.json and the per-participant distribution and provenance CSVs."""
    write_document(report.to_dict(), os.path.join(out_dir, "report.json"))

    rows = []
    for kind, section in (("process", report.process_distribution), ("output_use", report.output_use_distribution)):
        for mode, distribution in sorted((section or {}).items()):
            for label in distribution["counts"]:
                rows.append({
                    "kind": kind,
                    "denominator_mode": mode,
                    "label": label,
                    "count": distribution["counts"][label],
                    "fraction": distribution["fractions"][label],
                    "denominator": distribution["denominator"],
                })
    if rows:
        write_csv(
            os.path.join(out_dir, "label_distributions.csv"),
            ["kind", "denominator_mode", "label", "count", "fraction", "denominator"],
            rows,
        )

    if report.provenance:
        rows = []
        for mode, summary in sorted(report.provenance.items()):
            rows.append({"mode": mode, **summary["counts"], "coverage": summary["coverage"],
                         "ai_code_fraction": summary["ai_code_fraction"], "files": summary["files"],
                         "excluded_files": summary["excluded_files"]})
        write_csv(
            os.path.join(out_dir, "provenance_summary.csv"),
            ["mode", "human", "tool", "unknown", "excluded", "coverage", "ai_code_fraction", "files", "excluded_files"],
            rows,
        )


def write_counterfactual_ledger(ledger, path):
    rows = []
    for step in ledger["steps"]:
        replacements = step.get("replacements")
        rows.append({
            "index": step["index"],
            "actor": step["actor"],
            "text": step["text"],
            "k": step.get("k", ""),
            "replacements": " | ".join(replacements) if replacements else "",
        })
    write_csv(path, ["index", "actor", "text", "k", "replacements"], rows)


def write_grade_ledger(grades, path):
    rows = [{**g, "evidence": " ".join(g["evidence"])} for g in grades]
    write_csv(path, ["question_id", "label", "score", "evidence", "reason"], rows)


def write_cohort(reports, verdicts, fit, out_dir):
    """Cohort tables: measures, verdicts and the offloading-vs-recall scatter."""
    reports = sorted(reports, key=lambda r: r.participant_id)
    write_csv(
        os.path.join(out_dir, "measures.csv"),
        MEASURE_FIELDS,
        [{name: (getattr(r, name) if name in ("participant_id", "task_id", "condition", "ai_step_mode") else r.measure(name))
          for name in MEASURE_FIELDS} for r in reports],
    )
    if verdicts:
        fields = ["participant_id", "offloading", "recall_mean", "understood", "overreliant", "in_outlier_cluster", "status"]
        write_csv(os.path.join(out_dir, "verdicts.csv"), fields, [v.to_dict() for v in verdicts])
        scatter = [
            {"participant_id": v.participant_id, "offloading": v.offloading, "recall_mean": v.recall_mean,
             "in_outlier_cluster": v.in_outlier_cluster}
            for v in verdicts if v.recall_mean is not None
        ]
        write_csv(os.path.join(out_dir, "recall_scatter.csv"), ["participant_id", "offloading", "recall_mean", "in_outlier_cluster"], scatter)
    write_document(
        {
            "participants": [r.participant_id for r in reports],
            "verdicts": [v.to_dict() for v in verdicts or ()],
            "fit": fit.to_dict() if fit else None,
        },
        os.path.join(out_dir, "cohort.json"),
    )


def write_comparison(comparison, out_dir):
    write_document(comparison, os.path.join(out_dir, "comparison.json"))
    rows = []
    for measure, entry in comparison["measures"].items():
        welch = entry["welch"]
        rows.append({
            "measure": measure,
            "n_short": entry["n_short"],
            "n_long": entry["n_long"],
            "mean_short": entry["mean_short"],
            "mean_long": entry["mean_long"],
            "welch_t": welch if isinstance(welch, str) else welch["statistic"],
            "welch_p": welch if isinstance(welch, str) else welch["p_value"],
            "pearson_r": entry["pearson_r"],
        })
    write_csv(
        os.path.join(out_dir, "comparison.csv"),
        ["measure", "n_short", "n_long", "mean_short", "mean_long", "welch_t", "welch_p", "pearson_r"],
        rows,
    )


def write_similarity_matrix(same_task, path):
    """Rows are synthetic workflows, columns human workflows, cells cosine similarity."""
    human_ids = same_task["similarity"]["human_ids"]
    rows = []
    for row in same_task["similarity"]["rows"]:
        entry = {"synthetic_id": row["synthetic_id"], "synthetic_task": row["synthetic_task"]}
        entry.update(dict(zip(human_ids, row["values"])))
        rows.append(entry)
    write_csv(path, ["synthetic_id", "synthetic_task"] + list(human_ids), rows)
