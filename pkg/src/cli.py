"""
Command-line interface for the Offloading Score Toolkit.
"""

import argparse
import logging
import os

try:
    from .pipeline import SESSION_STAGES, Pipeline, compare_conditions, discover_sessions, parse_stages
    from .report_writer import write_comparison
except ImportError:
    from pipeline import SESSION_STAGES, Pipeline, compare_conditions, discover_sessions, parse_stages
    from report_writer import write_comparison

logger = logging.getLogger(__name__)

STAGE_COMMANDS = ("ingest", "induce", "score", "label", "baselines", "recall", "validate")


def _fmt(value, digits=4):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


class CLI:
    """Command-line interface over the pipeline."""

    def build_parser(self):
        parser = argparse.ArgumentParser(
            prog="python -m src.main",
            description="Measure reliance on AI assistants from programming-session traces.",
        )
        parser.add_argument("--config", help="KEY=value config file (same format as .env)")
        gateway = parser.add_mutually_exclusive_group()
        gateway.add_argument("--replay", metavar="BUNDLE", help="serve every judgment from a replay bundle")
        gateway.add_argument("--record", metavar="BUNDLE", help="call the backend and record replies to a bundle")
        parser.add_argument("--seed", type=int, help="override the SEED setting")
        parser.add_argument("--stages", help="comma-separated stages to run (default depends on the command)")
        parser.add_argument("--out", default="out", help="artifact and report directory (default: out)")

        commands = parser.add_subparsers(dest="command", required=True)
        for name in STAGE_COMMANDS:
            sub = commands.add_parser(name, help=f"run the '{name}' stage")
            sub.add_argument("sessions", nargs="+", help="session directories or a directory of sessions")
        sub = commands.add_parser("report", help="run stages and write reports and cohort tables")
        sub.add_argument("sessions", nargs="+", help="session directories or a directory of sessions")
        sub = commands.add_parser("compare", help="compare measures between the short and long conditions")
        sub.add_argument("sessions", nargs="+", help="session directories or a directory of sessions")
        return parser

    def stages_for(self, args):
        if args.stages:
            return parse_stages(args.stages)
        if args.command == "report":
            return SESSION_STAGES
        return (args.command,)

    def run(self, args, config, gateway):
        """Execute a parsed command.

        Args:
            args: argparse namespace from build_parser()
            config: Loaded Config
            gateway: LLMGateway in the requested mode

        Returns:
            int: process exit code
        """
        pipeline = Pipeline(config, gateway, args.out)
        sessions = discover_sessions(args.sessions)

        if args.command == "compare":
            reports = pipeline.load_reports(sessions)
            comparison = compare_conditions(reports)
            write_comparison(comparison, args.out)
            self._print_comparison(comparison)
            return 0

        stages = self.stages_for(args)
        result = pipeline.run_cohort(sessions, stages)
        self._print_reports(result)
        if result.validity:
            self._print_validity(result.validity)
        print(f"\nArtifacts written to {os.path.abspath(args.out)}")
        return 0

    def _print_reports(self, result):
        print("\n=== Participants ===")
        print(f"{'participant':<16}{'condition':<11}{'score':>8}{'n':>5}{'m':>5}{'AI steps':>10}{'AI code':>9}{'recall':>8}  status")
        verdicts = {v.participant_id: v.status for v in result.verdicts}
        for report in result.reports:
            offloading = report.offloading or {}
            baselines = report.baselines or {}
            print(
                f"{report.participant_id:<16}{report.condition:<11}{_fmt(report.offloading_score):>8}"
                f"{_fmt(offloading.get('n')):>5}{_fmt(offloading.get('m')):>5}"
                f"{report.ai_step_mode or '-':>10}"
                f"{_fmt(baselines.get('ai_code_fraction_strict'), 3):>9}{_fmt(report.recall_mean, 3):>8}"
                f"  {verdicts.get(report.participant_id, '')}"
            )
        if result.fit:
            print(f"\nRecall fit: slope {result.fit.slope:.3f}, intercept {result.fit.intercept:.3f}, n={result.fit.n_points}")

    def _print_validity(self, validity):
        print("\n=== Sensitivity ===")
        for entry in validity["sensitivity"]["fractions"]:
            print(f"  {entry['fraction']:.2f}: mean relative change {entry['mean_relative_change']:+.4f}")
        if validity.get("stability"):
            print("\n=== Stability ===")
            for pair in validity["stability"]["pairwise"]:
                mark = "UNSTABLE" if pair["unstable"] else "ok"
                print(f"  {pair['runs'][0]} vs {pair['runs'][1]}: p = {pair['wilcoxon']['p_value']:.4f} ({mark})")
        if validity.get("same_task"):
            same_task = validity["same_task"]
            print("\n=== Same-task similarity ===")
            print(f"  mean d = {same_task['mean_d']:.4f}, permutation p = {same_task['permutation']['p_value']:.6f}")

    def _print_comparison(self, comparison):
        print("\n=== Short vs long ===")
        counts = comparison["participants"]
        print(f"Included {counts['included']} participants ({counts['excluded']} excluded)")
        for measure, entry in comparison["measures"].items():
            welch = entry["welch"]
            p = welch if isinstance(welch, str) else _fmt(welch["p_value"])
            print(
                f"  {measure:<26} short {_fmt(entry['mean_short'])}  long {_fmt(entry['mean_long'])}  "
                f"p {p}  r {_fmt(entry['pearson_r'], 3)}"
            )
