import pytest

from src.attribution_service import (
    AttributionSettings,
    LineLabel,
    attribute_code,
    collect_evidence,
    is_excluded,
    label_line,
)
from src.exceptions import DataValidationError
from src.models import Actor, Segment, WorkflowStep, read_trace

from conftest import make_workflow, write_session

SEGMENTS = [Segment(0, 2), Segment(3, 4), Segment(5, 5)]


def _workflow(first_step="(editing generation) Accept the generated timer in App.js", first_actor=Actor.AI_ASSISTED):
    w = make_workflow(["x", "y", "z"])
    return w.with_steps([
        WorkflowStep(0, first_step, first_actor, (0,)),
        WorkflowStep(1, "(writing code) Type the reset handler", Actor.HUMAN_ONLY, (1,)),
        WorkflowStep(2, "(test manually checking) Try it", Actor.HUMAN_ONLY, (2,)),
    ])


@pytest.fixture
def session(tmp_path):
    return write_session(tmp_path)


def _attribute(session, mode, workflow=None):
    trace = read_trace(session / "trace.jsonl")
    return attribute_code(str(session / "repo"), trace, workflow or _workflow(), mode, SEGMENTS)


def test_strict_mode_uses_only_strong_evidence(session):
    provenance = _attribute(session, "strict")
    counts = provenance.counts()
    assert counts["tool"] == 1
    assert counts["human"] == 1
    assert counts["excluded"] == 1
    assert provenance.ai_code_fraction == pytest.approx(1 / 6)
    assert provenance.coverage == pytest.approx(2 / 6)


def test_soft_mode_adds_file_mentions(session):
    strict = _attribute(session, "strict")
    soft = _attribute(session, "soft")
    assert soft.ai_code_fraction == pytest.approx(5 / 6)
    assert strict.tool_lines() <= soft.tool_lines()


def test_lockfiles_and_blank_lines_are_excluded(session):
    provenance = _attribute(session, "strict")
    assert provenance.excluded_files == ("package-lock.json",)
    labels = provenance.files[0].labels
    assert labels[1] is LineLabel.EXCLUDED
    assert provenance.attributable_lines == 6


def test_human_only_session_has_no_strict_tool_lines(session):
    w = _workflow("(writing code) Write the timer", Actor.HUMAN_ONLY)
    assert _attribute(session, "strict", w).counts()["tool"] == 0


def test_paste_heavy_segment_counts_as_tool_evidence(session):
    trace = read_trace(session / "trace.jsonl")
    evidence = collect_evidence(trace, _workflow("(writing code) Write it", Actor.HUMAN_ONLY), SEGMENTS, AttributionSettings(paste_heavy_ratio=0.5))
    assert "const [seconds, setSeconds] = useState(60);" in evidence.paste_heavy
    assert evidence.paste_ai_episode == ""


def test_label_precedence():
    evidence = collect_evidence([], None)
    evidence.typed = "x = compute(1)"
    evidence.paste_any = "x = compute(1)"
    assert label_line("  x = compute(1)", evidence, "soft", 4, False) == (LineLabel.HUMAN, "typed_match")
    assert label_line("}", evidence, "soft", 4, True) == (LineLabel.TOOL, "file_mention_ai_episode")
    assert label_line("}", evidence, "strict", 4, True) == (LineLabel.UNKNOWN, None)


def test_exclusion_globs():
    assert is_excluded("node_modules/react/index.js", ["node_modules/*"])
    assert is_excluded("web/yarn.lock", ["*.lock"])
    assert not is_excluded("src/App.js", ["*.lock"])


def test_unknown_mode_and_missing_repo(tmp_path):
    with pytest.raises(DataValidationError):
        attribute_code(str(tmp_path), [], None, "fuzzy")
    with pytest.raises(DataValidationError):
        attribute_code(str(tmp_path / "missing"), [], None, "strict")
