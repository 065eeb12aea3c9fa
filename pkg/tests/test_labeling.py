import json

import pytest

from src.exceptions import DataValidationError
from src.labeling_service import (
    OutputUse,
    ProcessType,
    build_contexts,
    expansion_length_by_label,
    label_distribution,
    label_workflow,
    ledger_from_dict,
    ledger_to_dict,
    output_use_labels,
    process_labels,
)
from src.llm_gateway import LLMGateway
from src.models import CounterfactualExpansion, Segment, WorkflowStep

from conftest import ScriptedChatBackend, ai_pattern_workflow


@pytest.mark.parametrize("mode", ["labeled_interactions", "workflow_steps"])
def test_distribution_closes_over_vocabulary(mode):
    w = ai_pattern_workflow("ahaha")
    labels = {0: ProcessType.PLANNING, 2: ProcessType.EXECUTION, 4: ProcessType.EXECUTION}
    dist = label_distribution(labels, w, mode)
    assert set(dist.counts) == {p.value for p in ProcessType}
    assert sum(dist.counts.values()) == 3
    assert dist.counts["execution"] == 2
    if mode == "labeled_interactions":
        assert sum(dist.fractions.values()) == pytest.approx(1.0)
    else:
        assert dist.denominator == 5
        assert sum(dist.fractions.values()) == pytest.approx(3 / 5)


def test_empty_labels_give_zero_fractions():
    dist = label_distribution({}, ai_pattern_workflow("hh"), "labeled_interactions", OutputUse)
    assert dist.fractions == {o.value: 0.0 for o in OutputUse}
    assert dist.note == "no labeled interactions"


def test_distribution_rejects_out_of_range_step_and_mode():
    w = ai_pattern_workflow("ha")
    with pytest.raises(DataValidationError):
        label_distribution({5: ProcessType.CONTROL}, w, "labeled_interactions")
    with pytest.raises(DataValidationError):
        label_distribution({}, w, "per_minute")


def test_label_workflow_labels_only_ai_steps(gateway, backend):
    w = ai_pattern_workflow("hahha")
    ledger = label_workflow(w, gateway)
    assert sorted(ledger) == [1, 4]
    assert ledger[1].process.value is ProcessType.EXECUTION
    assert ledger[1].output_use.value is OutputUse.REUSE
    # last step has nothing after it
    assert ledger[4].output_use is None
    assert backend.count("output_use_label") == 1


def test_output_use_prompt_lists_following_steps(config):
    prompts = []

    def _reply(prompt, params):
        prompts.append(prompt)
        return json.dumps({"label": "pushback", "justification": "asks again"})

    gateway = LLMGateway(config, "live", chat_backend=ScriptedChatBackend({"output_use_label": _reply}))
    w = ai_pattern_workflow("hahhhhhhh")
    ledger = label_workflow(w, gateway, task_description="Build a timer", next_window=3)
    assert ledger[1].output_use.value is OutputUse.PUSHBACK
    assert "3. " + w.steps[4].text in prompts[0]
    assert w.steps[5].text not in prompts[0]


def test_contexts_use_segment_annotations():
    base = ai_pattern_workflow("ha")
    w = base.with_steps([
        WorkflowStep(0, "a", base.steps[0].actor, (0,)),
        WorkflowStep(1, "b", base.steps[1].actor, (1, 2)),
    ])
    segments = [Segment(0, 1, "open editor"), Segment(2, 3, "type prompt"), Segment(4, 5, "read answer"), Segment(6, 6, "run")]
    action, workflow = build_contexts(w, 1, segments)
    assert action.previous_action == "open editor"
    assert action.current_action == "type prompt; read answer"
    assert action.next_action == "run"
    assert workflow.next_step == "(none)"


def test_ledger_round_trip_and_expansion_lengths(gateway):
    w = ai_pattern_workflow("hahah")
    ledger = label_workflow(w, gateway)
    assert ledger_from_dict(json.loads(json.dumps(ledger_to_dict(ledger)))) == ledger
    lengths = expansion_length_by_label(ledger, [CounterfactualExpansion(1, ("x", "y")), CounterfactualExpansion(3, ("z",))])
    assert lengths["process"]["execution"] == [2, 1]
    assert lengths["output_use"]["reuse"] == [2, 1]
    assert set(process_labels(ledger)) == {1, 3}
    assert set(output_use_labels(ledger)) == {1, 3}
