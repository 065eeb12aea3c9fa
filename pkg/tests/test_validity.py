import json

import pytest

from src.exceptions import ConfigError, DataValidationError
from src.models import CounterfactualExpansion
from src.offloading_service import offloading_score
from src.validity_service import (
    LabeledWorkflow,
    PerturbationSpec,
    StabilityRun,
    load_same_task_dataset,
    paraphrase_workflow,
    parse_variant,
    perturb_workflow,
    perturbation_count,
    round_half_up,
    same_task_validation,
    sensitivity_suite,
    stability_runs,
    stability_suite,
    synthesize_workflows,
)

from conftest import StaticEmbedder, ai_pattern_workflow


def _expansions(w, k=3):
    return [CounterfactualExpansion(s.index, tuple(f"manual {s.index}.{j}" for j in range(k))) for s in w.ai_steps()]


def _cohort(size, ai_steps=20, k=3):
    dataset = [ai_pattern_workflow("a" * ai_steps + "h" * i, participant_id=f"p{i:02d}") for i in range(size)]
    return dataset, {w.participant_id: _expansions(w, k) for w in dataset}


@pytest.mark.parametrize(
    "fraction, ai_steps, expected",
    [(0.2, 10, 2), (0.05, 3, 1), (0.05, 20, 1), (0.10, 20, 2), (0.20, 20, 4), (1.0, 7, 7), (0.25, 2, 1)],
)
def test_perturbation_count(fraction, ai_steps, expected):
    assert perturbation_count(fraction, ai_steps) == expected


def test_round_half_up():
    assert round_half_up(0.5) == 1
    assert round_half_up(2.5) == 3
    assert round_half_up(1.49) == 1


def test_fraction_must_be_in_unit_interval():
    with pytest.raises(DataValidationError):
        PerturbationSpec(0.0)
    with pytest.raises(DataValidationError):
        PerturbationSpec(1.5)


def test_perturbation_splices_counterfactual_steps():
    w = ai_pattern_workflow("hahah")
    result = perturb_workflow(w, _expansions(w), PerturbationSpec(1.0))
    assert result.replaced_steps == (1, 3)
    assert result.workflow.n == 9
    assert not result.workflow.ai_steps()
    assert result.expansions == ()
    assert offloading_score(result.workflow, result.expansions).score == 0.0


def test_remaining_expansions_point_at_ai_steps():
    w = ai_pattern_workflow("a" * 10)
    result = perturb_workflow(w, _expansions(w), PerturbationSpec(0.2, rng_seed=4))
    assert len(result.replaced_steps) == 2
    assert [e.source_step_index for e in result.expansions] == [s.index for s in result.workflow.ai_steps()]
    assert result.workflow.n == 14


def test_perturbation_is_seeded():
    w = ai_pattern_workflow("a" * 10)
    a = perturb_workflow(w, _expansions(w), PerturbationSpec(0.3, rng_seed=7))
    b = perturb_workflow(w, _expansions(w), PerturbationSpec(0.3, rng_seed=7))
    assert a == b


def test_nothing_to_perturb():
    w = ai_pattern_workflow("hh")
    with pytest.raises(DataValidationError, match="nothing to perturb"):
        perturb_workflow(w, [], PerturbationSpec(0.2))


def test_single_step_expansions_are_neutral():
    w = ai_pattern_workflow("ahaha")
    result = perturb_workflow(w, _expansions(w, 1), PerturbationSpec(0.5))
    assert offloading_score(result.workflow, result.expansions).score == 0.0


def test_sensitivity_drops_grow_with_fraction():
    dataset, expansions = _cohort(12)
    report = sensitivity_suite(dataset, expansions, fractions=(0.05, 0.10, 0.20))
    entries = report["fractions"]
    perturbed = [e["mean_perturbed"] for e in entries]
    assert perturbed[0] > perturbed[1] > perturbed[2]
    assert all(e["mean_relative_change"] < 0 for e in entries)
    for entry in entries:
        assert entry["wilcoxon"]["p_value"] < 0.05
        assert entry["paired_t"]["p_value"] < 0.05


def test_sensitivity_needs_ai_steps_everywhere():
    dataset, expansions = _cohort(2)
    human = ai_pattern_workflow("hh", participant_id="p99")
    with pytest.raises(DataValidationError):
        sensitivity_suite(dataset + [human], {**expansions, "p99": []})
    with pytest.raises(DataValidationError):
        sensitivity_suite(dataset[:1], expansions)


def test_identical_runs_are_stable():
    scores = {f"p{i}": 0.1 * i for i in range(6)}
    report = stability_suite([StabilityRun("a", scores), StabilityRun("b", dict(scores))])
    pair = report["pairwise"][0]
    assert pair["wilcoxon"]["p_value"] == 1.0
    assert pair["unstable"] is False
    assert report["unstable"] is False


def test_uniform_shift_is_flagged():
    base = {f"p{i}": 0.05 * i for i in range(10)}
    shifted = {p: s + 0.3 for p, s in base.items()}
    report = stability_suite([StabilityRun("a", base), StabilityRun("b", shifted)])
    assert report["pairwise"][0]["wilcoxon"]["p_value"] < 0.05
    assert report["unstable"] is True
    assert report["runs"][1]["mean"] == pytest.approx(report["runs"][0]["mean"] + 0.3)


def test_stability_runs_must_cover_same_participants():
    with pytest.raises(DataValidationError):
        stability_suite([StabilityRun("a", {"p1": 0.1}), StabilityRun("b", {"p2": 0.1})])
    with pytest.raises(DataValidationError):
        stability_suite([StabilityRun("a", {"p1": 0.1})])


@pytest.mark.parametrize(
    "variant, expected",
    [
        ("effort:low", {"params": (("reasoning_effort", "low"),)}),
        ("model:gpt-5.1", {"model_id": "gpt-5.1"}),
        ("paraphrase", {"paraphrase": True}),
    ],
)
def test_parse_variant(variant, expected):
    assert parse_variant(variant) == expected


def test_unknown_variant_is_config_error():
    with pytest.raises(ConfigError):
        parse_variant("temperature:2")


def test_stability_runs_rescore_each_variant(gateway, backend, config):
    dataset = [ai_pattern_workflow("hah", participant_id="p01"), ai_pattern_workflow("haah", participant_id="p02")]
    baseline = {"p01": 0.4, "p02": 0.5}
    runs = stability_runs(dataset, ["effort:low", "paraphrase"], gateway, config, baseline)
    assert [r.name for r in runs] == ["baseline", "effort:low", "paraphrase"]
    assert runs[1].scores == pytest.approx(baseline)
    assert runs[2].scores == pytest.approx(baseline)
    assert ("counterfactual", config.models["counterfactual"], (("reasoning_effort", "low"),)) in backend.calls
    assert backend.count("step_paraphrase") >= 2
    assert stability_suite(runs)["unstable"] is False


def test_paraphrase_keeps_actors(gateway):
    w = ai_pattern_workflow("haha")
    paraphrased = paraphrase_workflow(w, 1.0, 0, gateway)
    assert [s.actor for s in paraphrased.steps] == [s.actor for s in w.steps]
    assert all(s.text.startswith("Reworded: ") for s in paraphrased.steps)


def test_synthesize_workflows(gateway):
    synthetic = synthesize_workflows({"timer": ["Build a timer"], "recipes": ["Build a recipe box"]}, 2, gateway)
    assert [s.workflow_id for s in synthetic] == [
        "synthetic-recipes-0", "synthetic-recipes-1", "synthetic-timer-0", "synthetic-timer-1",
    ]
    assert synthetic[2].steps[0] == "Plan: Build a timer"


HUMANS = [LabeledWorkflow("h-a", "a", ("human a",)), LabeledWorkflow("h-b", "b", ("human b",))]


def test_same_task_geometry():
    embedder = StaticEmbedder({"human a": [1, 0], "human b": [0, 1], "syn a": [1, 0], "syn mid": [1, 1]})
    synthetic = [LabeledWorkflow("s1", "a", ("syn a",)), LabeledWorkflow("s2", "b", ("syn mid",))]
    report = same_task_validation(HUMANS, synthetic, embedder)
    assert [row["d"] for row in report["d"]] == pytest.approx([1.0, 0.0])
    assert report["similarity"]["human_ids"] == ["h-a", "h-b"]
    assert report["similarity"]["rows"][0]["values"] == pytest.approx([1.0, 0.0])


def test_same_task_three_positive_differences():
    embedder = StaticEmbedder({"human a": [1, 0], "human b": [0, 1], "syn": [1, 0]})
    synthetic = [LabeledWorkflow(f"s{i}", "a", ("syn",)) for i in range(3)]
    report = same_task_validation(HUMANS, synthetic, embedder)
    assert report["permutation"]["p_value"] == pytest.approx(1 / 8)
    assert report["permutation"]["method"] == "exact"
    assert report["wilcoxon"]["p_value"] == pytest.approx(1 / 8)


def test_same_task_needs_two_tasks_and_matching_humans():
    embedder = StaticEmbedder({"human a": [1, 0], "syn": [1, 0]})
    with pytest.raises(DataValidationError):
        same_task_validation(HUMANS[:1], [LabeledWorkflow("s", "a", ("syn",))], embedder)
    with pytest.raises(DataValidationError):
        same_task_validation(HUMANS, [LabeledWorkflow("s", "c", ("syn",))], embedder)
    with pytest.raises(DataValidationError):
        same_task_validation(HUMANS, [], embedder)


def test_load_same_task_dataset(tmp_path):
    path = tmp_path / "same_task.json"
    path.write_text(json.dumps({
        "human_workflows": [{"workflow_id": "h1", "task_id": "a", "steps": ["x", "y"]}],
        "task_instructions": {"a": ["Do a"]},
    }), encoding="utf-8")
    humans, instructions = load_same_task_dataset(str(path))
    assert humans[0].text == "x\ny"
    assert instructions == {"a": ["Do a"]}
    with pytest.raises(ConfigError):
        load_same_task_dataset(str(tmp_path / "missing.json"))


def test_same_task_clustered_cohort_is_significant():
    tasks = ["a", "b", "c", "d"]
    vectors, humans, synthetic = {}, [], []
    for t, task in enumerate(tasks):
        home = [0.0] * 4
        home[t] = 1.0
        vectors[f"human {task}"] = home
        humans.append(LabeledWorkflow(f"h-{task}", task, (f"human {task}",)))
        for j in range(5):
            drift = list(home)
            drift[(t + 1) % 4] = 0.02 * (5 * t + j + 1)
            vectors[f"syn {task}{j}"] = drift
            synthetic.append(LabeledWorkflow(f"s-{task}{j}", task, (f"syn {task}{j}",)))

    report = same_task_validation(humans, synthetic, StaticEmbedder(vectors))
    assert len(report["d"]) == 20
    assert all(row["d"] > 0 for row in report["d"])
    assert report["permutation"]["method"] == "exact"
    assert report["permutation"]["p_value"] == pytest.approx(1 / 2**20)
    assert report["permutation"]["p_value"] <= 0.001
    assert report["wilcoxon"]["p_value"] <= 0.001
