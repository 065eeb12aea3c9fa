import json

import pytest

from src.exceptions import BackendError, ConfigError, DataValidationError, ProtocolError, ReplayError
from src.llm_gateway import EmbeddingVector, HashEmbedder, JudgmentRequest, LLMGateway, ReplayBundle
from src.prompts import AI_STEP_CLASSIFY, COUNTERFACTUAL, PROCESS_LABEL
from src.schemas import parse_and_validate, parse_reply_text

from conftest import ExplodingBackend, ScriptedChatBackend


def _counterfactual(gateway, step="(writing prompt) Ask ChatGPT for a timer", **kwargs):
    return gateway.judge(COUNTERFACTUAL, context_block="- Open App.js", tool_block=step, next_block="(none)", **kwargs)


def test_request_hash_depends_on_every_field():
    base = dict(prompt_template_id="counterfactual", filled_prompt="p", response_schema_id="step_list", model_id="m")
    a = JudgmentRequest(**base)
    assert a.request_hash() == JudgmentRequest(**base).request_hash()
    assert a.request_hash() != JudgmentRequest(**{**base, "model_id": "other"}).request_hash()
    assert a.request_hash() != JudgmentRequest(**base, template_version="v2").request_hash()
    assert a.request_hash() != JudgmentRequest(**base, params=(("reasoning_effort", "low"),)).request_hash()


def test_request_rejects_empty_prompt_and_unknown_schema():
    with pytest.raises(DataValidationError):
        JudgmentRequest("counterfactual", "  ", "step_list", "m")
    with pytest.raises(DataValidationError):
        JudgmentRequest("counterfactual", "p", "no_such_schema", "m")


def test_live_judgment_is_cached(gateway, backend):
    first = _counterfactual(gateway)
    second = _counterfactual(gateway)
    assert first == second == ["Search the framework docs", "Write the code by hand", "Check the result in the browser"]
    assert backend.count("counterfactual") == 1
    assert gateway.external_calls == 1


def test_model_override_and_params_reach_backend(gateway, backend):
    _counterfactual(gateway, model_id="gpt-5.1", params={"reasoning_effort": "low"})
    assert backend.calls[-1] == ("counterfactual", "gpt-5.1", (("reasoning_effort", "low"),))


def test_default_model_comes_from_config(gateway, backend, config):
    config.models["counterfactual"] = "custom-model"
    _counterfactual(gateway)
    assert backend.calls[-1][1] == "custom-model"


def test_record_then_replay_without_backend(tmp_path, config):
    bundle = tmp_path / "bundle.json"
    recorder = LLMGateway(config, "record", str(bundle), chat_backend=ScriptedChatBackend())
    recorded = _counterfactual(recorder)
    label = recorder.judge(
        PROCESS_LABEL,
        previous_action="a", current_action="b", next_action="c",
        previous_workflow_step="d", matched_workflow_step="e", next_workflow_step="f",
    )
    recorder.save_bundle()

    document = json.loads(bundle.read_text(encoding="utf-8"))
    assert document["version"] == 1
    assert {entry["template_id"] for entry in document["judgments"].values()} == {"counterfactual", "process_label"}

    replayer = LLMGateway(config, "replay", str(bundle), chat_backend=ExplodingBackend())
    assert _counterfactual(replayer) == recorded
    assert replayer.judge(
        PROCESS_LABEL,
        previous_action="a", current_action="b", next_action="c",
        previous_workflow_step="d", matched_workflow_step="e", next_workflow_step="f",
    ) == label
    assert replayer.external_calls == 0


def test_replay_miss_names_the_request(tmp_path, config):
    bundle = tmp_path / "bundle.json"
    ReplayBundle().save(str(bundle))
    replayer = LLMGateway(config, "replay", str(bundle), chat_backend=ExplodingBackend())
    with pytest.raises(ReplayError) as info:
        _counterfactual(replayer)
    assert info.value.template_id == "counterfactual"
    assert len(info.value.request_hash) == 64
    assert info.value.exit_code == 4


def test_replay_needs_an_existing_bundle(tmp_path, config):
    with pytest.raises(ConfigError):
        LLMGateway(config, "replay", str(tmp_path / "missing.json"))


def test_replay_and_record_are_exclusive(config):
    with pytest.raises(ConfigError):
        LLMGateway.from_config(config, replay="a.json", record="b.json")


def test_transport_failures_retry_then_succeed(config):
    backend = ScriptedChatBackend(failures=2)
    gateway = LLMGateway(config, "live", chat_backend=backend)
    assert len(_counterfactual(gateway)) == 3
    assert backend.count("counterfactual") == 3


def test_transport_failures_exhaust_retries(config):
    config.retry_attempts = 2
    gateway = LLMGateway(config, "live", chat_backend=ScriptedChatBackend(failures=5))
    with pytest.raises(BackendError, match="after 2 attempts"):
        _counterfactual(gateway)


def test_schema_failure_retries_same_prompt_once(config):
    replies = iter(["not json at all", '["Write the timer by hand"]'])
    backend = ScriptedChatBackend({"counterfactual": lambda prompt, params: next(replies)})
    gateway = LLMGateway(config, "live", chat_backend=backend)
    assert _counterfactual(gateway) == ["Write the timer by hand"]
    assert backend.count("counterfactual") == 2


def test_persistent_schema_failure_is_protocol_error(config):
    backend = ScriptedChatBackend({"ai_step_classify": '{"ai_assisted": "perhaps"}'})
    gateway = LLMGateway(config, "live", chat_backend=backend)
    with pytest.raises(ProtocolError):
        gateway.judge(AI_STEP_CLASSIFY, previous_step="a", current_step="b", next_step="c")
    assert backend.count("ai_step_classify") == 2


def test_cache_dir_serves_later_gateways(tmp_path, config):
    config.cache_dir = str(tmp_path / "cache")
    backend = ScriptedChatBackend()
    _counterfactual(LLMGateway(config, "live", chat_backend=backend))
    second = LLMGateway(config, "live", chat_backend=ExplodingBackend())
    assert len(_counterfactual(second)) == 3
    assert list((tmp_path / "cache" / "judgments").rglob("*.json"))


def test_hash_embedder_is_deterministic_unit_norm(gateway):
    a = gateway.embed_text("Write the timer")
    b = gateway.embed_text("Write the timer")
    assert isinstance(a, EmbeddingVector)
    assert a == b
    assert a.dim == 16
    assert sum(v * v for v in a.values) == pytest.approx(1.0)
    assert HashEmbedder(16, 0).vector_for("x").tolist() == list(HashEmbedder(16, 0).embed(["x"])[0])


def test_local_embeddings_work_in_replay_mode(tmp_path, config):
    bundle = tmp_path / "bundle.json"
    ReplayBundle().save(str(bundle))
    replayer = LLMGateway(config, "replay", str(bundle), embedder=HashEmbedder(16, 0))
    assert replayer.embed_text("anything").dim == 16


def test_embedding_dimension_drift_is_protocol_error(config):
    class DriftingEmbedder:
        is_local = True
        model_id = "drift"

        def __init__(self):
            self.dim = 2

        def embed(self, texts):
            self.dim += 1
            return [[1.0] * self.dim for _ in texts]

    gateway = LLMGateway(config, "live", embedder=DriftingEmbedder())
    gateway.embed_text("a")
    with pytest.raises(ProtocolError, match="drifted"):
        gateway.embed_text("b")


@pytest.mark.parametrize(
    "text, expected",
    [
        ('["a", "b"]', ["a", "b"]),
        ('Here you go:\n```json\n["a", "b"]\n```', ["a", "b"]),
        ("['a', 'b']", ["a", "b"]),
    ],
)
def test_parse_reply_text_tolerates_wrapping(text, expected):
    assert parse_reply_text(text) == expected


def test_label_values_are_normalized():
    reply = parse_and_validate("recall_grade", '{"answer": "Mostly_Correct", "reason": "ok"}')
    assert reply.answer == "mostly correct"


def test_blank_step_is_rejected():
    with pytest.raises(ProtocolError):
        parse_and_validate("step_list", '["ok", "   "]')
