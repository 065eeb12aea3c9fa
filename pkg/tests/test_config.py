import threading
import time

import pytest

from src.batch_runner import run_ordered
from src.config import Config
from src.exceptions import ConfigError


def test_file_values_override_defaults(tmp_path):
    path = tmp_path / "settings.env"
    path.write_text(
        "MSE_THRESHOLD=250\nSENSITIVITY_FRACTIONS=0.1, 0.3\nSHOW_PROGRESS=no\n"
        "AI_CUE_PATTERNS=\\bagent\\b;\\bbot\\b\nMODEL_COUNTERFACTUAL=local-model\n",
        encoding="utf-8",
    )
    config = Config().load_config(str(path))
    assert config.mse_threshold == 250.0
    assert config.sensitivity_fractions == [0.1, 0.3]
    assert config.show_progress is False
    assert config.ai_cue_patterns == [r"\bagent\b", r"\bbot\b"]
    assert config.model_for("counterfactual") == "local-model"


def test_environment_prefix(monkeypatch):
    monkeypatch.setenv("OFFLOAD_RETRIEVAL_K", "3")
    assert Config().load_config().retrieval_k == 3


@pytest.mark.parametrize(
    "values",
    [
        {"MSE_THRESHOLD": "-1"},
        {"AI_STEP_MODE": "guess"},
        {"SENSITIVITY_FRACTIONS": "0.2,1.5"},
        {"SHOW_PROGRESS": "maybe"},
        {"MAX_CONCURRENCY": "zero"},
        {"MODEL_NO_SUCH_TEMPLATE": "m"},
        {"EMBEDDING_BACKEND": "telepathy"},
    ],
)
def test_invalid_values_raise_config_error(values):
    with pytest.raises(ConfigError):
        Config().apply(values)


def test_fingerprint_ignores_runtime_settings():
    a, b = Config(), Config()
    b.log_file = "elsewhere.log"
    b.max_concurrency = 16
    assert a.fingerprint() == b.fingerprint()
    b.seed = 1
    assert a.fingerprint() != b.fingerprint()


def test_run_ordered_keeps_input_order():
    def _slow(index, item):
        time.sleep(0.01 * (5 - index))
        return item * 2

    assert run_ordered(_slow, [1, 2, 3, 4, 5], max_workers=4, show_progress=False) == [2, 4, 6, 8, 10]


def test_run_ordered_raises_first_failure_in_input_order():
    started = threading.Event()

    def _op(index, item):
        if index == 3:
            started.set()
            raise KeyError("late")
        if index == 1:
            started.wait(1)
            raise ValueError("early")
        return item

    with pytest.raises(ValueError):
        run_ordered(_op, range(5), max_workers=5, show_progress=False)


def test_run_ordered_empty():
    assert run_ordered(lambda i, x: x, [], show_progress=False) == []
