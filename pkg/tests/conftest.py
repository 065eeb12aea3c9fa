import json
import re
import threading

import pytest

from src.config import Config
from src.llm_gateway import EmbeddingVector, HashEmbedder, LLMGateway
from src.models import Actor, Condition, TaskId, Workflow, WorkflowStep

AI_MARKERS = ("(reading generation)", "(writing prompt)", "(editing generation)", "chatgpt", "copilot")

# Distinctive phrase of each prompt template.
TEMPLATE_MARKERS = (
    ("counterfactual", "STEP TO REPLACE:"),
    ("process_label", "TARGET action:"),
    ("output_use_label", "FOLLOWING STEPS:"),
    ("recall_grade", "SNIPPETS:"),
    ("ai_step_classify", "TARGET step:"),
    ("segment_annotate", "Segment span:"),
    ("segment_group", "Group consecutive annotated"),
    ("step_paraphrase", "Rewrite this workflow step"),
    ("synthetic_workflow", "TASK REQUEST:"),
)


def template_of(prompt):
    for template_id, marker in TEMPLATE_MARKERS:
        if marker in prompt:
            return template_id
    raise AssertionError(f"Unrecognized prompt: {prompt[:80]!r}")


def _field(prompt, label):
    match = re.search(rf"^{re.escape(label)}\s*(.*)$", prompt, re.MULTILINE)
    return match.group(1).strip() if match else ""


def default_reply(template_id, prompt, params):
    if template_id == "counterfactual":
        return json.dumps(["Search the framework docs", "Write the code by hand", "Check the result in the browser"])
    if template_id == "process_label":
        return json.dumps({"process_type": "Execution", "justification": "turns the plan into code"})
    if template_id == "output_use_label":
        return json.dumps({"label": "Reuse", "justification": "the generated code is pasted next"})
    if template_id == "recall_grade":
        return json.dumps({"answer": "mostly correct", "reason": "src/App.js supports the main claim"})
    if template_id == "ai_step_classify":
        target = _field(prompt, "TARGET step:").lower()
        return json.dumps({"ai_assisted": any(m in target for m in AI_MARKERS), "justification": "marker check"})
    if template_id == "segment_annotate":
        return json.dumps({"description": f"(writing code) Works during {_field(prompt, 'Segment span:')}"})
    if template_id == "segment_group":
        lines = re.findall(r"^(\d+): (.*)$", prompt, re.MULTILINE)
        return json.dumps({"steps": [{"segments": [int(i)], "text": text} for i, text in lines]})
    if template_id == "step_paraphrase":
        return json.dumps({"text": "Reworded: " + _field(prompt, "Step:")})
    if template_id == "synthetic_workflow":
        instruction = prompt.split("TASK REQUEST:", 1)[1].split("Variant:", 1)[0].strip()
        return json.dumps([f"Plan: {instruction}", f"Implement: {instruction}", "Test the page manually"])
    raise AssertionError(template_id)


class ScriptedChatBackend:
    """Offline stand-in for the chat service used to record replay bundles.

    replies maps a template id to a string or a callable (prompt, params) -> str;
    failures makes the first N calls raise a transport error.
    """

    def __init__(self, replies=None, failures=0):
        self.replies = dict(replies or {})
        self.failures = failures
        self.calls = []
        self._lock = threading.Lock()

    def complete(self, model_id, prompt, params):
        template_id = template_of(prompt)
        with self._lock:
            self.calls.append((template_id, model_id, tuple(params)))
            if self.failures > 0:
                self.failures -= 1
                raise ConnectionError("connection reset by peer")
        reply = self.replies.get(template_id)
        if reply is None:
            return default_reply(template_id, prompt, params)
        return reply(prompt, params) if callable(reply) else reply

    def count(self, template_id):
        return sum(1 for t, _, _ in self.calls if t == template_id)


class ExplodingBackend:
    def complete(self, model_id, prompt, params):
        raise AssertionError("replay mode must not reach the backend")


class StaticEmbedder:
    """Embeds texts through a fixed lookup table."""

    def __init__(self, vectors):
        self.vectors = vectors

    def embed_text(self, text):
        return EmbeddingVector(tuple(float(v) for v in self.vectors[text]))


@pytest.fixture
def config(tmp_path):
    cfg = Config()
    cfg.retry_delay_ms = 0
    cfg.show_progress = False
    cfg.max_concurrency = 1
    cfg.embedding_dim = 16
    cfg.log_file = str(tmp_path / "offloading.log")
    return cfg


@pytest.fixture
def backend():
    return ScriptedChatBackend()


@pytest.fixture
def gateway(config, backend):
    return LLMGateway(config, "live", chat_backend=backend, embedder=HashEmbedder(16, 0))


def make_workflow(texts, actors=None, participant_id="p01", task=TaskId.TIMER, condition=Condition.SHORT):
    actors = actors or [Actor.UNKNOWN] * len(texts)
    steps = tuple(WorkflowStep(i, t, a) for i, (t, a) in enumerate(zip(texts, actors)))
    return Workflow(participant_id, task, condition, steps)


def ai_pattern_workflow(pattern, participant_id="p01", condition=Condition.SHORT):
    """Workflow from a string of 'h'/'a' characters (human-only / AI-assisted)."""
    texts, actors = [], []
    for i, c in enumerate(pattern):
        if c == "a":
            texts.append(f"(reading generation) Ask ChatGPT for part {i}")
            actors.append(Actor.AI_ASSISTED)
        else:
            texts.append(f"(writing code) Write part {i} by hand")
            actors.append(Actor.HUMAN_ONLY)
    return make_workflow(texts, actors, participant_id, condition=condition)


SESSION_STEPS = [
    "(reading code) Read the task description and starter files",
    "(writing prompt) Ask ChatGPT for a countdown timer component",
    "(writing code) Paste the timer component into App.js",
    "(test manually checking) Start the timer in the browser",
    "(writing code) Fix the reset button by hand",
]

APP_JS = """import { useState } from 'react';

export function Timer() {
  const [seconds, setSeconds] = useState(60);
  const reset = () => setSeconds(60);
  return <button onClick={reset}>{seconds}</button>;
}
"""


def write_session(
    root,
    participant_id="p01",
    task="timer",
    condition="short",
    steps=None,
    survey=None,
    recall_answers=None,
    with_workflow=True,
    with_repo=True,
):
    """Write a complete session directory and return its path."""
    session = root / participant_id
    session.mkdir(parents=True, exist_ok=True)
    events = [
        {"timestamp_ms": 0, "kind": "click"},
        {"timestamp_ms": 1000, "kind": "key", "payload": "ask for a timer"},
        {"timestamp_ms": 4000, "kind": "paste", "payload": "  const [seconds, setSeconds] = useState(60);"},
        {"timestamp_ms": 6000, "kind": "click"},
        {"timestamp_ms": 9000, "kind": "key", "payload": "  const reset = () => setSeconds(60);"},
        {"timestamp_ms": 10000, "kind": "click"},
    ]
    with open(session / "trace.jsonl", "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(json.dumps(event) + "\n")

    frames = [(0, 0), (2, 0), (3, 200), (4, 200), (5, 0)]
    with open(session / "frames.jsonl", "w", encoding="utf-8") as handle:
        for event_index, value in frames:
            handle.write(json.dumps({"event_index": event_index, "width": 2, "height": 2, "pixels": [value] * 4}) + "\n")

    (session / "participant.json").write_text(json.dumps({
        "participant_id": participant_id,
        "task_id": task,
        "condition": condition,
        "survey": survey if survey is not None else {"tlx_load": 4, "trust": 3, "ownership": 4, "cognitive_split": 2},
        "recall_answers": recall_answers if recall_answers is not None else [
            {"question_id": "timer-state", "answer": "useState keeps the seconds in the Timer component"},
        ],
        "task_description": "Build a countdown timer page",
    }), encoding="utf-8")

    if with_workflow:
        texts = steps or SESSION_STEPS
        workflow = {
            "participant_id": participant_id,
            "task_id": task,
            "condition": condition or "unlabeled",
            "steps": [{"index": i, "text": t, "actor": "unknown", "segment_refs": []} for i, t in enumerate(texts)],
        }
        (session / "workflow.json").write_text(json.dumps(workflow), encoding="utf-8")

    if with_repo:
        repo = session / "repo" / "src"
        repo.mkdir(parents=True)
        (repo / "App.js").write_text(APP_JS, encoding="utf-8")
        (session / "repo" / "package-lock.json").write_text('{"lockfileVersion": 3}\n', encoding="utf-8")
    return session


@pytest.fixture
def session_factory(tmp_path):
    sessions = tmp_path / "sessions"

    def _make(**kwargs):
        return write_session(sessions, **kwargs)

    return _make
