"""
Gateway to the external judgment and embedding services.

Implements transport retry with exponential backoff, schema-validated
replies, a content-addressed reply cache and record/replay bundles so every
stage can run offline and deterministically.
"""

import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import Future
from dataclasses import dataclass
from typing import Tuple

import numpy as np

try:
    from .exceptions import BackendError, ConfigError, DataValidationError, ProtocolError, ReplayError
    from .schemas import is_registered, parse_and_validate
except ImportError:
    from exceptions import BackendError, ConfigError, DataValidationError, ProtocolError, ReplayError
    from schemas import is_registered, parse_and_validate

logger = logging.getLogger(__name__)

MODES = ("live", "record", "replay")
BUNDLE_VERSION = 1


@dataclass(frozen=True)
class JudgmentRequest:
    prompt_template_id: str
    filled_prompt: str
    response_schema_id: str
    model_id: str
    template_version: str = "v1"
    params: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.filled_prompt or not self.filled_prompt.strip():
            raise DataValidationError("JudgmentRequest needs a non-empty prompt")
        if not is_registered(self.response_schema_id):
            raise DataValidationError(f"Unregistered response schema '{self.response_schema_id}'")

    def request_hash(self):
        payload = json.dumps(
            {
                "template_id": self.prompt_template_id,
                "template_version": self.template_version,
                "model_id": self.model_id,
                "prompt": self.filled_prompt,
                "params": [list(p) for p in sorted(self.params)],
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EmbeddingVector:
    values: Tuple[float, ...]

    @property
    def dim(self):
        return len(self.values)


class OpenAIChatBackend:
    """Chat completions against an OpenAI-compatible endpoint."""

    is_local = False

    def __init__(self, base_url=None, timeout_ms=60000):
        from openai import OpenAI

        api_key = os.getenv("OPENAI_API_KEY", "").strip()
        if not api_key:
            raise ConfigError("OPENAI_API_KEY is not set; use --replay for offline runs")
        self.client = OpenAI(api_key=api_key, base_url=base_url or None, timeout=timeout_ms / 1000.0)

    def complete(self, model_id, prompt, params):
        response = self.client.chat.completions.create(
            model=model_id,
            messages=[{"role": "user", "content": prompt}],
            **dict(params),
        )
        return response.choices[0].message.content


class HashEmbedder:
    """Deterministic test embedder: seeded-hash unit vectors.

    The vector for a text depends only on (seed, dim, text), so it is the
    same on every machine.
    """

    is_local = True

    def __init__(self, dim=384, seed=0):
        self.dim = dim
        self.seed = seed
        self.model_id = f"hash-embedder/{dim}/{seed}"

    def vector_for(self, text):
        digest = hashlib.sha256(f"{self.seed}:{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def embed(self, texts):
        return [self.vector_for(t).tolist() for t in texts]


class SentenceTransformerEmbedder:
    is_local = True

    def __init__(self, model_name):
        from sentence_transformers import SentenceTransformer

        self.model_id = model_name
        self._model = SentenceTransformer(model_name)

    def embed(self, texts):
        return [list(map(float, v)) for v in self._model.encode(list(texts))]


class OpenAIEmbedder:
    is_local = False

    def __init__(self, model_name, base_url=None, timeout_ms=60000):
        from openai import OpenAI

        self.model_id = model_name
        self.client = OpenAI(
            api_key=os.getenv("OPENAI_API_KEY", ""), base_url=base_url or None, timeout=timeout_ms / 1000.0
        )

    def embed(self, texts):
        response = self.client.embeddings.create(model=self.model_id, input=list(texts))
        return [list(item.embedding) for item in response.data]


def build_embedder(config):
    if config.embedding_backend == "hash":
        return HashEmbedder(config.embedding_dim, config.seed)
    if config.embedding_backend == "sentence_transformers":
        return SentenceTransformerEmbedder(config.embedding_model)
    if config.embedding_backend == "openai":
        return OpenAIEmbedder(config.embedding_model, config.openai_base_url, config.timeout_ms)
    raise ConfigError(f"Unknown embedding backend {config.embedding_backend!r}")


class ReplayBundle:
    """Recorded judgments and embeddings keyed by request hash."""

    def __init__(self, judgments=None, embeddings=None):
        self.judgments = dict(judgments or {})
        self.embeddings = dict(embeddings or {})

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as handle:
                document = json.load(handle)
        except FileNotFoundError as e:
            raise ConfigError(f"Replay bundle not found: {path}") from e
        except ValueError as e:
            raise ConfigError(f"Replay bundle {path} is not valid JSON: {e}") from e
        if document.get("version") != BUNDLE_VERSION:
            raise ConfigError(f"Unsupported replay bundle version {document.get('version')!r}")
        return cls(document.get("judgments"), document.get("embeddings"))

    def save(self, path):
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        document = {"version": BUNDLE_VERSION, "judgments": self.judgments, "embeddings": self.embeddings}
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(document, handle, sort_keys=True, ensure_ascii=False, indent=2)
            handle.write("\n")


class LLMGateway:
    """Single client for chat judgments and embeddings.

    Modes:
        live:   call the backend, cache replies in memory (and CACHE_DIR if set)
        record: like live, and write every reply to the bundle on save_bundle()
        replay: serve replies from the bundle only; a miss raises ReplayError
    """

    def __init__(self, config, mode="live", bundle_path=None, chat_backend=None, embedder=None):
        if mode not in MODES:
            raise ConfigError(f"Unknown gateway mode {mode!r}")
        if mode != "live" and not bundle_path:
            raise ConfigError(f"Gateway mode '{mode}' needs a bundle path")
        self.config = config
        self.mode = mode
        self.bundle_path = bundle_path
        self._chat_backend = chat_backend
        self._embedder = embedder

        if mode == "replay":
            self.bundle = ReplayBundle.load(bundle_path)
        elif mode == "record" and os.path.isfile(bundle_path):
            self.bundle = ReplayBundle.load(bundle_path)
        else:
            self.bundle = ReplayBundle()

        self._lock = threading.Lock()
        self._inflight = {}
        self._dim = None
        self.external_calls = 0

    @classmethod
    def from_config(cls, config, replay=None, record=None):
        if replay and record:
            raise ConfigError("--replay and --record are mutually exclusive")
        if replay:
            return cls(config, "replay", replay)
        if record:
            return cls(config, "record", record)
        return cls(config, "live")

    @property
    def embedder(self):
        if self._embedder is None:
            self._embedder = build_embedder(self.config)
        return self._embedder

    def _chat(self):
        if self._chat_backend is None:
            self._chat_backend = OpenAIChatBackend(self.config.openai_base_url, self.config.timeout_ms)
        return self._chat_backend

    # Cache

    def _cache_file(self, kind, request_hash):
        if not self.config.cache_dir:
            return None
        return os.path.join(self.config.cache_dir, kind, request_hash[:2], f"{request_hash}.json")

    def _lookup(self, kind, request_hash):
        store = self.bundle.judgments if kind == "judgments" else self.bundle.embeddings
        with self._lock:
            if request_hash in store:
                return store[request_hash]
        path = self._cache_file(kind, request_hash)
        if self.mode != "replay" and path and os.path.isfile(path):
            with open(path, "r", encoding="utf-8") as handle:
                value = json.load(handle)
            with self._lock:
                store[request_hash] = value
            return value
        return None

    def _store(self, kind, request_hash, value):
        store = self.bundle.judgments if kind == "judgments" else self.bundle.embeddings
        with self._lock:
            store[request_hash] = value
        path = self._cache_file(kind, request_hash)
        if path:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(value, handle, sort_keys=True, ensure_ascii=False)

    def _claim(self, request_hash):
        """Return (future, owner). Only the owner performs the external call."""
        with self._lock:
            if request_hash in self._inflight:
                return self._inflight[request_hash], False
            future = Future()
            self._inflight[request_hash] = future
            return future, True

    def _release(self, request_hash):
        with self._lock:
            self._inflight.pop(request_hash, None)

    # Transport

    def _call_with_retry(self, operation, what):
        """Run an external call with exponential backoff and jitter.

        Raises:
            BackendError: After RETRY_ATTEMPTS failed attempts
        """
        attempts = max(1, self.config.retry_attempts)
        base_delay_ms = self.config.retry_delay_ms
        for attempt in range(attempts):
            try:
                with self._lock:
                    self.external_calls += 1
                return operation()
            except Exception as e:
                if attempt < attempts - 1:
                    delay_seconds = (base_delay_ms / 1000.0) * (2 ** attempt)
                    delay_seconds += random.uniform(0, delay_seconds * 0.1)
                    logger.warning(
                        f"{what} attempt {attempt + 1}/{attempts} failed: {e}. Retrying in {delay_seconds:.2f}s..."
                    )
                    time.sleep(delay_seconds)
                else:
                    logger.error(f"{what} failed after {attempts} attempts: {e}")
                    raise BackendError(f"{what} failed after {attempts} attempts: {e}") from e

    # Judgments

    def chat_judgment(self, req):
        """Return the schema-validated reply for a judgment request.

        Args:
            req: JudgmentRequest

        Returns:
            The validated reply (pydantic model or list of step texts)
        """
        request_hash = req.request_hash()
        recorded = self._lookup("judgments", request_hash)
        if recorded is not None:
            return parse_and_validate(req.response_schema_id, recorded["reply"])
        if self.mode == "replay":
            raise ReplayError(request_hash, req.prompt_template_id)

        future, owner = self._claim(request_hash)
        if not owner:
            return parse_and_validate(req.response_schema_id, future.result())
        try:
            reply_text, value = self._judge_live(req)
            self._store("judgments", request_hash, {"template_id": req.prompt_template_id, "reply": reply_text})
            future.set_result(reply_text)
            return value
        except BaseException as e:
            future.set_exception(e)
            raise
        finally:
            self._release(request_hash)

    def _judge_live(self, req):
        attempts = 1 + max(0, self.config.judgment_retry_attempts)
        last_error = None
        for attempt in range(attempts):
            reply_text = self._call_with_retry(
                lambda: self._chat().complete(req.model_id, req.filled_prompt, req.params),
                f"Judgment '{req.prompt_template_id}'",
            )
            try:
                return reply_text, parse_and_validate(req.response_schema_id, reply_text)
            except ProtocolError as e:
                last_error = e
                logger.warning(
                    f"Reply for '{req.prompt_template_id}' failed validation "
                    f"(attempt {attempt + 1}/{attempts}): {e}"
                )
        raise ProtocolError(f"Template '{req.prompt_template_id}' gave no valid reply after {attempts} attempts: {last_error}")

    def judge(self, template, model_id=None, params=(), **values):
        """Fill a prompt template and return its validated reply."""
        req = JudgmentRequest(
            prompt_template_id=template.template_id,
            filled_prompt=template.fill(**values),
            response_schema_id=template.schema_id,
            model_id=model_id or self.config.model_for(template.template_id),
            template_version=template.version,
            params=tuple(sorted(dict(params).items())),
        )
        return self.chat_judgment(req)

    # Embeddings

    def embed_text(self, text):
        """Embed one text; vectors are cached per (text, embedding model)."""
        embedder = self.embedder
        key = hashlib.sha256(
            json.dumps({"model_id": embedder.model_id, "text": text}, sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest()

        values = self._lookup("embeddings", key)
        if values is None:
            if self.mode == "replay" and not embedder.is_local:
                raise ReplayError(key, "embedding")
            if embedder.is_local:
                values = embedder.embed([text])[0]
            else:
                values = self._call_with_retry(lambda: embedder.embed([text])[0], "Embedding")
            if not embedder.is_local:
                self._store("embeddings", key, values)

        vector = EmbeddingVector(tuple(float(v) for v in values))
        with self._lock:
            if self._dim is None:
                self._dim = vector.dim
            elif vector.dim != self._dim:
                raise ProtocolError(f"Embedding dimension drifted from {self._dim} to {vector.dim}")
        return vector

    def save_bundle(self):
        if self.mode == "record":
            with self._lock:
                snapshot = ReplayBundle(self.bundle.judgments, self.bundle.embeddings)
            snapshot.save(self.bundle_path)
            logger.info(
                f"Recorded {len(snapshot.judgments)} judgments and {len(snapshot.embeddings)} embeddings "
                f"to {self.bundle_path}"
            )


def chat_judgment(req, gateway):
    return gateway.chat_judgment(req)


def embed_text(text, gateway):
    return gateway.embed_text(text)
