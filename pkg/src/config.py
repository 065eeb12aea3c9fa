"""
Configuration module for the Offloading Score Toolkit.
"""

import hashlib
import json
import os
import logging
from dotenv import load_dotenv, dotenv_values

try:
    from .exceptions import ConfigError
except ImportError:
    from exceptions import ConfigError

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"

ENV_PREFIX = "OFFLOAD_"

DEFAULT_EMPTY_STEP_PATTERNS = [
    "no meaningful action visible",
    "idle or non-captured actions",
]

DEFAULT_EXCLUDE_GLOBS = [
    "package-lock.json",
    "yarn.lock",
    "pnpm-lock.yaml",
    "*.lock",
    "node_modules/*",
    "dist/*",
    "build/*",
    ".git/*",
    ".next/*",
    "coverage/*",
    "__pycache__/*",
    "*.min.js",
    "*.map",
]

TEMPLATE_IDS = (
    "counterfactual",
    "process_label",
    "output_use_label",
    "recall_grade",
    "ai_step_classify",
    "segment_annotate",
    "segment_group",
    "step_paraphrase",
    "synthetic_workflow",
)

DEFAULT_MODELS = {
    "counterfactual": "gpt-5.2",
    "process_label": "gpt-5.2",
    "output_use_label": "gpt-5.2",
    "recall_grade": "gpt-5-mini",
    "ai_step_classify": "gpt-5.2",
    "segment_annotate": "gpt-5.1",
    "segment_group": "gpt-5.1",
    "step_paraphrase": "gpt-5-mini",
    "synthetic_workflow": "gpt-5.2",
}

# Settings that never enter the fingerprint.
_UNFINGERPRINTED = {"log_file", "log_level", "show_progress", "cache_dir", "max_concurrency"}


def _parse_bool(raw):
    value = str(raw).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_list(raw, sep=","):
    return [item.strip() for item in str(raw).split(sep) if item.strip()]


def _parse_float_list(raw):
    return [float(item) for item in _parse_list(raw)]


class Config:
    """Configuration class to manage environment variables and settings."""

    # key -> (attribute, parser)
    _KEYS = {
        "MSE_THRESHOLD": ("mse_threshold", float),
        "EMPTY_STEP_PATTERNS": ("empty_step_patterns", lambda v: _parse_list(v, ";")),
        "AI_STEP_MODE": ("ai_step_mode", str),
        "AI_CUE_PATTERNS": ("ai_cue_patterns", lambda v: _parse_list(v, ";")),
        "MAX_REPLACEMENT_STEPS": ("max_replacement_steps", int),
        "NEXT_STEPS_WINDOW": ("next_steps_window", int),
        "COUNTERFACTUAL_CONTEXT_STEPS": ("counterfactual_context_steps", int),
        "IDLE_GAP_SECONDS": ("idle_gap_seconds", float),
        "PASTE_HEAVY_RATIO": ("paste_heavy_ratio", float),
        "MIN_FRAGMENT_CHARS": ("min_fragment_chars", int),
        "ATTRIBUTION_EXCLUDE_GLOBS": ("attribution_exclude_globs", _parse_list),
        "KEYWORD_TABLE_PATH": ("keyword_table_path", str),
        "QUESTION_BANK_PATH": ("question_bank_path", str),
        "SNIPPET_WINDOW_LINES": ("snippet_window_lines", int),
        "SNIPPET_OVERLAP": ("snippet_overlap", float),
        "RETRIEVAL_K": ("retrieval_k", int),
        "RECALL_THRESHOLD": ("recall_threshold", float),
        "OFFLOADING_THRESHOLD": ("offloading_threshold", float),
        "CLUSTER_MIN_RECALL": ("cluster_min_recall", float),
        "CLUSTER_MIN_OFFLOADING": ("cluster_min_offloading", float),
        "SENSITIVITY_FRACTIONS": ("sensitivity_fractions", _parse_float_list),
        "STABILITY_VARIANTS": ("stability_variants", _parse_list),
        "PARAPHRASE_FRACTION": ("paraphrase_fraction", float),
        "N_PERM": ("n_perm", int),
        "SEED": ("seed", int),
        "WILCOXON_EXACT_CUTOFF": ("wilcoxon_exact_cutoff", int),
        "PERMUTATION_EXACT_CUTOFF": ("permutation_exact_cutoff", int),
        "SAME_TASK_DATASET": ("same_task_dataset", str),
        "SYNTHETIC_PER_TASK": ("synthetic_per_task", int),
        "EMBEDDING_BACKEND": ("embedding_backend", str),
        "EMBEDDING_MODEL": ("embedding_model", str),
        "EMBEDDING_DIM": ("embedding_dim", int),
        "OPENAI_BASE_URL": ("openai_base_url", str),
        "TIMEOUT_MS": ("timeout_ms", int),
        "RETRY_ATTEMPTS": ("retry_attempts", int),
        "RETRY_DELAY_MS": ("retry_delay_ms", int),
        "JUDGMENT_RETRY_ATTEMPTS": ("judgment_retry_attempts", int),
        "CACHE_DIR": ("cache_dir", str),
        "MAX_CONCURRENCY": ("max_concurrency", int),
        "SHOW_PROGRESS": ("show_progress", _parse_bool),
        "LOG_FILE": ("log_file", str),
        "LOG_LEVEL": ("log_level", str),
    }

    def __init__(self):
        """Initialize configuration with default values."""
        # Induction
        self.mse_threshold = 500.0
        self.empty_step_patterns = list(DEFAULT_EMPTY_STEP_PATTERNS)

        # AI step identification and counterfactuals
        self.ai_step_mode = "judge"
        self.ai_cue_patterns = [r"\bai\b", r"\bassistant\b", r"\bllm\b", r"\bchatbot\b"]
        self.max_replacement_steps = 25
        self.counterfactual_context_steps = 5

        # Labeling
        self.next_steps_window = 5

        # Baselines and attribution
        self.idle_gap_seconds = 120.0
        self.paste_heavy_ratio = 0.8
        self.min_fragment_chars = 4
        self.attribution_exclude_globs = list(DEFAULT_EXCLUDE_GLOBS)
        self.keyword_table_path = None

        # Recall
        self.question_bank_path = None
        self.snippet_window_lines = 40
        self.snippet_overlap = 0.5
        self.retrieval_k = 5
        self.recall_threshold = 0.33
        self.offloading_threshold = 0.33
        self.cluster_min_recall = 0.33
        self.cluster_min_offloading = 0.40

        # Validity
        self.sensitivity_fractions = [0.05, 0.10, 0.20]
        self.stability_variants = ["effort:low", "effort:high", "paraphrase"]
        self.paraphrase_fraction = 0.2
        self.n_perm = 10000
        self.seed = 0
        self.wilcoxon_exact_cutoff = 12
        self.permutation_exact_cutoff = 20
        self.same_task_dataset = None
        self.synthetic_per_task = 5

        # Gateway
        self.models = dict(DEFAULT_MODELS)
        self.embedding_backend = "hash"
        self.embedding_model = "sentence-transformers/all-MiniLM-L6-v2"
        self.embedding_dim = 384
        self.openai_base_url = None
        self.timeout_ms = 60000
        self.retry_attempts = 3
        self.retry_delay_ms = 1000
        self.judgment_retry_attempts = 1
        self.cache_dir = None

        # Runtime
        self.max_concurrency = 4
        self.show_progress = True
        self.log_file = "offloading.log"
        self.log_level = "INFO"

    def load_config(self, config_path=None):
        """Load configuration from the environment, .env and an optional config file.

        Args:
            config_path: Path to a KEY=value config file; its values win over the environment

        Returns:
            Config: self, for chaining
        """
        try:
            load_dotenv()

            values = {}
            for key, raw in os.environ.items():
                if key.startswith(ENV_PREFIX):
                    values[key[len(ENV_PREFIX):]] = raw

            if config_path:
                if not os.path.isfile(config_path):
                    raise ConfigError(f"Config file not found: {config_path}")
                file_values = dotenv_values(config_path)
                values.update({k: v for k, v in file_values.items() if v is not None})
                logger.info(f"Loaded config file {config_path}")

            self.apply(values)
            logger.info("Configuration loaded successfully.")
            return self

        except ConfigError:
            raise
        except Exception as e:
            logger.error(f"Error loading configuration: {e}")
            raise ConfigError(str(e)) from e

    def apply(self, values):
        """Apply raw KEY=value settings to this configuration.

        Args:
            values: Mapping of upper-case keys to raw string values
        """
        for key, raw in values.items():
            key = key.upper()
            if key.startswith("MODEL_"):
                template_id = key[len("MODEL_"):].lower()
                if template_id not in TEMPLATE_IDS:
                    raise ConfigError(f"Unknown template in {key}")
                self.models[template_id] = str(raw).strip()
                continue
            if key not in self._KEYS:
                logger.debug(f"Ignoring unknown config key {key}")
                continue
            attribute, parser = self._KEYS[key]
            try:
                setattr(self, attribute, parser(raw))
            except ValueError as e:
                raise ConfigError(f"Invalid value for {key}: {raw!r} ({e})") from e
        self.validate()

    def validate(self):
        """Check value ranges; raises ConfigError on the first violation."""
        if self.mse_threshold < 0:
            raise ConfigError("MSE_THRESHOLD must be non-negative")
        if self.ai_step_mode not in ("judge", "heuristic"):
            raise ConfigError(f"AI_STEP_MODE must be 'judge' or 'heuristic', got {self.ai_step_mode!r}")
        if self.max_replacement_steps < 1:
            raise ConfigError("MAX_REPLACEMENT_STEPS must be at least 1")
        if self.next_steps_window < 1:
            raise ConfigError("NEXT_STEPS_WINDOW must be at least 1")
        if not 0 < self.paste_heavy_ratio <= 1:
            raise ConfigError("PASTE_HEAVY_RATIO must lie in (0, 1]")
        if not 0 <= self.snippet_overlap < 1:
            raise ConfigError("SNIPPET_OVERLAP must lie in [0, 1)")
        if self.snippet_window_lines < 1:
            raise ConfigError("SNIPPET_WINDOW_LINES must be at least 1")
        for fraction in self.sensitivity_fractions:
            if not 0 < fraction <= 1:
                raise ConfigError(f"Sensitivity fraction {fraction} outside (0, 1]")
        if self.n_perm < 1:
            raise ConfigError("N_PERM must be at least 1")
        if self.embedding_backend not in ("hash", "sentence_transformers", "openai"):
            raise ConfigError(f"Unknown EMBEDDING_BACKEND {self.embedding_backend!r}")
        if self.max_concurrency < 1:
            raise ConfigError("MAX_CONCURRENCY must be at least 1")

    def model_for(self, template_id):
        """Model id configured for a prompt template."""
        return self.models[template_id]

    def effective_settings(self):
        """Settings that influence results, as a plain dict."""
        settings = {}
        for attribute, _ in self._KEYS.values():
            if attribute in _UNFINGERPRINTED:
                continue
            settings[attribute] = getattr(self, attribute)
        settings["models"] = dict(sorted(self.models.items()))
        return settings

    def fingerprint(self):
        """SHA-256 over the canonical JSON of the effective settings."""
        payload = json.dumps(self.effective_settings(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()
