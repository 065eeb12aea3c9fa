"""
Assistant keyword table: maps AI-tool names to the keywords that mention them.
"""

import json
import logging
import os
import re
from collections import Counter

try:
    from .exceptions import ConfigError
except ImportError:
    from exceptions import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_TABLE_PATH = os.path.join(os.path.dirname(__file__), "data", "assistant_keywords.json")


class KeywordTable:
    """Ordered tool -> keywords table with a single compiled matcher.

    Keywords are matched case-insensitively as whole tokens; the alternation
    lists longer keywords first so "github copilot" is one mention, not two.
    """

    def __init__(self, entries):
        self.entries = [(tool, tuple(k.lower() for k in keywords)) for tool, keywords in entries]
        self.tools = [tool for tool, _ in self.entries]
        self._owner = {}
        for tool, keywords in self.entries:
            for keyword in keywords:
                self._owner.setdefault(keyword, tool)
        alternation = "|".join(re.escape(k) for k in sorted(self._owner, key=lambda k: (-len(k), k)))
        self._pattern = re.compile(rf"(?<![a-z0-9])(?:{alternation})(?![a-z0-9])", re.IGNORECASE)

    @classmethod
    def load(cls, path=None):
        path = path or DEFAULT_TABLE_PATH
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except (OSError, ValueError) as e:
            raise ConfigError(f"Cannot read keyword table {path}: {e}") from e
        if not isinstance(data, dict) or not data:
            raise ConfigError(f"Keyword table {path} must be a non-empty object")
        logger.debug(f"Loaded {len(data)} tools from keyword table {path}")
        return cls(data.items())

    def mentions(self, text):
        """Counter of tool -> keyword hits in text."""
        counts = Counter()
        for match in self._pattern.finditer(text):
            counts[self._owner[match.group(0).lower()]] += 1
        return counts

    def mentions_any(self, text):
        return self._pattern.search(text) is not None
