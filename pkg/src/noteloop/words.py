"""Word and token rules shared by validators, metrics and the mock backend.

A token is a maximal run of letters, digits and apostrophes; punctuation
never counts toward word limits and comparisons are case-insensitive.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_TOKEN_RE = re.compile(r"[A-Za-z0-9']+")


def tokenize(text: str) -> list[str]:
    """Lowercased tokens of ``text`` in order."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def word_count(text: str) -> int:
    return len(_TOKEN_RE.findall(text))


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    """The shipped stopword list (lowercase)."""
    text = resources.files("noteloop.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )
