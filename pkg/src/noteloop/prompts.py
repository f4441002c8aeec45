"""Prompt rendering, response parsing and constraint validation.

The four prompt templates ship as external text files under
``data/templates/`` with ``{{name}}`` placeholders, so they can be
audited without reading code.  Rendering is pure and byte-stable:
identical inputs produce identical prompts.

Validators never raise on bad model output; they return a
:class:`ValidationReport` listing violations so the gateway can decide
to retry or filter (it never displays a violating item).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .stemmer import same_lemma
from .words import tokenize, word_count

MAX_EXTRACTION_KEYWORDS = 4
WORDS_PER_DERIVATION = 2
CANDIDATE_COUNT = 3
MAX_CANDIDATE_WORDS = 10
CONTEXT_SENTENCES = 15

TEMPLATE_KINDS = ("extraction", "derive_exclusive", "derive_contextual", "organize")

_EXPECTED_PLACEHOLDERS = {
    "extraction": {"New Speech Input"},
    "derive_exclusive": {"Original Keyword", "Currently Displaying Context Keywords"},
    "derive_contextual": {
        "Previous Speech",
        "Original Keyword",
        "Currently Displaying Context Keywords",
    },
    "organize": {
        "Previous Speech",
        "Selected Question Words",
        "Question Words in Customized Keywords",
        "Selected Keywords",
    },
}

_PLACEHOLDER_RE = re.compile(r"\{\{([^#/{}][^{}]*)\}\}")
_IF_OPEN_RE = re.compile(r"^\{\{#if ([a-z_]+)\}\}$")
_IF_CLOSE = "{{/if}}"
_ENUMERATION_RE = re.compile(r"^\s*(?:\d+\s*[.)]\s*|[-*•]\s*)")


class TemplateError(ValueError):
    """A template file is malformed or has unexpected placeholders."""


class EmptyResponseError(ValueError):
    """The model returned no usable items; the gateway should retry."""


def _strip_enumeration(line: str) -> str:
    return _ENUMERATION_RE.sub("", line).strip()


def parse_keyword_response(raw: str) -> list[str]:
    """Newline-separated keywords: trimmed, de-enumerated, lowercased,
    deduplicated in order.  Raises :class:`EmptyResponseError` when
    nothing survives."""
    seen: set[str] = set()
    words: list[str] = []
    for line in raw.splitlines():
        word = _strip_enumeration(line).lower()
        if not word or word in seen:
            continue
        seen.add(word)
        words.append(word)
    if not words:
        raise EmptyResponseError("no keywords in response")
    return words


def parse_sentence_response(raw: str) -> list[str]:
    """Candidate sentences, one per non-empty line, first three kept."""
    sentences: list[str] = []
    for line in raw.splitlines():
        text = _strip_enumeration(line)
        if text:
            sentences.append(text)
    if not sentences:
        raise EmptyResponseError("no sentences in response")
    return sentences[:CANDIDATE_COUNT]


def format_keywords(words: list[str] | tuple[str, ...]) -> str:
    """Inverse of :func:`parse_keyword_response` for compliant lists."""
    return "\n".join(words)


@dataclass(frozen=True)
class Violation:
    index: int
    code: str
    detail: str


@dataclass
class ValidationReport:
    items: list[str]
    violations: list[Violation] = field(default_factory=list)
    valid_indexes: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def valid_items(self) -> list[str]:
        return [self.items[i] for i in self.valid_indexes]


def _contains_token_seq(sentence_tokens: list[str], keyword: str) -> bool:
    needle = tokenize(keyword)
    if not needle:
        return False
    n = len(needle)
    for i in range(len(sentence_tokens) - n + 1):
        if sentence_tokens[i : i + n] == needle:
            return True
    return False


def validate_extraction(keywords: list[str], sentence_text: str) -> ValidationReport:
    """Keywords must be literal (case-insensitive) tokens of the sentence,
    at most four.  Valid items are the contained ones, first four."""
    report = ValidationReport(items=list(keywords))
    sentence_tokens = tokenize(sentence_text)
    contained: list[int] = []
    for i, keyword in enumerate(keywords):
        if _contains_token_seq(sentence_tokens, keyword):
            contained.append(i)
        else:
            report.violations.append(Violation(i, "containment", f"{keyword!r} not in sentence"))
    if len(keywords) > MAX_EXTRACTION_KEYWORDS:
        report.violations.append(
            Violation(-1, "count", f"{len(keywords)} keywords > {MAX_EXTRACTION_KEYWORDS}")
        )
    report.valid_indexes = contained[:MAX_EXTRACTION_KEYWORDS]
    return report


def validate_derivation(
    words: list[str], origin: str, displayed: list[str] | tuple[str, ...]
) -> ValidationReport:
    """Derived words must not repeat displayed keywords nor share the
    origin's lemma; a response should carry exactly two."""
    report = ValidationReport(items=list(words))
    displayed_set = {w.lower() for w in displayed}
    origin = origin.lower()
    good: list[int] = []
    for i, word in enumerate(words):
        lowered = word.lower()
        if lowered in displayed_set:
            report.violations.append(Violation(i, "overlap", f"{word!r} already displayed"))
        elif same_lemma(lowered, origin):
            report.violations.append(Violation(i, "lemma", f"{word!r} shares lemma with {origin!r}"))
        else:
            good.append(i)
    if len(words) != WORDS_PER_DERIVATION:
        report.violations.append(
            Violation(-1, "count", f"expected {WORDS_PER_DERIVATION} words, got {len(words)}")
        )
    report.valid_indexes = good[:WORDS_PER_DERIVATION]
    return report


def _keyword_in_sentence(sentence_tokens: list[str], keyword: str) -> bool:
    """Literal token-sequence match, or a lemma match for single words."""
    if _contains_token_seq(sentence_tokens, keyword):
        return True
    parts = tokenize(keyword)
    if len(parts) == 1:
        return any(same_lemma(token, parts[0]) for token in sentence_tokens)
    return False


def validate_candidates(
    sentences: list[str],
    selected_keywords: list[str] | tuple[str, ...],
    wh_words: list[str] | tuple[str, ...] = (),
    question_only: bool = False,
    config_wh_words: list[str] | tuple[str, ...] = ("What", "Why", "How"),
) -> ValidationReport:
    """Per-sentence checks: ten-word limit, keyword containment (same
    lemma counts), question-word start when a WH word is selected, and
    the bare-``?`` form (ends with ``?``, no WH start) otherwise."""
    report = ValidationReport(items=list(sentences))
    wh_lower = [w.lower() for w in wh_words]
    config_wh_lower = [w.lower() for w in config_wh_words]
    for i, sentence in enumerate(sentences):
        bad = False
        if word_count(sentence) > MAX_CANDIDATE_WORDS:
            report.violations.append(
                Violation(i, "word_count", f"{word_count(sentence)} words > {MAX_CANDIDATE_WORDS}")
            )
            bad = True
        tokens = tokenize(sentence)
        for keyword in selected_keywords:
            if not _keyword_in_sentence(tokens, keyword):
                report.violations.append(
                    Violation(i, "containment", f"missing keyword {keyword!r}")
                )
                bad = True
        if wh_lower:
            if not tokens or tokens[0] not in wh_lower:
                report.violations.append(
                    Violation(i, "wh_start", f"does not start with {wh_words}")
                )
                bad = True
        elif question_only:
            if not sentence.rstrip().endswith("?"):
                report.violations.append(Violation(i, "question_mark", "does not end with ?"))
                bad = True
            if tokens and tokens[0] in config_wh_lower:
                report.violations.append(
                    Violation(i, "wh_start", f"must not start with {tokens[0]!r}")
                )
                bad = True
        if not bad:
            report.valid_indexes.append(i)
    return report


def _render(body: str, values: dict[str, str], flags: dict[str, bool]) -> str:
    lines_out: list[str] = []
    keeping = True
    in_block = False
    for line in body.splitlines():
        open_match = _IF_OPEN_RE.match(line.strip())
        if open_match:
            if in_block:
                raise TemplateError("nested {{#if}} blocks are not supported")
            flag = open_match.group(1)
            if flag not in flags:
                raise TemplateError(f"unknown template flag {flag!r}")
            keeping = flags[flag]
            in_block = True
            continue
        if line.strip() == _IF_CLOSE:
            if not in_block:
                raise TemplateError("{{/if}} without opening block")
            keeping = True
            in_block = False
            continue
        if keeping:
            lines_out.append(line)
    if in_block:
        raise TemplateError("unterminated {{#if}} block")

    def substitute(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in values:
            raise TemplateError(f"no value for placeholder {name!r}")
        return values[name]

    return _PLACEHOLDER_RE.sub(substitute, "\n".join(lines_out)).rstrip("\n")


class PromptLibrary:
    """The four templates, loaded from disk and hash-pinned.

    ``hashes`` (sha256 of each template file) go into the session
    manifest so an archive is bound to the exact prompts it ran with.
    """

    def __init__(self, bodies: dict[str, str]) -> None:
        missing = set(TEMPLATE_KINDS) - set(bodies)
        if missing:
            raise TemplateError(f"missing templates: {sorted(missing)}")
        self._bodies = bodies
        self.hashes = {
            kind: hashlib.sha256(bodies[kind].encode("utf-8")).hexdigest()
            for kind in TEMPLATE_KINDS
        }
        for kind in TEMPLATE_KINDS:
            found = set(_PLACEHOLDER_RE.findall(bodies[kind]))
            expected = _EXPECTED_PLACEHOLDERS[kind]
            if found != expected:
                raise TemplateError(
                    f"{kind}: placeholders {sorted(found)} != expected {sorted(expected)}"
                )

    @classmethod
    def load_default(cls) -> "PromptLibrary":
        root = resources.files("noteloop.data").joinpath("templates")
        return cls({k: root.joinpath(f"{k}.txt").read_text("utf-8") for k in TEMPLATE_KINDS})

    @classmethod
    def from_dir(cls, path: str | Path) -> "PromptLibrary":
        root = Path(path)
        return cls({k: (root / f"{k}.txt").read_text("utf-8") for k in TEMPLATE_KINDS})

    def render_extraction(self, sentence_text: str) -> str:
        return _render(
            self._bodies["extraction"], {"New Speech Input": sentence_text}, {}
        )

    def render_derive_exclusive(
        self, origin: str, displayed: list[str] | tuple[str, ...]
    ) -> str:
        return _render(
            self._bodies["derive_exclusive"],
            {
                "Original Keyword": origin,
                "Currently Displaying Context Keywords": ", ".join(displayed),
            },
            {},
        )

    def render_derive_contextual(
        self,
        origin: str,
        displayed: list[str] | tuple[str, ...],
        context_sentences: list[str],
    ) -> str:
        context = " ".join(context_sentences[-CONTEXT_SENTENCES:])
        return _render(
            self._bodies["derive_contextual"],
            {
                "Previous Speech": context,
                "Original Keyword": origin,
                "Currently Displaying Context Keywords": ", ".join(displayed),
            },
            {},
        )

    def render_organize(
        self,
        selected_keywords: list[str] | tuple[str, ...],
        wh_words: list[str] | tuple[str, ...],
        question_only: bool,
        config_wh_words: list[str] | tuple[str, ...],
        context_sentences: list[str],
    ) -> str:
        # A selected WH word wins over a bare "?": exactly one block renders.
        wh_mode = bool(wh_words)
        qmark_mode = question_only and not wh_mode
        fact_mode = not wh_mode and not qmark_mode
        context = " ".join(context_sentences[-CONTEXT_SENTENCES:])
        return _render(
            self._bodies["organize"],
            {
                "Previous Speech": context,
                "Selected Question Words": ", ".join(wh_words),
                "Question Words in Customized Keywords": ", ".join(config_wh_words),
                "Selected Keywords": ", ".join(selected_keywords),
            },
            {"wh_mode": wh_mode, "qmark_mode": qmark_mode, "fact_mode": fact_mode},
        )
