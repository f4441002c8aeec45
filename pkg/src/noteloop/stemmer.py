"""Deterministic suffix-stripping stemmer driven by a shipped rule table.

The validators need an offline, reproducible answer to "do these two
words share a lemma?".  This module interprets the Porter-style rule
table in ``data/stemmer_rules.txt``: suffix rewrite rules grouped into
ordered steps, longest match first, each guarded by a condition over the
stem (measure, vowel presence, double consonant, cvc shape).

The table is data so it can be audited and adjusted without touching
code; the engine knows only the condition mini-language and the three
"special" fix-ups named in the file.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Count vowel-consonant sequences: [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if prev_vowel and not vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(stem: str) -> bool:
    if len(stem) < 2:
        return False
    return stem[-1] == stem[-2] and _is_consonant(stem, len(stem) - 1)


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    i = len(stem) - 1
    if not (_is_consonant(stem, i) and not _is_consonant(stem, i - 1) and _is_consonant(stem, i - 2)):
        return False
    return stem[-1] not in "wxy"


class _Cond:
    """Parsed condition expression; evaluated against a stem."""

    def __init__(self, expr: str) -> None:
        self._tokens = self._lex(expr)
        self._pos = 0
        self._ast = self._parse_or()
        if self._pos != len(self._tokens):
            raise ValueError(f"trailing tokens in condition {expr!r}")

    @staticmethod
    def _lex(expr: str) -> list[str]:
        tokens: list[str] = []
        i = 0
        while i < len(expr):
            ch = expr[i]
            if ch in "&|!()":
                tokens.append(ch)
                i += 1
            else:
                j = i
                while j < len(expr) and expr[j] not in "&|!()":
                    j += 1
                tokens.append(expr[i:j])
                i = j
        return tokens

    def _parse_or(self):
        node = self._parse_and()
        while self._peek() == "|":
            self._pos += 1
            node = ("or", node, self._parse_and())
        return node

    def _parse_and(self):
        node = self._parse_not()
        while self._peek() == "&":
            self._pos += 1
            node = ("and", node, self._parse_not())
        return node

    def _parse_not(self):
        if self._peek() == "!":
            self._pos += 1
            return ("not", self._parse_not())
        if self._peek() == "(":
            self._pos += 1
            node = self._parse_or()
            if self._peek() != ")":
                raise ValueError("unbalanced parenthesis in condition")
            self._pos += 1
            return node
        token = self._peek()
        if token is None:
            raise ValueError("unexpected end of condition")
        self._pos += 1
        return ("prim", token)

    def _peek(self) -> str | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def evaluate(self, stem: str) -> bool:
        return self._eval(self._ast, stem)

    def _eval(self, node, stem: str) -> bool:
        op = node[0]
        if op == "or":
            return self._eval(node[1], stem) or self._eval(node[2], stem)
        if op == "and":
            return self._eval(node[1], stem) and self._eval(node[2], stem)
        if op == "not":
            return not self._eval(node[1], stem)
        token = node[1]
        if token == "m>0":
            return _measure(stem) > 0
        if token == "m>1":
            return _measure(stem) > 1
        if token == "m=1":
            return _measure(stem) == 1
        if token == "*v*":
            return _has_vowel(stem)
        if token == "*d":
            return _ends_double_consonant(stem)
        if token == "*o":
            return _ends_cvc(stem)
        if token.startswith("ends:"):
            letters = token[len("ends:"):]
            return bool(stem) and stem[-1] in letters
        raise ValueError(f"unknown condition primitive {token!r}")


@dataclass
class _Rule:
    suffix: str
    replacement: str
    condition: _Cond | None
    adjust: bool


@dataclass
class _Step:
    name: str
    rules: list[_Rule]
    specials: list[list[str]]
    adjust_step: str | None


class RuleStemmer:
    """Stemmer interpreting the shipped rule table."""

    def __init__(self, rules_text: str) -> None:
        self._steps: list[_Step] = []
        self._by_name: dict[str, _Step] = {}
        self._parse(rules_text)

    @classmethod
    def load_default(cls) -> "RuleStemmer":
        text = resources.files("noteloop.data").joinpath("stemmer_rules.txt").read_text("utf-8")
        return cls(text)

    def _parse(self, text: str) -> None:
        current: _Step | None = None
        default_cond: _Cond | None = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("step "):
                parts = line.split()
                name = parts[1]
                default_cond = None
                adjust_step = None
                for opt in parts[2:]:
                    key, _, value = opt.partition("=")
                    if key == "cond":
                        default_cond = _Cond(value)
                    elif key == "adjust":
                        adjust_step = value
                    else:
                        raise ValueError(f"unknown step option {opt!r}")
                current = _Step(name, [], [], adjust_step)
                self._steps.append(current)
                self._by_name[name] = current
                continue
            if current is None:
                raise ValueError(f"rule before any step header: {line!r}")
            if line.startswith("special "):
                current.specials.append(line.split()[1:])
                continue
            parts = line.split()
            adjust = "+adjust" in parts
            parts = [p for p in parts if p != "+adjust"]
            suffix = parts[0]
            replacement = "" if parts[1] == "-" else parts[1]
            condition = _Cond(parts[2]) if len(parts) > 2 else default_cond
            current.rules.append(_Rule(suffix, replacement, condition, adjust))
        for step in self._steps:
            step.rules.sort(key=lambda r: len(r.suffix), reverse=True)

    def stem(self, word: str) -> str:
        word = word.lower()
        if len(word) < 3:
            return word
        for step in self._steps:
            if step.name.endswith("2") and step.name != "2":
                continue  # adjust sub-steps run only when triggered
            word = self._apply_step(step, word)
        return word

    def _apply_step(self, step: _Step, word: str) -> str:
        for rule in step.rules:
            if not word.endswith(rule.suffix):
                continue
            stem = word[: len(word) - len(rule.suffix)]
            if rule.condition is not None and not rule.condition.evaluate(stem):
                return word  # longest match decides; a failed guard ends the step
            word = stem + rule.replacement
            if rule.adjust and step.adjust_step:
                word = self._apply_adjust(self._by_name[step.adjust_step], word)
            return word
        return self._apply_specials(step, word)

    def _apply_adjust(self, step: _Step, word: str) -> str:
        for rule in step.rules:
            if word.endswith(rule.suffix):
                return word[: len(word) - len(rule.suffix)] + rule.replacement
        return self._apply_specials(step, word)

    def _apply_specials(self, step: _Step, word: str) -> str:
        for special in step.specials:
            kind = special[0]
            if kind == "undouble-unless":
                excluded = set(special[1:])
                if _ends_double_consonant(word) and word[-1] not in excluded:
                    return word[:-1]
            elif kind == "cvc-add-e":
                if _measure(word) == 1 and _ends_cvc(word):
                    return word + "e"
            elif kind == "undouble-ll":
                if word.endswith("ll") and _measure(word) > 1:
                    return word[:-1]
            else:
                raise ValueError(f"unknown special {kind!r}")
        return word


_default: RuleStemmer | None = None


def default_stemmer() -> RuleStemmer:
    global _default
    if _default is None:
        _default = RuleStemmer.load_default()
    return _default


def same_lemma(a: str, b: str) -> bool:
    """True when two lowercase words reduce to the same stem."""
    stemmer = default_stemmer()
    return stemmer.stem(a) == stemmer.stem(b)
