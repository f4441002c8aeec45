"""Timed-text segmentation into sentences.

Speech-to-text adapters deliver :class:`TimedText` windows (the engine
never touches audio).  The segmenter folds those windows into sentences
using two boundary rules, whichever fires first:

* a silence gap of more than ``PAUSE_MS`` between one window's end and
  the next window's start, or
* terminal punctuation (``.`` ``?`` ``!``) at the end of a window.

A sentence left open with no activity for ``IDLE_CLOSE_MS`` is forced
closed by the engine so the tail of a session is not stranded.

Text is normalized by collapsing whitespace runs to single spaces; case
and punctuation are preserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

PAUSE_MS = 1000
WINDOW_MS = 4000
IDLE_CLOSE_MS = 5000

_TERMINAL = (".", "?", "!")
_WS_RUN = re.compile(r"\s+")


class TimestampOrderError(ValueError):
    """An adapter delivered events out of order; the stream is broken."""


def normalize_text(text: str) -> str:
    return _WS_RUN.sub(" ", text).strip()


@dataclass(frozen=True)
class TimedText:
    """One captured voice window: text plus its span in session time."""

    text: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"window ends before it starts: {self.start}..{self.end}")
        if not normalize_text(self.text):
            raise ValueError("empty timed-text window")


@dataclass(frozen=True)
class Sentence:
    id: int
    text: str
    start: int
    end: int
    ordinal: int


@dataclass
class Transcript:
    sentences: list[Sentence] = field(default_factory=list)

    def append(self, sentence: Sentence) -> None:
        if sentence.ordinal != len(self.sentences):
            raise ValueError(
                f"ordinal {sentence.ordinal} does not follow {len(self.sentences)} sentences"
            )
        self.sentences.append(sentence)

    def tail(self, count: int) -> list[Sentence]:
        """The most recent ``count`` sentences, oldest first."""
        if count <= 0:
            return []
        return self.sentences[-count:]


class SentenceSegmenter:
    """Stateful fold from TimedText windows to closed sentences.

    ``ingest`` returns the sentences closed by an event (zero, one, or --
    when a long pause closes the buffer and the new event itself ends in
    terminal punctuation -- two).  Ids are assigned in closing order.
    """

    def __init__(self, first_id: int = 0) -> None:
        self._next_id = first_id
        self._ordinal = 0
        self._parts: list[str] = []
        self._open_start: int | None = None
        self._last_end: int | None = None
        self._last_start: int | None = None

    @property
    def last_activity_ms(self) -> int | None:
        return self._last_end

    @property
    def has_open(self) -> bool:
        return bool(self._parts)

    def ingest(self, event: TimedText) -> list[Sentence]:
        if self._last_start is not None and event.start < self._last_start:
            raise TimestampOrderError(
                f"event start {event.start} before previous start {self._last_start}"
            )
        closed: list[Sentence] = []
        if (
            self._parts
            and self._last_end is not None
            and event.start - self._last_end > PAUSE_MS
        ):
            closed.append(self._close())
        if not self._parts:
            self._open_start = event.start
        self._parts.append(event.text)
        self._last_end = event.end
        self._last_start = event.start
        if normalize_text(event.text).endswith(_TERMINAL):
            closed.append(self._close())
        return closed

    def force_close(self) -> list[Sentence]:
        """Close the open buffer regardless of punctuation (idle timeout)."""
        return [self._close()] if self._parts else []

    def _close(self) -> Sentence:
        text = normalize_text(" ".join(self._parts))
        sentence = Sentence(
            id=self._next_id,
            text=text,
            start=self._open_start if self._open_start is not None else 0,
            end=self._last_end if self._last_end is not None else 0,
            ordinal=self._ordinal,
        )
        self._next_id += 1
        self._ordinal += 1
        self._parts = []
        self._open_start = None
        return sentence


def window_stream(
    tokens: Iterable[tuple[int, str]], window_ms: int = WINDOW_MS
) -> Iterator[TimedText]:
    """Slice a scripted (timestamp, token) stream into capture windows.

    Replay-side stand-in for the fixed-interval voice recorder: tokens
    within ``window_ms`` of a window's first token share one window.
    Window spans never exceed ``window_ms``; empty windows are skipped.
    """
    window: list[tuple[int, str]] = []
    start: int | None = None
    for t_ms, token in tokens:
        if not token.strip():
            continue
        if start is not None and t_ms >= start + window_ms:
            yield TimedText(
                text=" ".join(tok for _, tok in window),
                start=start,
                end=window[-1][0],
            )
            window = []
            start = None
        if start is None:
            start = t_ms
        window.append((t_ms, token))
    if window and start is not None:
        yield TimedText(
            text=" ".join(tok for _, tok in window),
            start=start,
            end=window[-1][0],
        )


def read_trace(path: str | Path) -> list[TimedText]:
    """Parse a trace file: ``start_ms<TAB>end_ms<TAB>text`` per line."""
    events: list[TimedText] = []
    for line_no, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"{path}:{line_no}: bad timestamps") from exc
        events.append(TimedText(text=parts[2], start=start, end=end))
    return events


def write_trace(path: str | Path, events: Iterable[TimedText]) -> None:
    lines = [f"{e.start}\t{e.end}\t{e.text}" for e in events]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")


def read_token_file(path: str | Path) -> list[tuple[int, str]]:
    """Parse a token timing file: ``t_ms<TAB>token`` per line."""
    tokens: list[tuple[int, str]] = []
    for line_no, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{line_no}: expected 2 tab-separated fields")
        tokens.append((int(parts[0]), parts[1]))
    return tokens
