"""Completion execution: backends, retry-on-invalid, cancellation.

Requests carry a session-scoped sequence number; the session cancels
stale interactive generations by watermark (``cancel_below``).  A
cancelled request delivers nothing -- the drop happens at the delivery
boundary, so a result racing a cancel can never reach the session.

Validation policy: an invalid or empty response is retried exactly once
with the same prompt; after that, violating items are filtered out and
only the compliant remainder is delivered.  Nothing constraint-violating
is ever handed to the session as displayable.
"""

from __future__ import annotations

import logging
import os
import random
import threading
import zlib
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

from . import prompts
from .clock import Scheduler
from .prompts import EmptyResponseError, ValidationReport
from .stemmer import same_lemma
from .words import stopwords, tokenize

logger = logging.getLogger(__name__)

LANE_EXTRACTION = "extraction"
LANE_INTERACTIVE = "interactive"

DEFAULT_TIMEOUT_MS = 10_000

# Reported average delays for the three capabilities; the mock defaults
# to them so replayed latency metrics line up with the live figures.
DEFAULT_LATENCY_MS = {
    "extraction": 4290,
    "derive_contextual": 1410,
    "derive_exclusive": 1410,
    "organize": 2890,
}


class BackendConfigError(RuntimeError):
    """Fatal backend misconfiguration (bad credentials, bad endpoint)."""


@dataclass(frozen=True)
class GenerationRequest:
    seq: int
    kind: str  # extraction | derive_contextual | derive_exclusive | organize
    lane: str  # extraction | interactive
    slot: str  # queue | candidates | ring | review
    group: int
    basis: tuple[int, ...]
    prompt: str
    meta: dict = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class GenerationResult:
    seq: int
    kind: str
    slot: str
    group: int
    basis: tuple[int, ...]
    words: tuple[str, ...] = ()
    sentences: tuple[str, ...] = ()
    latency_ms: int = 0
    retried: int = 0
    dropped: int = 0
    error: str | None = None


class MockBackend:
    """Deterministic stand-in for the hosted model.

    * extraction: the up-to-four longest non-stopword tokens of the Main
      Sentence, ties broken by first occurrence.
    * derivation: words from the shipped table, walk starting at a
      stable hash of (origin, mode), skipping anything lemma-equal to
      the origin or colliding with the displayed keywords.
    * organization: fixed sentence frames around the selected keywords,
      compliant for selections of up to seven keywords.

    ``fault_injector(request, attempt)`` may return replacement raw text
    to model a misbehaving backend; return ``None`` for normal output.
    """

    def __init__(
        self,
        latencies_ms: dict[str, int] | None = None,
        jitter_ms: int = 0,
        seed: int = 0,
        fault_injector: Callable[[GenerationRequest, int], str | None] | None = None,
    ) -> None:
        self.latencies_ms = dict(DEFAULT_LATENCY_MS)
        if latencies_ms:
            self.latencies_ms.update(latencies_ms)
        self.jitter_ms = jitter_ms
        self._rng = random.Random(seed)
        self.fault_injector = fault_injector
        self._word_table = self._load_word_table()

    @staticmethod
    def _load_word_table() -> list[str]:
        text = resources.files("noteloop.data").joinpath("mock_words.txt").read_text("utf-8")
        return [
            line.strip().lower()
            for line in text.splitlines()
            if line.strip() and not line.startswith("#")
        ]

    def start(
        self,
        request: GenerationRequest,
        attempt: int,
        scheduler: Scheduler,
        callback: Callable[[str | None, str | None], None],
    ) -> None:
        """Schedule ``callback(raw_text, error)`` after the mock latency."""
        raw = self.generate(request, attempt)
        latency = self.latencies_ms.get(request.kind, 0)
        if self.jitter_ms:
            latency += self._rng.randint(0, self.jitter_ms)
        scheduler.call_later(latency, lambda: callback(raw, None))

    def generate(self, request: GenerationRequest, attempt: int) -> str:
        if self.fault_injector is not None:
            injected = self.fault_injector(request, attempt)
            if injected is not None:
                return injected
        if request.kind == "extraction":
            return self._extract(request.meta["sentence_text"])
        if request.kind in ("derive_contextual", "derive_exclusive"):
            return self._derive(
                request.kind, request.meta["origin_word"], request.meta["displayed"]
            )
        if request.kind == "organize":
            return self._organize(
                request.meta["keywords"],
                request.meta["wh_words"],
                request.meta["question_only"],
            )
        raise ValueError(f"unknown request kind {request.kind!r}")

    def _extract(self, sentence_text: str) -> str:
        stop = stopwords()
        seen: dict[str, int] = {}
        for index, token in enumerate(tokenize(sentence_text)):
            if token in stop or token in seen:
                continue
            seen[token] = index
        ranked = sorted(seen.items(), key=lambda kv: (-len(kv[0]), kv[1]))
        return "\n".join(word for word, _ in ranked[:4])

    def _derive(self, mode: str, origin: str, displayed: tuple[str, ...]) -> str:
        table = self._word_table
        start = zlib.crc32(f"{origin.lower()}|{mode}".encode("utf-8")) % len(table)
        displayed_lower = {w.lower() for w in displayed}
        picked: list[str] = []
        for offset in range(len(table)):
            word = table[(start + offset) % len(table)]
            if word in displayed_lower or word in picked:
                continue
            if same_lemma(word, origin.lower()):
                continue
            picked.append(word)
            if len(picked) == prompts.WORDS_PER_DERIVATION:
                break
        return "\n".join(picked)

    def _organize(
        self, keywords: tuple[str, ...], wh_words: tuple[str, ...], question_only: bool
    ) -> str:
        joined = " ".join(keywords)
        if wh_words:
            lead = wh_words[0]
            frames = [
                f"{lead} {joined} noted?",
                f"{lead} {joined} matters here?",
                f"{lead} {joined} stands out?",
            ]
        elif question_only:
            frames = [
                f"Did {joined} get noted?",
                f"Are {joined} worth noting?",
                f"Should {joined} be revisited?",
            ]
        else:
            frames = [
                f"Note about {joined}.",
                f"Recall {joined} later.",
                f"Remember {joined} now.",
            ]
        return "\n".join(frames)


class HostedBackend:
    """Chat-completion HTTP backend (live mode only).

    One user-role message per request (the rendered prompt), temperature
    0 for reproducibility.  Requests run on a worker thread; completion
    is posted back through the scheduler, which must therefore provide
    ``post_threadsafe`` (the asyncio adapter does).
    """

    def __init__(
        self,
        endpoint_url: str,
        model: str,
        api_key_env: str = "NOTELOOP_API_KEY",
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
    ) -> None:
        self.endpoint_url = endpoint_url
        self.model = model
        self.timeout_ms = timeout_ms
        self.api_key = os.environ.get(api_key_env, "")
        if not self.api_key:
            raise BackendConfigError(f"missing API key: set ${api_key_env}")

    def start(self, request, attempt, scheduler, callback) -> None:
        def worker() -> None:
            raw: str | None = None
            error: str | None = None
            try:
                raw = self._complete(request.prompt)
            except BackendConfigError:
                raise
            except TimeoutError:
                error = "timeout"
            except Exception as exc:  # noqa: BLE001 - surfaced as session event
                error = f"transport: {exc}"
            scheduler.post_threadsafe(lambda: callback(raw, error))

        threading.Thread(target=worker, daemon=True).start()

    def _complete(self, prompt: str) -> str:
        import httpx

        try:
            response = httpx.post(
                self.endpoint_url,
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": 0,
                },
                timeout=self.timeout_ms / 1000.0,
            )
        except httpx.TimeoutException as exc:
            raise TimeoutError(str(exc)) from exc
        if response.status_code in (401, 403):
            raise BackendConfigError(f"authentication failed ({response.status_code})")
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]


class _Entry:
    __slots__ = ("request", "submitted_ms", "deliver", "cancelled", "attempt")

    def __init__(self, request: GenerationRequest, submitted_ms: int, deliver) -> None:
        self.request = request
        self.submitted_ms = submitted_ms
        self.deliver = deliver
        self.cancelled = False
        self.attempt = 0


class Gateway:
    """Executes generation requests and guards the delivery boundary."""

    def __init__(self, backend, scheduler: Scheduler) -> None:
        self.backend = backend
        self.scheduler = scheduler
        self._in_flight: dict[int, _Entry] = {}

    def in_flight_count(self) -> int:
        return len(self._in_flight)

    def submit(self, request: GenerationRequest, deliver: Callable[[GenerationResult], None]) -> None:
        if request.seq in self._in_flight:
            raise ValueError(f"duplicate generation seq {request.seq}")
        entry = _Entry(request, self.scheduler.now_ms(), deliver)
        self._in_flight[request.seq] = entry
        self._start_attempt(entry)

    def cancel_below(self, seq_below: int) -> None:
        """Abandon in-flight interactive requests with seq < seq_below."""
        for seq in list(self._in_flight):
            entry = self._in_flight[seq]
            if entry.request.lane == LANE_INTERACTIVE and seq < seq_below:
                entry.cancelled = True
                del self._in_flight[seq]
                logger.debug("cancelled generation seq=%d kind=%s", seq, entry.request.kind)

    def _start_attempt(self, entry: _Entry) -> None:
        attempt = entry.attempt
        self.backend.start(
            entry.request,
            attempt,
            self.scheduler,
            lambda raw, error: self._on_raw(entry, attempt, raw, error),
        )

    def _on_raw(self, entry: _Entry, attempt: int, raw: str | None, error: str | None) -> None:
        if entry.cancelled or self._in_flight.get(entry.request.seq) is not entry:
            return  # dropped at the delivery boundary
        request = entry.request
        if error is not None:
            # No retry on transport errors/timeouts; surface as a non-fatal event.
            del self._in_flight[request.seq]
            entry.deliver(self._error_result(entry, error))
            return
        report, parse_failed = self._check(request, raw or "")
        if (parse_failed or not report.ok) and attempt == 0:
            entry.attempt = 1
            logger.debug(
                "invalid response for seq=%d (%s); retrying once",
                request.seq,
                "unparseable" if parse_failed else f"{len(report.violations)} violations",
            )
            self._start_attempt(entry)
            return
        del self._in_flight[request.seq]
        entry.deliver(self._build_result(entry, report))

    def _check(self, request: GenerationRequest, raw: str) -> tuple[ValidationReport, bool]:
        try:
            if request.kind == "organize":
                sentences = prompts.parse_sentence_response(raw)
                report = prompts.validate_candidates(
                    sentences,
                    request.meta["keywords"],
                    request.meta["wh_words"],
                    request.meta["question_only"],
                    request.meta["config_wh_words"],
                )
            elif request.kind == "extraction":
                words = prompts.parse_keyword_response(raw)
                report = prompts.validate_extraction(words, request.meta["sentence_text"])
            else:
                words = prompts.parse_keyword_response(raw)
                report = prompts.validate_derivation(
                    words, request.meta["origin_word"], list(request.meta["displayed"])
                )
            return report, False
        except EmptyResponseError:
            return ValidationReport(items=[]), True

    def _build_result(self, entry: _Entry, report: ValidationReport) -> GenerationResult:
        request = entry.request
        items = tuple(report.valid_items())
        dropped = len(report.items) - len(report.valid_indexes)
        return GenerationResult(
            seq=request.seq,
            kind=request.kind,
            slot=request.slot,
            group=request.group,
            basis=request.basis,
            words=items if request.kind != "organize" else (),
            sentences=items if request.kind == "organize" else (),
            latency_ms=self.scheduler.now_ms() - entry.submitted_ms,
            retried=entry.attempt,
            dropped=dropped,
        )

    def _error_result(self, entry: _Entry, error: str) -> GenerationResult:
        request = entry.request
        return GenerationResult(
            seq=request.seq,
            kind=request.kind,
            slot=request.slot,
            group=request.group,
            basis=request.basis,
            latency_ms=self.scheduler.now_ms() - entry.submitted_ms,
            retried=entry.attempt,
            error=error,
        )
