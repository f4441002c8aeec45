"""Session orchestration: one event loop per session.

The engine serializes every input -- user actions, segmented sentences,
generation results -- into a single ordered queue, folds each event
through :func:`noteloop.session.apply`, then executes the returned
effects (render a prompt and submit it, cancel stale generations,
persist a note).  Generation completions re-enter as events, so the
whole session is a deterministic function of the scheduler's timeline.

The engine itself is synchronous and single-threaded; live mode runs it
inside an asyncio loop, replay mode under the virtual scheduler.  Only
the scheduler and backend differ between the two.
"""

from __future__ import annotations

import logging
from typing import Callable

from .clock import Scheduler, TimerHandle
from .config import EngineConfig
from .gateway import (
    Gateway,
    GenerationRequest,
    GenerationResult,
    LANE_EXTRACTION,
    LANE_INTERACTIVE,
    MockBackend,
)
from .prompts import PromptLibrary
from .session import (
    CancelBelow,
    Diagnostic,
    GenerationArrived,
    InputNormalizer,
    NoteAdded,
    SentenceArrived,
    SessionEvent,
    StartDerivation,
    StartExtraction,
    StartOrganize,
    apply,
    new_session_state,
)
from .store import SessionStore
from .transcript import IDLE_CLOSE_MS, SentenceSegmenter, TimedText

logger = logging.getLogger(__name__)

Subscriber = Callable[[SessionEvent, list], None]


def make_backend(config: EngineConfig):
    if config.backend == "mock":
        return MockBackend(
            latencies_ms=config.mock_latencies(),
            jitter_ms=config.mock_jitter_ms,
            seed=config.mock_seed,
        )
    if config.backend == "hosted":
        from .gateway import HostedBackend

        return HostedBackend(
            endpoint_url=config.endpoint_url,
            model=config.model,
            api_key_env=config.api_key_env,
            timeout_ms=config.timeout_ms,
        )
    raise ValueError(f"unknown backend {config.backend!r}")


class SessionEngine:
    def __init__(
        self,
        session_id: str,
        config: EngineConfig,
        scheduler: Scheduler,
        backend=None,
        store: SessionStore | None = None,
        prompt_library: PromptLibrary | None = None,
    ) -> None:
        self.session_id = session_id
        self.config = config
        self.scheduler = scheduler
        self.prompts = prompt_library or PromptLibrary.load_default()
        self.state = new_session_state(config)
        self.gateway = Gateway(backend if backend is not None else make_backend(config), scheduler)
        self.store = store
        self.normalizer = InputNormalizer(scheduler, self.post)
        self.segmenter = SentenceSegmenter()
        self.diagnostics: list[Diagnostic] = []
        self._subscribers: list[Subscriber] = []
        self._queue: list[SessionEvent] = []
        self._processing = False
        self._idle_handle: TimerHandle | None = None
        self._degraded_notified = False
        if self.store is not None:
            self.store.open(session_id, scheduler.now_ms(), config, self.prompts.hashes)

    # -- inputs ------------------------------------------------------------

    def subscribe(self, subscriber: Subscriber) -> None:
        self._subscribers.append(subscriber)

    def post(self, event: SessionEvent) -> None:
        """Enqueue an event; events are processed strictly in order."""
        self._queue.append(event)
        if self._processing:
            return
        self._processing = True
        try:
            while self._queue:
                self._process(self._queue.pop(0))
        finally:
            self._processing = False

    def raw_click(self, t_ms: int, target: str) -> None:
        """Raw (undiscriminated) click; goes through the 500 ms window."""
        self.normalizer.click(t_ms, target)

    def raw_double_click(self, t_ms: int, target: str) -> None:
        self.normalizer.double_click(t_ms, target)

    def ingest(self, event: TimedText) -> None:
        """Feed one timed-text window from a transcript adapter."""
        for sentence in self.segmenter.ingest(event):
            if self.store is not None:
                self.store.append_sentence(self.scheduler.now_ms(), sentence)
            self.post(SentenceArrived(t=self.scheduler.now_ms(), sentence=sentence))
        self._reset_idle_timer()

    def finish(self) -> None:
        """Flush pending input and the open sentence buffer."""
        self.normalizer.flush()
        for sentence in self.segmenter.force_close():
            if self.store is not None:
                self.store.append_sentence(self.scheduler.now_ms(), sentence)
            self.post(SentenceArrived(t=self.scheduler.now_ms(), sentence=sentence))

    def _reset_idle_timer(self) -> None:
        if self._idle_handle is not None:
            self._idle_handle.cancel()
        if self.segmenter.has_open:
            self._idle_handle = self.scheduler.call_later(IDLE_CLOSE_MS, self._idle_flush)

    def _idle_flush(self) -> None:
        for sentence in self.segmenter.force_close():
            if self.store is not None:
                self.store.append_sentence(self.scheduler.now_ms(), sentence)
            self.post(SentenceArrived(t=self.scheduler.now_ms(), sentence=sentence))

    # -- the loop ----------------------------------------------------------

    def _process(self, event: SessionEvent) -> None:
        if self.store is not None:
            ok = self.store.append_event(event)
            if not ok and self.store.degraded and not self._degraded_notified:
                self._degraded_notified = True
                self.diagnostics.append(
                    Diagnostic("storage_degraded", "persistence failed; session is read-only")
                )
        effects = apply(self.state, event)
        for effect in effects:
            self._execute(effect, event)
        for subscriber in self._subscribers:
            subscriber(event, effects)

    def _execute(self, effect, event: SessionEvent) -> None:
        if isinstance(effect, StartExtraction):
            prompt = self.prompts.render_extraction(effect.sentence_text)
            self._submit(
                GenerationRequest(
                    seq=effect.seq,
                    kind="extraction",
                    lane=LANE_EXTRACTION,
                    slot="queue",
                    group=effect.seq,
                    basis=(effect.sentence_id,),
                    prompt=prompt,
                    meta={"sentence_text": effect.sentence_text},
                )
            )
        elif isinstance(effect, StartDerivation):
            if effect.mode == "derive_contextual":
                prompt = self.prompts.render_derive_contextual(
                    effect.origin_word, effect.displayed, list(effect.context_texts)
                )
            else:
                prompt = self.prompts.render_derive_exclusive(
                    effect.origin_word, effect.displayed
                )
            self._submit(
                GenerationRequest(
                    seq=effect.seq,
                    kind=effect.mode,
                    lane=LANE_INTERACTIVE,
                    slot="ring",
                    group=effect.group,
                    basis=(effect.origin_id,),
                    prompt=prompt,
                    meta={"origin_word": effect.origin_word, "displayed": effect.displayed},
                )
            )
        elif isinstance(effect, StartOrganize):
            prompt = self.prompts.render_organize(
                effect.keywords,
                effect.wh_words,
                effect.question_only,
                self.config.wh_words,
                list(effect.context_texts),
            )
            self._submit(
                GenerationRequest(
                    seq=effect.seq,
                    kind="organize",
                    lane=LANE_INTERACTIVE,
                    slot=effect.slot,
                    group=effect.seq,
                    basis=effect.basis,
                    prompt=prompt,
                    meta={
                        "keywords": effect.keywords,
                        "wh_words": effect.wh_words,
                        "question_only": effect.question_only,
                        "config_wh_words": self.config.wh_words,
                    },
                )
            )
        elif isinstance(effect, CancelBelow):
            self.gateway.cancel_below(effect.seq)
        elif isinstance(effect, NoteAdded):
            if self.store is not None:
                note = next(n for n in self.state.notes if n.id == effect.note_id)
                if not self.store.append_note(event.t, note, effect.revision):
                    logger.warning("note %d not persisted (store degraded)", effect.note_id)
        elif isinstance(effect, Diagnostic):
            self.diagnostics.append(effect)
            logger.debug("session %s: %s (%s)", self.session_id, effect.code, effect.detail)

    def _submit(self, request: GenerationRequest) -> None:
        self.gateway.submit(request, self._deliver)

    def _deliver(self, result: GenerationResult) -> None:
        self.post(GenerationArrived(t=self.scheduler.now_ms(), result=result))
