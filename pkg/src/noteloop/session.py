"""The interaction state machine.

All user input, transcript sentences and generation results enter as
events through :func:`apply`, which updates the state and returns the
outward effects (start/cancel generations, persist a note, diagnostics).
``apply`` is deterministic: replaying a recorded event stream rebuilds
the exact same state, which is what the archive format relies on.

Input events are already click/double-click discriminated; the
:class:`InputNormalizer` below performs that discrimination for raw
click streams (two clicks on the same target strictly within 500 ms
coalesce; clicks on different targets never pair).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Union

from .clock import Scheduler, TimerHandle
from .config import EngineConfig
from .gateway import GenerationResult
from .transcript import Sentence, Transcript

DOUBLE_CLICK_MS = 500
RING_SLOTS = 4  # derivatives per ring page; the origin is the fifth item
QUEUE_VISIBLE = 4

KIND_CONTEXT = "context"
KIND_CUSTOMIZED = "customized"
KIND_DERIVATIVE = "derivative"

MODE_BROWSE = "keyword_browse"
MODE_SELECTING = "selecting"
MODE_RING = "derivative_view"
MODE_NOTES = "notes_review"
MODE_NOTE_DETAIL = "note_detail"


# --------------------------------------------------------------------------
# events

@dataclass(frozen=True)
class Touch:
    t: int
    on: bool


@dataclass(frozen=True)
class Click:
    t: int
    target: str


@dataclass(frozen=True)
class DoubleClick:
    t: int
    target: str


@dataclass(frozen=True)
class SentenceArrived:
    t: int
    sentence: Sentence


@dataclass(frozen=True)
class GenerationArrived:
    t: int
    result: GenerationResult


SessionEvent = Union[Touch, Click, DoubleClick, SentenceArrived, GenerationArrived]


# --------------------------------------------------------------------------
# effects

@dataclass(frozen=True)
class StartExtraction:
    seq: int
    sentence_id: int
    sentence_text: str


@dataclass(frozen=True)
class StartDerivation:
    seq: int
    group: int
    origin_id: int
    origin_word: str
    mode: str  # derive_contextual | derive_exclusive
    displayed: tuple[str, ...]
    context_texts: tuple[str, ...]


@dataclass(frozen=True)
class StartOrganize:
    seq: int
    slot: str  # candidates | review
    basis: tuple[int, ...]
    keywords: tuple[str, ...]
    wh_words: tuple[str, ...]
    question_only: bool
    context_texts: tuple[str, ...]


@dataclass(frozen=True)
class CancelBelow:
    seq: int


@dataclass(frozen=True)
class NoteAdded:
    note_id: int
    revision: int


@dataclass(frozen=True)
class Diagnostic:
    code: str
    detail: str


Effect = Union[StartExtraction, StartDerivation, StartOrganize, CancelBelow, NoteAdded, Diagnostic]


# --------------------------------------------------------------------------
# state

@dataclass
class Keyword:
    id: int
    word: str
    kind: str
    source: int  # sentence id | origin keyword id | customized config index
    selected: bool = False


@dataclass
class QueueGroup:
    sentence_id: int
    keyword_ids: tuple[int, ...]


@dataclass
class KeywordQueue:
    groups: list[QueueGroup] = field(default_factory=list)
    window: int = 0
    latest_sentence_id: int | None = None

    def visible_group(self) -> QueueGroup | None:
        if not self.groups:
            return None
        return self.groups[self.window]


@dataclass
class CandidatePanel:
    status: str = "empty"  # empty | pending | shown
    seq: int | None = None
    basis: tuple[int, ...] = ()
    sentences: tuple[str, ...] = ()

    def reset(self) -> None:
        self.status = "empty"
        self.seq = None
        self.basis = ()
        self.sentences = ()


@dataclass
class DerivativeView:
    origin_id: int
    pages: list[tuple[int, ...]] = field(default_factory=lambda: [()])
    page: int = 0
    pending_seq: int | None = None
    pending_modes: tuple[str, ...] = ()
    pending_pos: int = 0

    def shown_ids(self) -> list[int]:
        return [kw_id for page in self.pages for kw_id in page]


@dataclass
class NoteRecord:
    id: int
    kind: str  # sentence | keywords
    text: str
    revisions: list[str]
    selection_ids: tuple[int, ...]
    selection_words: tuple[str, ...]
    selection_kinds: tuple[str, ...]
    candidates_shown: tuple[str, ...] | None
    transcripts: tuple[tuple[int, int, str], ...]  # (keyword id, sentence id, text)
    context_texts: tuple[str, ...]
    first_selection_ms: int
    last_selection_ms: int
    recorded_ms: int
    steps: int


@dataclass
class ReviewState:
    note_id: int | None = None
    pages: list[tuple[str, ...]] = field(default_factory=list)
    page: int = 0
    pending_seq: int | None = None


@dataclass
class SessionState:
    config: EngineConfig
    visibility: str = "hidden"
    mode: str = MODE_BROWSE
    keywords: dict[int, Keyword] = field(default_factory=dict)
    queue: KeywordQueue = field(default_factory=KeywordQueue)
    selection: list[int] = field(default_factory=list)
    candidates: CandidatePanel = field(default_factory=CandidatePanel)
    ring: DerivativeView | None = None
    notes: list[NoteRecord] = field(default_factory=list)
    transcript: Transcript = field(default_factory=Transcript)
    next_keyword_id: int = 1
    next_seq: int = 1
    next_note_id: int = 1
    next_group: int = 1
    return_mode: str = MODE_BROWSE
    review: ReviewState = field(default_factory=ReviewState)
    episode_first_ms: int | None = None
    episode_last_selection_ms: int | None = None
    episode_steps: int = 0
    derivative_shown_ms: int = 0
    last_event_ms: int = 0
    candidate_seqs_shown: list[int] = field(default_factory=list)

    def alloc_seq(self) -> int:
        seq = self.next_seq
        self.next_seq += 1
        return seq

    def alloc_group(self) -> int:
        group = self.next_group
        self.next_group += 1
        return group

    def alloc_keyword(self, word: str, kind: str, source: int) -> Keyword:
        keyword = Keyword(id=self.next_keyword_id, word=word, kind=kind, source=source)
        self.next_keyword_id += 1
        self.keywords[keyword.id] = keyword
        return keyword

    def selection_words(self) -> tuple[str, ...]:
        return tuple(self.keywords[i].word for i in self.selection)

    def selected_wh_words(self) -> tuple[str, ...]:
        return tuple(
            self.keywords[i].word
            for i in self.selection
            if self.keywords[i].kind == KIND_CUSTOMIZED and self.keywords[i].word != "?"
        )

    def selected_question_only(self) -> bool:
        has_qmark = any(
            self.keywords[i].kind == KIND_CUSTOMIZED and self.keywords[i].word == "?"
            for i in self.selection
        )
        return has_qmark and not self.selected_wh_words()

    def content_keywords(self) -> tuple[str, ...]:
        """Selected words that must appear in candidate sentences."""
        return tuple(
            self.keywords[i].word
            for i in self.selection
            if self.keywords[i].kind != KIND_CUSTOMIZED
        )

    def context_window(self) -> tuple[str, ...]:
        return tuple(s.text for s in self.transcript.tail(15))


def new_session_state(config: EngineConfig) -> SessionState:
    state = SessionState(config=config)
    for index, word in enumerate(config.customized_keywords):
        state.alloc_keyword(word, KIND_CUSTOMIZED, index)
    return state


# --------------------------------------------------------------------------
# transition function

def parse_target(target: str) -> tuple:
    parts = target.split(":")
    try:
        if parts[0] in ("kw", "chip", "ring", "note") and len(parts) == 2:
            return (parts[0], int(parts[1]))
        if parts[0] == "cand" and len(parts) == 2:
            return ("cand", int(parts[1]))
        if parts[0] == "arrow" and len(parts) == 3 and parts[2] in ("prev", "next"):
            return ("arrow", parts[1], parts[2])
        if parts[0] == "btn" and len(parts) == 2:
            return ("btn", parts[1])
    except ValueError:
        pass
    return ("bad", target)


def apply(state: SessionState, event: SessionEvent) -> list[Effect]:
    """Advance the session by one event; returns outward effects."""
    _accumulate_ring_time(state, event.t)
    if isinstance(event, Touch):
        state.visibility = "shown" if event.on else "hidden"
        return []
    if isinstance(event, SentenceArrived):
        return _on_sentence_arrived(state, event.sentence)
    if isinstance(event, GenerationArrived):
        return _on_generation(state, event.t, event.result)
    if isinstance(event, (Click, DoubleClick)):
        if state.visibility != "shown":
            return [Diagnostic("hidden", "display is off; input ignored")]
        if isinstance(event, Click):
            return _on_click(state, event.t, event.target)
        return _on_double_click(state, event.t, event.target)
    return [Diagnostic("unknown_event", repr(event))]


def _accumulate_ring_time(state: SessionState, t: int) -> None:
    if t > state.last_event_ms:
        if state.visibility == "shown" and state.ring is not None:
            state.derivative_shown_ms += t - state.last_event_ms
        state.last_event_ms = t


# -- transcript and generation arrivals -----------------------------------

def _on_sentence_arrived(state: SessionState, sentence: Sentence) -> list[Effect]:
    state.transcript.append(sentence)
    seq = state.alloc_seq()
    return [StartExtraction(seq=seq, sentence_id=sentence.id, sentence_text=sentence.text)]


def _on_generation(state: SessionState, t: int, result: GenerationResult) -> list[Effect]:
    if result.error is not None:
        return _on_generation_error(state, result)
    if result.slot == "queue":
        return _on_keywords_extracted(state, result)
    if result.slot == "candidates":
        return _on_candidates(state, result)
    if result.slot == "ring":
        return _on_ring_fill(state, result)
    if result.slot == "review":
        return _on_review_page(state, result)
    return [Diagnostic("unknown_slot", result.slot)]


def _on_generation_error(state: SessionState, result: GenerationResult) -> list[Effect]:
    if result.slot == "candidates" and state.candidates.seq == result.seq:
        state.candidates.reset()
    if state.ring is not None and state.ring.pending_seq == result.seq:
        state.ring.pending_seq = None
        state.ring.pending_modes = ()
    if state.review.pending_seq == result.seq:
        state.review.pending_seq = None
    return [Diagnostic("generation_error", f"seq={result.seq} {result.error}")]


def _on_keywords_extracted(state: SessionState, result: GenerationResult) -> list[Effect]:
    if not result.words:
        return []  # nothing extracted; queue unchanged
    sentence_id = result.basis[0]
    viewing_newest = not state.queue.groups or state.queue.window == len(state.queue.groups) - 1
    ids = tuple(
        state.alloc_keyword(word, KIND_CONTEXT, sentence_id).id for word in result.words
    )
    state.queue.groups.append(QueueGroup(sentence_id=sentence_id, keyword_ids=ids))
    state.queue.latest_sentence_id = sentence_id
    if viewing_newest:
        state.queue.window = len(state.queue.groups) - 1
    return []


def _on_candidates(state: SessionState, result: GenerationResult) -> list[Effect]:
    panel = state.candidates
    if panel.status != "pending" or panel.seq != result.seq:
        return []  # stale: a newer selection superseded this generation
    if panel.basis != tuple(state.selection):
        panel.reset()
        return [Diagnostic("stale_basis", f"seq={result.seq}")]
    panel.status = "shown"
    panel.sentences = result.sentences
    state.candidate_seqs_shown.append(result.seq)
    return []


def _on_ring_fill(state: SessionState, result: GenerationResult) -> list[Effect]:
    ring = state.ring
    if ring is None or ring.pending_seq != result.seq:
        return []  # ring closed or superseded
    origin = state.keywords[ring.origin_id]
    new_ids = tuple(
        state.alloc_keyword(word, KIND_DERIVATIVE, origin.id).id for word in result.words
    )
    page = ring.pages[ring.pending_pos] + new_ids
    ring.pages[ring.pending_pos] = page[:RING_SLOTS]
    remaining = ring.pending_modes
    if remaining:
        seq = state.alloc_seq()
        next_mode, rest = remaining[0], remaining[1:]
        ring.pending_seq = seq
        ring.pending_modes = rest
        return [
            StartDerivation(
                seq=seq,
                group=result.group,
                origin_id=origin.id,
                origin_word=origin.word,
                mode=next_mode,
                displayed=_derivation_forbidden(state, ring),
                context_texts=state.context_window(),
            )
        ]
    ring.pending_seq = None
    return []


def _on_review_page(state: SessionState, result: GenerationResult) -> list[Effect]:
    review = state.review
    if state.mode != MODE_NOTE_DETAIL or review.pending_seq != result.seq:
        return []
    review.pending_seq = None
    review.pages.append(result.sentences)
    review.page = len(review.pages) - 1
    return []


# -- clicks ----------------------------------------------------------------

def _on_click(state: SessionState, t: int, target: str) -> list[Effect]:
    kind = parse_target(target)
    if kind[0] == "bad":
        return [Diagnostic("unknown_target", target)]
    if state.mode in (MODE_BROWSE, MODE_SELECTING, MODE_RING):
        return _click_main(state, t, kind, target)
    if state.mode == MODE_NOTES:
        return _click_notes_list(state, kind, target)
    return _click_note_detail(state, t, kind, target)


def _click_main(state: SessionState, t: int, kind: tuple, target: str) -> list[Effect]:
    tag = kind[0]
    if tag == "kw":
        return _toggle_keyword(state, t, kind[1])
    if tag == "chip":
        if kind[1] not in state.selection:
            return [Diagnostic("not_selected", target)]
        return _toggle_keyword(state, t, kind[1])
    if tag == "cand":
        return _record_sentence(state, t, kind[1])
    if tag == "ring":
        if state.ring is None:
            return [Diagnostic("no_ring", target)]
        return _select_from_ring(state, t, kind[1])
    if tag == "arrow":
        return _page(state, kind[1], kind[2])
    if tag == "btn" and kind[1] == "notes":
        state.return_mode = state.mode
        state.mode = MODE_NOTES
        return []
    if tag == "note":
        return [Diagnostic("wrong_mode", target)]
    return [Diagnostic("unknown_target", target)]


def _toggle_keyword(state: SessionState, t: int, kw_id: int) -> list[Effect]:
    keyword = state.keywords.get(kw_id)
    if keyword is None:
        return [Diagnostic("unknown_keyword", f"kw:{kw_id}")]
    if keyword.kind == KIND_DERIVATIVE and not keyword.selected:
        return [Diagnostic("not_selectable_here", f"kw:{kw_id} is a ring item")]
    if keyword.kind == KIND_CUSTOMIZED and not keyword.selected and not state.selection:
        return [Diagnostic("customized_hidden", "select a context keyword first")]
    if keyword.selected:
        return _deselect(state, t, keyword)
    return _select(state, t, keyword)


def _select(state: SessionState, t: int, keyword: Keyword) -> list[Effect]:
    keyword.selected = True
    state.selection.append(keyword.id)
    if state.episode_first_ms is None:
        state.episode_first_ms = t
    state.episode_last_selection_ms = t
    state.episode_steps += 1
    if state.mode == MODE_BROWSE:
        state.mode = MODE_SELECTING
    return _restart_organize(state)


def _deselect(state: SessionState, t: int, keyword: Keyword) -> list[Effect]:
    keyword.selected = False
    state.selection.remove(keyword.id)
    state.episode_steps += 1
    if not state.selection:
        effects = _cancel_interactive(state)
        state.candidates.reset()
        if state.mode == MODE_SELECTING:
            state.mode = MODE_BROWSE
        state.episode_first_ms = None
        state.episode_last_selection_ms = None
        state.episode_steps = 0
        return effects
    return _restart_organize(state)


def _restart_organize(state: SessionState) -> list[Effect]:
    seq = state.alloc_seq()
    effects = _cancel_interactive(state, watermark=seq)
    panel = state.candidates
    panel.status = "pending"
    panel.seq = seq
    panel.basis = tuple(state.selection)
    panel.sentences = ()
    effects.append(
        StartOrganize(
            seq=seq,
            slot="candidates",
            basis=tuple(state.selection),
            keywords=state.content_keywords(),
            wh_words=state.selected_wh_words(),
            question_only=state.selected_question_only(),
            context_texts=state.context_window(),
        )
    )
    return effects


def _cancel_interactive(state: SessionState, watermark: int | None = None) -> list[Effect]:
    """Abandon superseded interactive generations and clear expectations."""
    if watermark is None:
        watermark = state.next_seq
    if state.candidates.status == "pending" and (state.candidates.seq or 0) < watermark:
        state.candidates.reset()
    ring = state.ring
    if ring is not None and ring.pending_seq is not None and ring.pending_seq < watermark:
        ring.pending_seq = None
        ring.pending_modes = ()
    if state.review.pending_seq is not None and state.review.pending_seq < watermark:
        state.review.pending_seq = None
    return [CancelBelow(seq=watermark)]


def _record_sentence(state: SessionState, t: int, index: int) -> list[Effect]:
    panel = state.candidates
    if not state.selection:
        return [Diagnostic("empty_selection", "nothing selected to record")]
    if panel.status == "pending":
        return [Diagnostic("stale_candidates", "candidates not ready; record refused")]
    if panel.status != "shown" or panel.basis != tuple(state.selection):
        return [Diagnostic("stale_candidates", "candidates do not match selection")]
    if index < 0 or index >= len(panel.sentences):
        return [Diagnostic("no_candidate", f"index {index} out of range")]
    state.episode_steps += 1
    return _finish_note(state, t, "sentence", panel.sentences[index], panel.sentences)


def _record_keywords(state: SessionState, t: int) -> list[Effect]:
    if not state.selection:
        return [Diagnostic("empty_selection", "nothing selected to record")]
    panel = state.candidates
    shown = panel.sentences if (panel.status == "shown" and panel.basis == tuple(state.selection)) else None
    text = ", ".join(state.selection_words())
    state.episode_steps += 1
    return _finish_note(state, t, "keywords", text, shown)


def _finish_note(
    state: SessionState,
    t: int,
    kind: str,
    text: str,
    candidates_shown: tuple[str, ...] | None,
) -> list[Effect]:
    transcripts = []
    for kw_id in state.selection:
        keyword = state.keywords[kw_id]
        if keyword.kind == KIND_CUSTOMIZED:
            continue
        root = keyword
        while root.kind == KIND_DERIVATIVE:
            root = state.keywords[root.source]
        sentence = _sentence_by_id(state, root.source)
        transcripts.append((kw_id, sentence.id, sentence.text))
    note = NoteRecord(
        id=state.next_note_id,
        kind=kind,
        text=text,
        revisions=[text],
        selection_ids=tuple(state.selection),
        selection_words=state.selection_words(),
        selection_kinds=tuple(state.keywords[i].kind for i in state.selection),
        candidates_shown=candidates_shown,
        transcripts=tuple(transcripts),
        context_texts=state.context_window(),
        first_selection_ms=state.episode_first_ms if state.episode_first_ms is not None else t,
        last_selection_ms=(
            state.episode_last_selection_ms
            if state.episode_last_selection_ms is not None
            else t
        ),
        recorded_ms=t,
        steps=state.episode_steps,
    )
    state.next_note_id += 1
    state.notes.append(note)
    effects = _cancel_interactive(state)
    for kw_id in state.selection:
        state.keywords[kw_id].selected = False
    state.selection.clear()
    state.candidates.reset()
    state.ring = None
    state.mode = MODE_BROWSE
    state.episode_first_ms = None
    state.episode_last_selection_ms = None
    state.episode_steps = 0
    effects.append(NoteAdded(note_id=note.id, revision=0))
    return effects


def _sentence_by_id(state: SessionState, sentence_id: int) -> Sentence:
    for sentence in state.transcript.sentences:
        if sentence.id == sentence_id:
            return sentence
    raise KeyError(f"sentence {sentence_id} not in transcript")


def _select_from_ring(state: SessionState, t: int, kw_id: int) -> list[Effect]:
    ring = state.ring
    assert ring is not None
    if kw_id == ring.origin_id:
        return [Diagnostic("ring_center", "origin keyword is already selected")]
    if kw_id not in ring.shown_ids():
        if kw_id not in state.keywords:
            return [Diagnostic("unknown_keyword", f"ring:{kw_id}")]
        return [Diagnostic("not_in_ring", f"ring:{kw_id}")]
    keyword = state.keywords[kw_id]
    keyword.selected = True
    state.selection.append(kw_id)
    if state.episode_first_ms is None:
        state.episode_first_ms = t
    state.episode_last_selection_ms = t
    state.episode_steps += 1
    state.ring = None
    state.mode = MODE_SELECTING
    return _restart_organize(state)


def _page(state: SessionState, surface: str, direction: str) -> list[Effect]:
    step = 1 if direction == "next" else -1
    if surface == "queue":
        if not state.queue.groups:
            return []
        state.queue.window = min(max(state.queue.window + step, 0), len(state.queue.groups) - 1)
        return []
    if surface == "ring":
        ring = state.ring
        if ring is None:
            return [Diagnostic("no_ring", "ring is not open")]
        if direction == "prev":
            ring.page = max(ring.page - 1, 0)
            return []
        if ring.page + 1 < len(ring.pages):
            ring.page += 1
            return []
        if ring.pending_seq is not None:
            return [Diagnostic("ring_pending", "more derivatives are already loading")]
        return _start_ring_page(state, ring)
    if surface == "refine":
        return [Diagnostic("wrong_mode", "refinement paging outside note detail")]
    return [Diagnostic("unknown_target", f"arrow:{surface}:{direction}")]


def _start_ring_page(state: SessionState, ring: DerivativeView) -> list[Effect]:
    origin = state.keywords[ring.origin_id]
    modes = _derivation_modes(origin)
    ring.pages.append(())
    ring.pending_pos = len(ring.pages) - 1
    ring.page = ring.pending_pos
    seq = state.alloc_seq()
    ring.pending_seq = seq
    ring.pending_modes = modes[1:]
    return [
        StartDerivation(
            seq=seq,
            group=state.alloc_group(),
            origin_id=origin.id,
            origin_word=origin.word,
            mode=modes[0],
            displayed=_derivation_forbidden(state, ring),
            context_texts=state.context_window(),
        )
    ]


def _derivation_modes(origin: Keyword) -> tuple[str, ...]:
    # A context-keyword origin yields 2 contextual + 2 exclusive words;
    # deriving further from a derivative keyword yields 4 exclusive.
    if origin.kind == KIND_CONTEXT:
        return ("derive_contextual", "derive_exclusive")
    return ("derive_exclusive", "derive_exclusive")


def _derivation_forbidden(state: SessionState, ring: DerivativeView) -> tuple[str, ...]:
    words: list[str] = []
    group = state.queue.visible_group()
    if group is not None:
        words.extend(state.keywords[i].word for i in group.keyword_ids)
    origin = state.keywords[ring.origin_id]
    if origin.word not in words:
        words.append(origin.word)
    for kw_id in ring.shown_ids():
        word = state.keywords[kw_id].word
        if word not in words:
            words.append(word)
    return tuple(words)


def _open_ring(state: SessionState, origin: Keyword) -> list[Effect]:
    ring = DerivativeView(origin_id=origin.id)
    state.ring = ring
    state.mode = MODE_RING
    modes = _derivation_modes(origin)
    seq = state.alloc_seq()
    ring.pending_seq = seq
    ring.pending_modes = modes[1:]
    ring.pending_pos = 0
    return [
        StartDerivation(
            seq=seq,
            group=state.alloc_group(),
            origin_id=origin.id,
            origin_word=origin.word,
            mode=modes[0],
            displayed=_derivation_forbidden(state, ring),
            context_texts=state.context_window(),
        )
    ]


# -- double clicks ---------------------------------------------------------

def _on_double_click(state: SessionState, t: int, target: str) -> list[Effect]:
    kind = parse_target(target)
    if kind[0] == "bad":
        return [Diagnostic("unknown_target", target)]
    if state.mode in (MODE_NOTES, MODE_NOTE_DETAIL):
        return [Diagnostic("wrong_mode", f"double-click on {target} while reviewing notes")]
    tag = kind[0]
    if tag == "kw":
        keyword = state.keywords.get(kind[1])
        if keyword is None:
            return [Diagnostic("unknown_keyword", target)]
        if keyword.kind == KIND_CUSTOMIZED:
            return [Diagnostic("not_derivable", "customized keywords have no derivatives")]
        if keyword.kind == KIND_DERIVATIVE:
            return [Diagnostic("not_derivable", "use the ring to derive further")]
        effects: list[Effect] = []
        if not keyword.selected:
            effects.extend(_select(state, t, keyword))  # deriving also selects (one step)
        else:
            state.episode_steps += 1
        effects.extend(_open_ring(state, keyword))
        return effects
    if tag == "ring":
        if state.ring is None:
            return [Diagnostic("no_ring", target)]
        keyword = state.keywords.get(kind[1])
        if keyword is None:
            return [Diagnostic("unknown_keyword", target)]
        if kind[1] not in state.ring.shown_ids() and kind[1] != state.ring.origin_id:
            return [Diagnostic("not_in_ring", target)]
        state.episode_steps += 1
        return _open_ring(state, keyword)
    if tag == "chip":
        if kind[1] not in state.selection:
            return [Diagnostic("not_selected", target)]
        return _record_keywords(state, t)
    if tag == "cand":
        if state.candidates.status != "shown" or kind[1] >= len(state.candidates.sentences):
            # The quick-note path double-clicks a selected-keyword chip; a
            # candidate double-click needs a candidate under the cursor.
            return [Diagnostic("no_candidate", target)]
        return _record_keywords(state, t)
    if tag in ("btn", "arrow"):
        return [Diagnostic("wrong_action", f"double-click on {target}")]
    return [Diagnostic("unknown_target", target)]


# -- notes review ----------------------------------------------------------

def _click_notes_list(state: SessionState, kind: tuple, target: str) -> list[Effect]:
    tag = kind[0]
    if tag == "note":
        note = next((n for n in state.notes if n.id == kind[1]), None)
        if note is None:
            return [Diagnostic("unknown_note", target)]
        state.review.note_id = note.id
        state.review.pages = [note.candidates_shown] if note.candidates_shown else []
        state.review.page = 0
        state.review.pending_seq = None
        state.mode = MODE_NOTE_DETAIL
        return []
    if tag == "btn" and kind[1] in ("notes", "back"):
        state.mode = state.return_mode
        return []
    return [Diagnostic("wrong_mode", target)]


def _click_note_detail(state: SessionState, t: int, kind: tuple, target: str) -> list[Effect]:
    review = state.review
    note = next((n for n in state.notes if n.id == review.note_id), None)
    if note is None:
        state.mode = MODE_NOTES
        return [Diagnostic("unknown_note", target)]
    tag = kind[0]
    if tag == "btn" and kind[1] == "back":
        state.mode = MODE_NOTES
        return []
    if tag == "btn" and kind[1] == "notes":
        state.mode = state.return_mode
        return []
    if tag == "arrow" and kind[1] == "refine":
        if kind[2] == "prev":
            review.page = max(review.page - 1, 0)
            return []
        if review.page + 1 < len(review.pages):
            review.page += 1
            return []
        if review.pending_seq is not None:
            return [Diagnostic("refine_pending", "candidates are already loading")]
        seq = state.alloc_seq()
        review.pending_seq = seq
        wh_words = tuple(
            w
            for w, k in zip(note.selection_words, note.selection_kinds)
            if k == KIND_CUSTOMIZED and w != "?"
        )
        question_only = (
            any(
                w == "?" and k == KIND_CUSTOMIZED
                for w, k in zip(note.selection_words, note.selection_kinds)
            )
            and not wh_words
        )
        keywords = tuple(
            w
            for w, k in zip(note.selection_words, note.selection_kinds)
            if k != KIND_CUSTOMIZED
        )
        return [
            CancelBelow(seq=seq),
            StartOrganize(
                seq=seq,
                slot="review",
                basis=(note.id,),
                keywords=keywords,
                wh_words=wh_words,
                question_only=question_only,
                context_texts=note.context_texts,  # context at record time
            ),
        ]
    if tag == "cand":
        if not review.pages or kind[1] >= len(review.pages[review.page]):
            return [Diagnostic("no_candidate", target)]
        text = review.pages[review.page][kind[1]]
        note.revisions.append(text)
        note.text = text
        return [NoteAdded(note_id=note.id, revision=len(note.revisions) - 1)]
    return [Diagnostic("wrong_mode", target)]


# --------------------------------------------------------------------------
# input normalization (raw click streams)

class InputNormalizer:
    """Coalesces two clicks on the same target strictly within 500 ms
    into a double-click.  Clicks on different targets never pair: an
    intervening click flushes the pending one immediately.  A flushed
    click keeps the timestamp of the original press."""

    def __init__(
        self,
        scheduler: Scheduler,
        emit: Callable[[SessionEvent], None],
        window_ms: int = DOUBLE_CLICK_MS,
    ) -> None:
        self.scheduler = scheduler
        self.emit = emit
        self.window_ms = window_ms
        self._pending: tuple[int, str, TimerHandle] | None = None

    def click(self, t: int, target: str) -> None:
        if self._pending is not None:
            pt, ptarget, handle = self._pending
            if target == ptarget and t - pt < self.window_ms:
                handle.cancel()
                self._pending = None
                self.emit(DoubleClick(t=t, target=target))
                return
            handle.cancel()
            self._pending = None
            self.emit(Click(t=pt, target=ptarget))
        handle = self.scheduler.call_later(self.window_ms, self._timeout)
        self._pending = (t, target, handle)

    def double_click(self, t: int, target: str) -> None:
        """Pass through an already-discriminated double click."""
        self.flush()
        self.emit(DoubleClick(t=t, target=target))

    def _timeout(self) -> None:
        self.flush()

    def flush(self) -> None:
        if self._pending is not None:
            t, target, handle = self._pending
            handle.cancel()
            self._pending = None
            self.emit(Click(t=t, target=target))


# --------------------------------------------------------------------------
# canonical serialization (determinism checks, snapshots)

def serialize_state(state: SessionState) -> str:
    """Stable JSON dump of everything observable about the session."""

    def note_dict(note: NoteRecord) -> dict:
        return {
            "id": note.id,
            "kind": note.kind,
            "text": note.text,
            "revisions": list(note.revisions),
            "selection_ids": list(note.selection_ids),
            "selection_words": list(note.selection_words),
            "selection_kinds": list(note.selection_kinds),
            "candidates_shown": list(note.candidates_shown) if note.candidates_shown else None,
            "transcripts": [list(t) for t in note.transcripts],
            "first_selection_ms": note.first_selection_ms,
            "last_selection_ms": note.last_selection_ms,
            "recorded_ms": note.recorded_ms,
            "steps": note.steps,
        }

    payload = {
        "visibility": state.visibility,
        "mode": state.mode,
        "keywords": [
            {
                "id": k.id,
                "word": k.word,
                "kind": k.kind,
                "source": k.source,
                "selected": k.selected,
            }
            for k in sorted(state.keywords.values(), key=lambda k: k.id)
        ],
        "queue": {
            "groups": [
                {"sentence_id": g.sentence_id, "keyword_ids": list(g.keyword_ids)}
                for g in state.queue.groups
            ],
            "window": state.queue.window,
            "latest_sentence_id": state.queue.latest_sentence_id,
        },
        "selection": list(state.selection),
        "candidates": {
            "status": state.candidates.status,
            "seq": state.candidates.seq,
            "basis": list(state.candidates.basis),
            "sentences": list(state.candidates.sentences),
        },
        "ring": (
            {
                "origin_id": state.ring.origin_id,
                "pages": [list(p) for p in state.ring.pages],
                "page": state.ring.page,
                "pending": state.ring.pending_seq is not None,
            }
            if state.ring is not None
            else None
        ),
        "notes": [note_dict(n) for n in state.notes],
        "transcript": [
            {"id": s.id, "text": s.text, "start": s.start, "end": s.end, "ordinal": s.ordinal}
            for s in state.transcript.sentences
        ],
        "review": {
            "note_id": state.review.note_id,
            "pages": [list(p) for p in state.review.pages],
            "page": state.review.page,
            "pending": state.review.pending_seq is not None,
        },
        "counters": [state.next_keyword_id, state.next_seq, state.next_note_id, state.next_group],
        "candidate_seqs_shown": list(state.candidate_seqs_shown),
        "derivative_shown_ms": state.derivative_shown_ms,
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
