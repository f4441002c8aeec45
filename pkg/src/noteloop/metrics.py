"""Note metrics over a finished (or replayed) session.

Definitions:

* note time: first keyword selection to the recording action, which
  counts as the last selection.
* quick note: keywords-kind note whose selection holds only context or
  customized keywords and whose final recording step came less than 2 s
  after the last selection.
* beyond-context note: selection contains at least one derivative
  keyword.
* derivative display fraction: time the derivative ring was visible
  (ring open and display on) divided by the summed note times.

The rendered report is one ``name=value`` line per metric in a fixed
order, so byte comparison is a valid determinism check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .gateway import GenerationResult
from .session import KIND_DERIVATIVE, NoteRecord, SessionState

QUICK_NOTE_MS = 2000

_LATENCY_GROUPS = {
    "extraction": "extraction",
    "derive_contextual": "derivation",
    "derive_exclusive": "derivation",
    "organize": "organization",
}


def note_time(note: NoteRecord) -> int:
    return note.recorded_ms - note.first_selection_ms


def classify_quick(note: NoteRecord) -> bool:
    if note.kind != "keywords":
        return False
    if any(kind == KIND_DERIVATIVE for kind in note.selection_kinds):
        return False
    return (note.recorded_ms - note.last_selection_ms) < QUICK_NOTE_MS


@dataclass
class NoteMetrics:
    note_id: int
    kind: str
    time_ms: int
    steps: int
    quick: bool
    beyond_context: bool
    keyword_count: int


@dataclass
class MetricsReport:
    note_count: int = 0
    notes: list[NoteMetrics] = field(default_factory=list)
    pct_sentence_notes: float = 0.0
    pct_keyword_notes: float = 0.0
    pct_quick_notes: float = 0.0
    pct_beyond_context_notes: float = 0.0
    keywords_per_keyword_note: float = 0.0
    derivative_display_time_fraction: float = 0.0
    latency_count: dict[str, int] = field(default_factory=dict)
    latency_mean_ms: dict[str, float] = field(default_factory=dict)

    def render(self) -> str:
        lines = [
            f"note_count={self.note_count}",
            f"pct_sentence_notes={self.pct_sentence_notes:.1f}",
            f"pct_keyword_notes={self.pct_keyword_notes:.1f}",
            f"pct_quick_notes={self.pct_quick_notes:.1f}",
            f"pct_beyond_context_notes={self.pct_beyond_context_notes:.1f}",
            f"keywords_per_keyword_note={self.keywords_per_keyword_note:.2f}",
            f"derivative_display_time_fraction={self.derivative_display_time_fraction:.4f}",
        ]
        for group in ("extraction", "derivation", "organization"):
            lines.append(f"latency_{group}_count={self.latency_count.get(group, 0)}")
            lines.append(f"latency_{group}_mean_ms={self.latency_mean_ms.get(group, 0.0):.1f}")
        for position, note in enumerate(self.notes, start=1):
            prefix = f"note_{position}"
            lines.append(f"{prefix}_kind={note.kind}")
            lines.append(f"{prefix}_time_ms={note.time_ms}")
            lines.append(f"{prefix}_steps={note.steps}")
            lines.append(f"{prefix}_quick={1 if note.quick else 0}")
            lines.append(f"{prefix}_beyond_context={1 if note.beyond_context else 0}")
            lines.append(f"{prefix}_keywords={note.keyword_count}")
        return "\n".join(lines) + "\n"


def compute_metrics(
    state: SessionState, results: list[GenerationResult]
) -> MetricsReport:
    report = MetricsReport()
    report.note_count = len(state.notes)
    quick = 0
    beyond = 0
    sentence_kind = 0
    keyword_counts: list[int] = []
    total_time = 0
    for note in state.notes:
        is_quick = classify_quick(note)
        is_beyond = any(kind == KIND_DERIVATIVE for kind in note.selection_kinds)
        duration = note_time(note)
        total_time += duration
        if note.kind == "sentence":
            sentence_kind += 1
        else:
            keyword_counts.append(len(note.selection_ids))
        quick += 1 if is_quick else 0
        beyond += 1 if is_beyond else 0
        report.notes.append(
            NoteMetrics(
                note_id=note.id,
                kind=note.kind,
                time_ms=duration,
                steps=note.steps,
                quick=is_quick,
                beyond_context=is_beyond,
                keyword_count=len(note.selection_ids),
            )
        )
    if report.note_count:
        count = report.note_count
        report.pct_sentence_notes = 100.0 * sentence_kind / count
        report.pct_keyword_notes = 100.0 * (count - sentence_kind) / count
        report.pct_quick_notes = 100.0 * quick / count
        report.pct_beyond_context_notes = 100.0 * beyond / count
    if keyword_counts:
        report.keywords_per_keyword_note = sum(keyword_counts) / len(keyword_counts)
    if total_time > 0:
        report.derivative_display_time_fraction = state.derivative_shown_ms / total_time

    sums: dict[str, int] = {}
    counts: dict[str, int] = {}
    for result in results:
        if result.error is not None:
            continue
        group = _LATENCY_GROUPS.get(result.kind)
        if group is None:
            continue
        sums[group] = sums.get(group, 0) + result.latency_ms
        counts[group] = counts.get(group, 0) + 1
    for group, count in counts.items():
        report.latency_count[group] = count
        report.latency_mean_ms[group] = sums[group] / count
    return report
