"""Brute-force metrics recomputation from a raw event log.

This is a deliberately separate interpretation of the interaction rules:
it reads events.log lines (plus the customized keyword list from the
manifest) and recomputes every metric without touching the session
module's bookkeeping.  Used to cross-check MetricsReport.
"""

from noteloop.lineformat import decode_event_line, decode_list
from noteloop.metrics import MetricsReport

QUICK_MS = 2000

_GROUPS = {
    "extraction": "extraction",
    "derive_contextual": "derivation",
    "derive_exclusive": "derivation",
    "organize": "organization",
}


class _Note:
    def __init__(self, kind, text, selection, kinds, first, last, recorded, steps):
        self.kind = kind
        self.text = text
        self.selection = selection
        self.kinds = kinds
        self.first = first
        self.last = last
        self.recorded = recorded
        self.steps = steps


def recompute(event_lines, customized_words):
    kinds = {}
    words = {}
    for index, word in enumerate(customized_words, start=1):
        kinds[index] = "customized"
        words[index] = word
    selection = []
    visible = False
    ring_open = False
    ring_origin = None
    ring_ids = set()
    ring_group = None  # accepted generation group for the open ring
    ring_time = 0
    last_t = 0
    # candidates display per the log: the latest organize whose basis
    # equals the current selection and arrived after the last change
    cand_sentences = None
    episode_first = None
    episode_last = None
    steps = 0
    notes = []
    latency_sums = {}
    latency_counts = {}

    def advance(t):
        nonlocal ring_time, last_t
        if t > last_t:
            if visible and ring_open:
                ring_time += t - last_t
            last_t = t

    def selection_changed():
        nonlocal cand_sentences
        cand_sentences = None

    def start_episode(t):
        nonlocal episode_first, episode_last
        if episode_first is None:
            episode_first = t
        episode_last = t

    def reset_episode():
        nonlocal episode_first, episode_last, steps
        episode_first = None
        episode_last = None
        steps = 0

    def record(kind, text, t):
        nonlocal ring_open, ring_origin, ring_group
        sel_kinds = [kinds[i] for i in selection]
        notes.append(
            _Note(
                kind,
                text,
                list(selection),
                sel_kinds,
                episode_first if episode_first is not None else t,
                episode_last if episode_last is not None else t,
                t,
                steps,
            )
        )
        selection.clear()
        selection_changed()
        ring_open = False
        ring_origin = None
        ring_group = None
        reset_episode()

    for line in event_lines:
        t, kind, fields = decode_event_line(line)
        advance(t)
        if kind == "touch":
            visible = fields["on"] == "1"
        elif kind == "generation":
            if fields["error"]:
                continue
            group = _GROUPS.get(fields["kind"])
            if group:
                latency_sums[group] = latency_sums.get(group, 0) + int(fields["latency"])
                latency_counts[group] = latency_counts.get(group, 0) + 1
            slot = fields["slot"]
            basis = [int(b) for b in fields["basis"].split(",")] if fields["basis"] else []
            if slot == "queue":
                for word in decode_list(fields["words"]):
                    new_id = max(kinds) + 1 if kinds else 1
                    kinds[new_id] = "context"
                    words[new_id] = word
            elif slot == "ring":
                # A stale ring fill (ring closed or replaced) is ignored by
                # the session and must not allocate keyword ids here either.
                group = int(fields["group"])
                accepted = (
                    ring_open
                    and basis
                    and basis[0] == ring_origin
                    and (ring_group is None or ring_group == group)
                )
                if accepted:
                    ring_group = group
                    for word in decode_list(fields["words"]):
                        new_id = max(kinds) + 1 if kinds else 1
                        kinds[new_id] = "derivative"
                        words[new_id] = word
                        ring_ids.add(new_id)
            elif slot == "candidates":
                if basis == selection and selection:
                    cand_sentences = decode_list(fields["sentences"])
        elif kind == "click":
            if not visible:
                continue
            target = fields["target"]
            parts = target.split(":")
            if parts[0] in ("kw", "chip"):
                kw_id = int(parts[1])
                if kw_id not in kinds or kinds[kw_id] == "derivative" and kw_id not in selection:
                    continue
                if kw_id in selection:
                    selection.remove(kw_id)
                    steps += 1
                    selection_changed()
                    if not selection:
                        reset_episode()
                elif parts[0] == "kw":
                    if kinds[kw_id] == "customized" and not selection:
                        continue
                    selection.append(kw_id)
                    steps += 1
                    start_episode(t)
                    selection_changed()
            elif parts[0] == "ring":
                kw_id = int(parts[1])
                if ring_open and kw_id in ring_ids and kw_id != ring_origin:
                    selection.append(kw_id)
                    steps += 1
                    start_episode(t)
                    selection_changed()
                    ring_open = False
                    ring_origin = None
            elif parts[0] == "cand":
                index = int(parts[1])
                if cand_sentences is not None and index < len(cand_sentences) and selection:
                    steps += 1
                    record("sentence", cand_sentences[index], t)
        elif kind == "dblclick":
            if not visible:
                continue
            target = fields["target"]
            parts = target.split(":")
            if parts[0] == "kw":
                kw_id = int(parts[1])
                if kinds.get(kw_id) != "context":
                    continue
                if kw_id not in selection:
                    selection.append(kw_id)
                    start_episode(t)
                    selection_changed()
                steps += 1
                ring_open = True
                ring_origin = kw_id
                ring_ids = set()
                ring_group = None
            elif parts[0] == "ring":
                kw_id = int(parts[1])
                if ring_open and (kw_id in ring_ids or kw_id == ring_origin):
                    steps += 1
                    ring_origin = kw_id
                    ring_ids = set()
                    ring_group = None
            elif parts[0] == "chip":
                kw_id = int(parts[1])
                if kw_id in selection:
                    steps += 1
                    record(
                        "keywords", ", ".join(words[i] for i in selection), t
                    )
            elif parts[0] == "cand":
                if cand_sentences is not None and int(parts[1]) < len(cand_sentences) and selection:
                    steps += 1
                    record(
                        "keywords", ", ".join(words[i] for i in selection), t
                    )

    report = MetricsReport()
    report.note_count = len(notes)
    total_time = 0
    quick = beyond = sentences = 0
    kw_counts = []
    from noteloop.metrics import NoteMetrics

    for position, note in enumerate(notes, start=1):
        duration = note.recorded - note.first
        total_time += duration
        is_quick = (
            note.kind == "keywords"
            and all(k in ("context", "customized") for k in note.kinds)
            and (note.recorded - note.last) < QUICK_MS
        )
        is_beyond = any(k == "derivative" for k in note.kinds)
        quick += 1 if is_quick else 0
        beyond += 1 if is_beyond else 0
        if note.kind == "sentence":
            sentences += 1
        else:
            kw_counts.append(len(note.selection))
        report.notes.append(
            NoteMetrics(
                note_id=position,
                kind=note.kind,
                time_ms=duration,
                steps=note.steps,
                quick=is_quick,
                beyond_context=is_beyond,
                keyword_count=len(note.selection),
            )
        )
    if notes:
        report.pct_sentence_notes = 100.0 * sentences / len(notes)
        report.pct_keyword_notes = 100.0 * (len(notes) - sentences) / len(notes)
        report.pct_quick_notes = 100.0 * quick / len(notes)
        report.pct_beyond_context_notes = 100.0 * beyond / len(notes)
    if kw_counts:
        report.keywords_per_keyword_note = sum(kw_counts) / len(kw_counts)
    if total_time > 0:
        report.derivative_display_time_fraction = ring_time / total_time
    for group, count in latency_counts.items():
        report.latency_count[group] = count
        report.latency_mean_ms[group] = latency_sums[group] / count
    return report
