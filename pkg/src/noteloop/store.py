"""Durable session persistence and archives.

One directory per session, four files, all UTF-8 line-delimited and
append-only:

* ``manifest``       -- key=value header: ids, config snapshot, prompt
  template hashes (binds the archive to the exact prompts used).
* ``events.log``     -- every input event (user actions, sentences,
  generation results) in processing order.  This is the replayable
  record: folding it through the session transition function rebuilds
  the archived state exactly.
* ``transcript.log`` -- closed sentences (same record format).
* ``notes.log``      -- note revisions (outputs; reproduced by replay).

On a storage failure the store flips to a read-only degraded mode and
keeps the session alive; callers are told via the append return value.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .config import EngineConfig
from .gateway import GenerationResult
from .lineformat import (
    decode_event_line,
    decode_list,
    decode_value,
    encode_event_line,
    encode_fields,
    encode_list,
    encode_value,
)
from .session import (
    Click,
    DoubleClick,
    GenerationArrived,
    NoteAdded,
    NoteRecord,
    SentenceArrived,
    SessionEvent,
    SessionState,
    Touch,
    apply,
    new_session_state,
)
from .transcript import Sentence

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"


# --------------------------------------------------------------------------
# event codec

def encode_event(event: SessionEvent) -> str:
    if isinstance(event, Touch):
        return encode_event_line(event.t, "touch", [("on", "1" if event.on else "0")])
    if isinstance(event, Click):
        return encode_event_line(event.t, "click", [("target", event.target)])
    if isinstance(event, DoubleClick):
        return encode_event_line(event.t, "dblclick", [("target", event.target)])
    if isinstance(event, SentenceArrived):
        s = event.sentence
        return encode_event_line(
            event.t,
            "sentence",
            [
                ("id", str(s.id)),
                ("start", str(s.start)),
                ("end", str(s.end)),
                ("ordinal", str(s.ordinal)),
                ("text", s.text),
            ],
        )
    if isinstance(event, GenerationArrived):
        r = event.result
        return encode_event_line(
            event.t,
            "generation",
            [
                ("seq", str(r.seq)),
                ("kind", r.kind),
                ("slot", r.slot),
                ("group", str(r.group)),
                ("basis", ",".join(str(b) for b in r.basis)),
                ("latency", str(r.latency_ms)),
                ("retried", str(r.retried)),
                ("dropped", str(r.dropped)),
                ("error", r.error or ""),
                ("words", encode_list(r.words)),
                ("sentences", encode_list(r.sentences)),
            ],
        )
    raise TypeError(f"cannot encode event {event!r}")


def decode_event(line: str) -> SessionEvent:
    t_ms, kind, fields = decode_event_line(line)
    if kind == "touch":
        return Touch(t=t_ms, on=fields["on"] == "1")
    if kind == "click":
        return Click(t=t_ms, target=fields["target"])
    if kind == "dblclick":
        return DoubleClick(t=t_ms, target=fields["target"])
    if kind == "sentence":
        return SentenceArrived(
            t=t_ms,
            sentence=Sentence(
                id=int(fields["id"]),
                text=fields["text"],
                start=int(fields["start"]),
                end=int(fields["end"]),
                ordinal=int(fields["ordinal"]),
            ),
        )
    if kind == "generation":
        basis = tuple(int(b) for b in fields["basis"].split(",")) if fields["basis"] else ()
        return GenerationArrived(
            t=t_ms,
            result=GenerationResult(
                seq=int(fields["seq"]),
                kind=fields["kind"],
                slot=fields["slot"],
                group=int(fields["group"]),
                basis=basis,
                words=tuple(decode_list(fields["words"])),
                sentences=tuple(decode_list(fields["sentences"])),
                latency_ms=int(fields["latency"]),
                retried=int(fields["retried"]),
                dropped=int(fields.get("dropped", "0")),
                error=fields["error"] or None,
            ),
        )
    raise ValueError(f"unknown event kind {kind!r}")


def note_revision_line(t_ms: int, note: NoteRecord, revision: int) -> str:
    """Render one notes.log record.

    Revision 0 carries the full note snapshot; later revisions carry
    only the replacement text.
    """
    fields = [
        ("note", str(note.id)),
        ("revision", str(revision)),
        ("kind", note.kind),
        ("text", note.revisions[revision]),
    ]
    if revision == 0:
        fields.extend(
            [
                ("selection_ids", ",".join(str(i) for i in note.selection_ids)),
                ("selection_words", encode_list(note.selection_words)),
                ("selection_kinds", ",".join(note.selection_kinds)),
                (
                    "candidates",
                    encode_list(note.candidates_shown) if note.candidates_shown is not None else "-",
                ),
                ("transcripts", encode_value(json.dumps([list(x) for x in note.transcripts]))),
                ("first", str(note.first_selection_ms)),
                ("last", str(note.last_selection_ms)),
                ("recorded", str(note.recorded_ms)),
                ("steps", str(note.steps)),
            ]
        )
    return f"{t_ms}\tnote\t{encode_fields(fields)}"


# --------------------------------------------------------------------------
# store

class SessionStore:
    """Append-only writer for one session directory."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.degraded = False
        self._files: dict[str, object] = {}

    def open(self, session_id: str, created_ms: int, config: EngineConfig,
             template_hashes: dict[str, str]) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        manifest = [("version", FORMAT_VERSION), ("session", session_id),
                    ("created_ms", str(created_ms))]
        manifest.extend(config.manifest_fields())
        for kind in sorted(template_hashes):
            manifest.append((f"template_hash_{kind}", template_hashes[kind]))
        lines = [f"{key}={encode_value(value)}" for key, value in manifest]
        (self.directory / "manifest").write_text("\n".join(lines) + "\n", "utf-8")
        for name in ("events.log", "transcript.log", "notes.log"):
            self._files[name] = (self.directory / name).open("a", encoding="utf-8")

    def _append(self, name: str, line: str) -> bool:
        if self.degraded:
            return False
        handle = self._files.get(name)
        if handle is None:
            return False
        try:
            handle.write(line + "\n")
            handle.flush()
            return True
        except (OSError, ValueError) as exc:  # ValueError: closed handle
            logger.error("storage failure on %s: %s; store is now read-only", name, exc)
            self.degraded = True
            return False

    def append_event(self, event: SessionEvent) -> bool:
        return self._append("events.log", encode_event(event))

    def append_sentence(self, t_ms: int, sentence: Sentence) -> bool:
        line = encode_event(SentenceArrived(t=t_ms, sentence=sentence))
        return self._append("transcript.log", line)

    def append_note(self, t_ms: int, note: NoteRecord, revision: int) -> bool:
        return self._append("notes.log", note_revision_line(t_ms, note, revision))

    def close(self) -> None:
        for handle in self._files.values():
            try:
                handle.close()
            except OSError:
                pass
        self._files.clear()


# --------------------------------------------------------------------------
# archives

@dataclass
class SessionArchive:
    directory: Path
    manifest: dict[str, str]
    event_lines: list[str]
    transcript_lines: list[str]
    note_lines: list[str]

    @property
    def session_id(self) -> str:
        return self.manifest.get("session", "?")

    def events(self) -> list[SessionEvent]:
        return [decode_event(line) for line in self.event_lines]

    def config(self) -> EngineConfig:
        words = self.manifest.get("customized_keywords", "")
        return EngineConfig(
            customized_keywords=tuple(words.split("|")) if words else (),
            backend=self.manifest.get("backend", "mock"),
        )


def load_archive(directory: str | Path) -> SessionArchive:
    directory = Path(directory)
    manifest: dict[str, str] = {}
    for line in (directory / "manifest").read_text("utf-8").splitlines():
        if not line.strip():
            continue
        key, _, raw = line.partition("=")
        manifest[key] = decode_value(raw)

    def read_lines(name: str) -> list[str]:
        path = directory / name
        if not path.exists():
            return []
        return [l for l in path.read_text("utf-8").splitlines() if l.strip()]

    return SessionArchive(
        directory=directory,
        manifest=manifest,
        event_lines=read_lines("events.log"),
        transcript_lines=read_lines("transcript.log"),
        note_lines=read_lines("notes.log"),
    )


def replay_archive(archive: SessionArchive) -> tuple[SessionState, list[str]]:
    """Fold the archived event log through the transition function.

    Returns the final state and the notes.log lines it reproduces;
    byte-equality with ``archive.note_lines`` is the replay-closure
    property the store guarantees.
    """
    state = new_session_state(archive.config())
    note_lines: list[str] = []
    for event in archive.events():
        effects = apply(state, event)
        for effect in effects:
            if isinstance(effect, NoteAdded):
                note = next(n for n in state.notes if n.id == effect.note_id)
                note_lines.append(note_revision_line(event.t, note, effect.revision))
    return state, note_lines


# --------------------------------------------------------------------------
# export

def export_plain_text(archive: SessionArchive) -> str:
    lines = [f"Session {archive.session_id} notes", ""]
    notes = _collect_notes(archive)
    for position, note in enumerate(notes, start=1):
        lines.append(f"{position}. [{note['kind']}] {note['text']}")
        if len(note["revisions"]) > 1:
            lines.append(f"   (revised {len(note['revisions']) - 1}x;"
                         f" originally: {note['revisions'][0]})")
    return "\n".join(lines) + "\n"


def export_structured(archive: SessionArchive) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "manifest": archive.manifest,
        "events": archive.event_lines,
        "transcript": archive.transcript_lines,
        "note_lines": archive.note_lines,
        "notes": _collect_notes(archive),  # derived, for readers
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def import_structured(document: str) -> SessionArchive:
    payload = json.loads(document)
    return SessionArchive(
        directory=Path("."),
        manifest=dict(payload["manifest"]),
        event_lines=list(payload["events"]),
        transcript_lines=list(payload["transcript"]),
        note_lines=list(payload["note_lines"]),
    )


def _collect_notes(archive: SessionArchive) -> list[dict]:
    notes: dict[int, dict] = {}
    order: list[int] = []
    for line in archive.note_lines:
        _, _, fields = decode_event_line(line)
        note_id = int(fields["note"])
        if note_id not in notes:
            entry: dict = {
                "id": note_id,
                "kind": fields["kind"],
                "text": fields["text"],
                "revisions": [],
            }
            if "selection_words" in fields:
                entry["selection_words"] = decode_list(fields["selection_words"])
                entry["selection_kinds"] = fields["selection_kinds"].split(",")
                entry["recorded_ms"] = int(fields["recorded"])
                entry["steps"] = int(fields["steps"])
            notes[note_id] = entry
            order.append(note_id)
        notes[note_id]["text"] = fields["text"]
        notes[note_id]["revisions"].append(fields["text"])
    return [notes[i] for i in order]
