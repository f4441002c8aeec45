"""Network boundary: session hub, wire protocol, WebSocket adapter.

Wire format (protocol version 1): one record per frame, encoded with the
shared key=value line codec.  Client commands carry a client-chosen
``cmd`` id and are idempotent under duplicate delivery; server messages
carry a per-session ``seq`` that is strictly increasing, so a client can
rely on ordering.

On subscribe the server sends a full state snapshot (every surface),
then only the surfaces whose canonical rendering changed.  Because each
update IS the canonical rendering, snapshot-plus-updates always equals a
fresh snapshot -- the UI never needs private state.

The hub is transport-agnostic and synchronous; the FastAPI WebSocket
endpoint at the bottom is a thin adapter used by ``noteloop serve``.
"""

from __future__ import annotations

import asyncio
import logging
import secrets
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .clock import Scheduler
from .config import EngineConfig
from .engine import SessionEngine
from .lineformat import decode_fields, encode_fields, encode_list, encode_value
from .session import (
    Diagnostic,
    DoubleClick,
    Keyword,
    SessionState,
    Touch,
    Click,
    MODE_NOTE_DETAIL,
    MODE_RING,
)
from .store import SessionStore
from .transcript import read_trace

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"

SURFACES = (
    "visibility",
    "mode",
    "queue",
    "customized",
    "selection",
    "candidates",
    "ring",
    "notes",
    "note_detail",
)


# --------------------------------------------------------------------------
# surface rendering

def _kw_item(keyword: Keyword, underlined: bool = False) -> str:
    return (
        f"{keyword.id}:{encode_value(keyword.word)}:"
        f"{1 if keyword.selected else 0}:{1 if underlined else 0}"
    )


def render_surfaces(state: SessionState) -> dict[str, str]:
    """Canonical per-surface renderings of everything a client displays."""
    surfaces: dict[str, str] = {}
    surfaces["visibility"] = encode_fields([("value", state.visibility)])
    surfaces["mode"] = encode_fields([("value", state.mode)])

    group = state.queue.visible_group()
    items = []
    underlined = False
    if group is not None:
        underlined = group.sentence_id == state.queue.latest_sentence_id
        items = [_kw_item(state.keywords[i], underlined) for i in group.keyword_ids]
    surfaces["queue"] = encode_fields(
        [
            ("window", str(state.queue.window)),
            ("total", str(len(state.queue.groups))),
            ("has_prev", "1" if state.queue.window > 0 else "0"),
            (
                "has_next",
                "1" if state.queue.window + 1 < len(state.queue.groups) else "0",
            ),
            ("items", encode_list(items)),
        ]
    )

    customized = [
        _kw_item(k)
        for k in sorted(state.keywords.values(), key=lambda k: k.id)
        if k.kind == "customized"
    ]
    surfaces["customized"] = encode_fields(
        [
            ("visible", "1" if state.selection else "0"),
            ("items", encode_list(customized)),
        ]
    )

    surfaces["selection"] = encode_fields(
        [("items", encode_list([_kw_item(state.keywords[i]) for i in state.selection]))]
    )

    panel = state.candidates
    surfaces["candidates"] = encode_fields(
        [
            ("status", panel.status),
            ("gen_seq", str(panel.seq) if panel.seq is not None else ""),
            ("items", encode_list([encode_value(s) for s in panel.sentences])),
        ]
    )

    ring = state.ring
    if ring is None:
        surfaces["ring"] = encode_fields([("open", "0")])
    else:
        page = ring.pages[ring.page] if ring.page < len(ring.pages) else ()
        surfaces["ring"] = encode_fields(
            [
                ("open", "1"),
                ("origin", _kw_item(state.keywords[ring.origin_id])),
                ("page", str(ring.page)),
                ("pages", str(len(ring.pages))),
                ("pending", "1" if ring.pending_seq is not None else "0"),
                ("items", encode_list([_kw_item(state.keywords[i]) for i in page])),
            ]
        )

    notes_items = [
        f"{n.id}:{n.kind}:{encode_value(n.text)}" for n in state.notes
    ]
    surfaces["notes"] = encode_fields(
        [("count", str(len(state.notes))), ("items", encode_list(notes_items))]
    )

    if state.mode == MODE_NOTE_DETAIL and state.review.note_id is not None:
        note = next((n for n in state.notes if n.id == state.review.note_id), None)
    else:
        note = None
    if note is None:
        surfaces["note_detail"] = encode_fields([("open", "0")])
    else:
        pages = state.review.pages
        page_items = pages[state.review.page] if pages else ()
        transcripts = [
            f"{kw_id}:{sentence_id}:{encode_value(text)}"
            for kw_id, sentence_id, text in note.transcripts
        ]
        surfaces["note_detail"] = encode_fields(
            [
                ("open", "1"),
                ("note", str(note.id)),
                ("note_kind", note.kind),
                ("text", encode_value(note.text)),
                ("revisions", str(len(note.revisions))),
                ("page", str(state.review.page)),
                ("pages", str(len(pages))),
                ("pending", "1" if state.review.pending_seq is not None else "0"),
                ("keywords", encode_list(list(note.selection_words))),
                ("items", encode_list([encode_value(s) for s in page_items])),
                ("transcripts", encode_list(transcripts)),
            ]
        )
    return surfaces


# --------------------------------------------------------------------------
# hub

class Connection:
    """Transport seam: the hub calls ``send_line``; adapters override."""

    def send_line(self, line: str) -> None:
        raise NotImplementedError


@dataclass
class _Binding:
    connection: Connection
    session_id: str
    seen_cmds: set[str] = field(default_factory=set)
    last_sent: dict[str, str] = field(default_factory=dict)


class SessionHub:
    """Owns sessions and fans ordered updates out to subscribers."""

    def __init__(
        self,
        config: EngineConfig,
        scheduler: Scheduler,
        sessions_root: str | Path | None = None,
        backend_factory: Callable[[], object] | None = None,
    ) -> None:
        self.config = config
        self.scheduler = scheduler
        self.sessions_root = Path(sessions_root) if sessions_root else None
        self.backend_factory = backend_factory
        self.engines: dict[str, SessionEngine] = {}
        self._bindings: dict[str, list[_Binding]] = {}
        self._seq: dict[str, int] = {}
        self._by_conn: dict[int, _Binding] = {}

    # -- sessions ----------------------------------------------------------

    def get_or_create(self, session_id: str) -> SessionEngine:
        if session_id in self.engines:
            return self.engines[session_id]
        store = None
        if self.sessions_root is not None:
            store = SessionStore(self.sessions_root / session_id)
        backend = self.backend_factory() if self.backend_factory else None
        engine = SessionEngine(
            session_id, self.config, self.scheduler, backend=backend, store=store
        )
        engine.subscribe(lambda event, effects: self._on_session_event(session_id, effects))
        self.engines[session_id] = engine
        self._bindings[session_id] = []
        self._seq[session_id] = 0
        return engine

    def _on_session_event(self, session_id: str, effects: list) -> None:
        diags = [e for e in effects if isinstance(e, Diagnostic)]
        self._broadcast(session_id, diags)

    def _next_seq(self, session_id: str) -> int:
        self._seq[session_id] += 1
        return self._seq[session_id]

    def _broadcast(self, session_id: str, diagnostics: list[Diagnostic]) -> None:
        engine = self.engines[session_id]
        surfaces = render_surfaces(engine.state)
        for binding in self._bindings[session_id]:
            for surface in SURFACES:
                payload = surfaces[surface]
                if binding.last_sent.get(surface) == payload:
                    continue
                binding.last_sent[surface] = payload
                seq = self._next_seq(session_id)
                binding.connection.send_line(
                    f"seq={seq} kind=update surface={surface} {payload}"
                )
            for diag in diagnostics:
                seq = self._next_seq(session_id)
                binding.connection.send_line(
                    "seq=%d kind=diagnostic code=%s detail=%s"
                    % (seq, encode_value(diag.code), encode_value(diag.detail))
                )

    def _send_snapshot(self, binding: _Binding) -> None:
        engine = self.engines[binding.session_id]
        surfaces = render_surfaces(engine.state)
        for surface in SURFACES:
            payload = surfaces[surface]
            binding.last_sent[surface] = payload
            seq = self._next_seq(binding.session_id)
            binding.connection.send_line(
                f"seq={seq} kind=update surface={surface} {payload}"
            )

    # -- client commands ----------------------------------------------------

    def handle_line(self, connection: Connection, line: str) -> None:
        try:
            fields = decode_fields(line.strip())
        except ValueError as exc:
            connection.send_line(f"seq=0 kind=error message={encode_value(str(exc))}")
            return
        kind = fields.get("kind", "")
        if kind == "hello":
            self._handle_hello(connection, fields)
            return
        binding = self._by_conn.get(id(connection))
        if binding is None:
            connection.send_line("seq=0 kind=error message=say%20hello%20first")
            return
        cmd = fields.get("cmd", "")
        if cmd:
            if cmd in binding.seen_cmds:
                return  # duplicate delivery; already applied
            binding.seen_cmds.add(cmd)
        engine = self.engines[binding.session_id]
        now = self.scheduler.now_ms()
        t_ms = int(fields["t"]) if "t" in fields else now
        if kind == "touch":
            engine.post(Touch(t=t_ms, on=fields.get("on") == "1"))
        elif kind == "click":
            engine.post(Click(t=t_ms, target=fields.get("target", "")))
        elif kind == "dblclick":
            engine.post(DoubleClick(t=t_ms, target=fields.get("target", "")))
        elif kind == "play_trace":
            self._play_trace(engine, fields)
        elif kind == "bye":
            self.detach(connection)
        else:
            connection.send_line(
                f"seq=0 kind=error message={encode_value('unknown command ' + kind)}"
            )

    def _handle_hello(self, connection: Connection, fields: dict[str, str]) -> None:
        if fields.get("version") != PROTOCOL_VERSION:
            connection.send_line(
                "seq=0 kind=error message="
                + encode_value(f"protocol version mismatch (server {PROTOCOL_VERSION})")
            )
            return
        if self.config.auth_token and fields.get("token") != self.config.auth_token:
            connection.send_line("seq=0 kind=error message=bad%20token")
            return
        session_id = fields.get("session") or secrets.token_hex(4)
        self.get_or_create(session_id)
        binding = _Binding(connection=connection, session_id=session_id)
        self._bindings[session_id].append(binding)
        self._by_conn[id(connection)] = binding
        connection.send_line(
            f"seq=0 kind=welcome version={PROTOCOL_VERSION} session={encode_value(session_id)}"
        )
        self._send_snapshot(binding)

    def detach(self, connection: Connection) -> None:
        binding = self._by_conn.pop(id(connection), None)
        if binding is None:
            return
        self._bindings[binding.session_id].remove(binding)

    def _play_trace(self, engine: SessionEngine, fields: dict[str, str]) -> None:
        """Stream a trace file through the session (the demo speech player)."""
        name = fields.get("name", "demo")
        speed = float(fields.get("speed", "1"))
        if name == "demo":
            trace_text = (
                resources.files("noteloop.data").joinpath("demo.trace").read_text("utf-8")
            )
            windows = _parse_trace_text(trace_text)
        else:
            windows = read_trace(name)
        base = self.scheduler.now_ms()
        offset = windows[0].start if windows else 0
        for window in windows:
            at = base + int((window.end - offset) / max(speed, 0.001))
            self.scheduler.call_at(at, lambda w=window: engine.ingest(w))


def _parse_trace_text(text: str):
    from .transcript import TimedText

    events = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        start_s, end_s, body = raw.split("\t")
        events.append(TimedText(text=body, start=int(start_s), end=int(end_s)))
    return events


# --------------------------------------------------------------------------
# FastAPI / WebSocket adapter (live serving)

def create_app(config: EngineConfig) -> FastAPI:
    """Build the ASGI app: WebSocket endpoint plus static frontend."""
    from .clock import AsyncScheduler

    app = FastAPI(title="noteloop")
    state: dict[str, object] = {}

    @app.on_event("startup")
    async def startup() -> None:
        loop = asyncio.get_running_loop()
        scheduler = AsyncScheduler(loop)
        state["hub"] = SessionHub(
            config, scheduler, sessions_root=config.sessions_dir or None
        )

    class _WsConnection(Connection):
        def __init__(self, websocket: WebSocket, loop) -> None:
            self.websocket = websocket
            self.loop = loop
            self.queue: asyncio.Queue[str] = asyncio.Queue()

        def send_line(self, line: str) -> None:
            self.queue.put_nowait(line)

    @app.websocket("/ws")
    async def websocket_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        hub: SessionHub = state["hub"]  # type: ignore[assignment]
        conn = _WsConnection(websocket, asyncio.get_running_loop())

        async def sender() -> None:
            while True:
                line = await conn.queue.get()
                await websocket.send_text(line)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                line = await websocket.receive_text()
                hub.handle_line(conn, line)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            hub.detach(conn)

    frontend = Path(config.frontend_dir) if config.frontend_dir else None
    if frontend and frontend.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend), html=True), name="app")
    return app


def serve(config: EngineConfig) -> None:
    """Blocking entry point for ``noteloop serve``."""
    import socket

    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((config.host, config.port))
    except OSError as exc:
        raise SystemExit(
            f"cannot listen on {config.host}:{config.port}: {exc}"
        ) from exc
    finally:
        probe.close()
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
