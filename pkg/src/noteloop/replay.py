"""Scripted replay: trace + script -> archive + metrics.

The script format mirrors the event log (``t_ms<TAB>kind<TAB>payload``),
so a recorded session replays as a script.  User-action kinds (touch,
click, dblclick) are dispatched at their timestamps; ``click`` lines go
through the double-click discrimination window exactly as raw input
would.  Sentence/generation/note lines are skipped -- the trace and the
backend regenerate them deterministically.

Everything runs on the virtual scheduler with the mock backend, so a
replay is a pure function of (trace, script, config).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .clock import VirtualScheduler
from .config import EngineConfig
from .engine import SessionEngine
from .gateway import GenerationResult
from .lineformat import decode_event_line
from .metrics import MetricsReport, compute_metrics
from .session import Click, Diagnostic, DoubleClick, GenerationArrived, Touch
from .store import SessionStore
from .transcript import TimedText, read_trace

_FATAL_CODES = {"unknown_keyword", "unknown_target", "unknown_note"}
_SKIPPED_KINDS = {"sentence", "generation", "note"}


class ReplayScriptError(RuntimeError):
    def __init__(self, path: str, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass
class ScriptAction:
    line_no: int
    t_ms: int
    kind: str
    fields: dict[str, str]


def load_script(path: str | Path) -> list[ScriptAction]:
    actions: list[ScriptAction] = []
    text = Path(path).read_text("utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        try:
            t_ms, kind, fields = decode_event_line(raw)
        except ValueError as exc:
            raise ReplayScriptError(str(path), line_no, str(exc)) from exc
        if kind in _SKIPPED_KINDS:
            continue  # regenerated from the trace / backend
        if kind not in ("touch", "click", "dblclick"):
            raise ReplayScriptError(str(path), line_no, f"unknown action kind {kind!r}")
        if kind == "touch" and "on" not in fields:
            raise ReplayScriptError(str(path), line_no, "touch needs on=0|1")
        if kind in ("click", "dblclick") and "target" not in fields:
            raise ReplayScriptError(str(path), line_no, f"{kind} needs target=")
        actions.append(ScriptAction(line_no, t_ms, kind, fields))
    return actions


class ReplayRunner:
    def __init__(
        self,
        trace_path: str | Path,
        script_path: str | Path,
        config: EngineConfig | None = None,
        out_dir: str | Path | None = None,
        session_id: str = "replay",
    ) -> None:
        self.trace_path = str(trace_path)
        self.script_path = str(script_path)
        self.config = config or EngineConfig()
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.session_id = session_id
        self.results: list[GenerationResult] = []
        self.engine: SessionEngine | None = None

    def run(self) -> MetricsReport:
        trace = read_trace(self.trace_path)
        actions = load_script(self.script_path)
        scheduler = VirtualScheduler()
        store = None
        if self.out_dir is not None:
            store = SessionStore(self.out_dir / "session")
        engine = SessionEngine(
            self.session_id, self.config, scheduler, store=store
        )
        self.engine = engine
        target_lines: dict[str, int] = {}

        def on_event(event, effects) -> None:
            if isinstance(event, GenerationArrived):
                self.results.append(event.result)
            for effect in effects:
                if isinstance(effect, Diagnostic) and effect.code in _FATAL_CODES:
                    target = getattr(event, "target", "?")
                    line_no = target_lines.get(target, 0)
                    raise ReplayScriptError(
                        self.script_path, line_no, f"{effect.code}: {effect.detail}"
                    )

        engine.subscribe(on_event)

        for window in trace:
            scheduler.call_at(window.end, lambda w=window: engine.ingest(w))
        for action in actions:
            target_lines.setdefault(action.fields.get("target", ""), action.line_no)
            scheduler.call_at(action.t_ms, lambda a=action: self._dispatch(engine, a))

        scheduler.run_until_idle()
        report = compute_metrics(engine.state, self.results)
        if self.out_dir is not None:
            (self.out_dir / "metrics.txt").write_text(report.render(), "utf-8")
            if store is not None:
                store.close()
        return report

    @staticmethod
    def _dispatch(engine: SessionEngine, action: ScriptAction) -> None:
        if action.kind == "touch":
            engine.post(Touch(t=action.t_ms, on=action.fields["on"] == "1"))
        elif action.kind == "click":
            engine.raw_click(action.t_ms, action.fields["target"])
        else:
            engine.raw_double_click(action.t_ms, action.fields["target"])


def run_replay(
    trace_path: str | Path,
    script_path: str | Path,
    config: EngineConfig | None = None,
    out_dir: str | Path | None = None,
    session_id: str = "replay",
) -> MetricsReport:
    return ReplayRunner(trace_path, script_path, config, out_dir, session_id).run()


def ingest_trace_events(engine: SessionEngine, trace: list[TimedText]) -> None:
    """Feed a whole trace immediately (no schedule); test helper."""
    for window in trace:
        engine.ingest(window)
