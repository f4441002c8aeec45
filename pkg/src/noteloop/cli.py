"""Command line: serve, replay, export."""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .config import EngineConfig
from .replay import ReplayScriptError, run_replay
from .store import export_plain_text, export_structured, load_archive


def _bundled(name: str) -> Path:
    return Path(str(resources.files("noteloop.data").joinpath(name)))


def _load_config(path: str | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return EngineConfig.from_file(path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="noteloop",
        description="Real-time user-in-the-loop note-taking engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the session service (WebSocket + UI)")
    p_serve.add_argument("--config", help="JSON config file")

    p_replay = sub.add_parser("replay", help="replay a trace + script against the mock backend")
    p_replay.add_argument("--trace", help="trace file (default: bundled demo)")
    p_replay.add_argument("--script", help="script file (default: bundled demo)")
    p_replay.add_argument("--out", required=True, help="output directory (archive + metrics)")
    p_replay.add_argument("--config", help="JSON config file")

    p_export = sub.add_parser("export", help="export a recorded session")
    p_export.add_argument("--session", required=True, help="session id or directory")
    p_export.add_argument(
        "--format", choices=("plain_text", "structured"), default="plain_text"
    )
    p_export.add_argument("--sessions-dir", default="sessions")

    args = parser.parse_args(argv)

    if args.command == "serve":
        from .service import serve

        serve(_load_config(args.config))
        return 0

    if args.command == "replay":
        config = _load_config(args.config)
        trace = args.trace or _bundled("demo.trace")
        script = args.script or _bundled("demo.script")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        try:
            report = run_replay(trace, script, config, out)
        except ReplayScriptError as exc:
            print(f"replay aborted: {exc}", file=sys.stderr)
            return 2
        sys.stdout.write(report.render())
        print(f"archive: {out / 'session'}", file=sys.stderr)
        print(f"metrics: {out / 'metrics.txt'}", file=sys.stderr)
        return 0

    if args.command == "export":
        session_path = Path(args.session)
        if not session_path.is_dir():
            session_path = Path(args.sessions_dir) / args.session
        if not session_path.is_dir():
            print(f"no session at {session_path}", file=sys.stderr)
            return 2
        archive = load_archive(session_path)
        if args.format == "plain_text":
            sys.stdout.write(export_plain_text(archive))
        else:
            sys.stdout.write(export_structured(archive))
        return 0

    return 1


if __name__ == "__main__":
    raise SystemExit(main())
