"""Persistence: append-only logs, archive replay closure, exports."""

import random

import pytest

from noteloop.clock import VirtualScheduler
from noteloop.config import EngineConfig
from noteloop.engine import SessionEngine
from noteloop.gateway import GenerationResult
from noteloop.session import (
    Click,
    DoubleClick,
    GenerationArrived,
    SentenceArrived,
    Touch,
    serialize_state,
)
from noteloop.store import (
    SessionStore,
    decode_event,
    encode_event,
    export_plain_text,
    export_structured,
    import_structured,
    load_archive,
    replay_archive,
)
from noteloop.transcript import Sentence, TimedText


def record_session(tmp_path, fast_config):
    scheduler = VirtualScheduler()
    store = SessionStore(tmp_path / "s1")
    engine = SessionEngine("s1", fast_config, scheduler, store=store)
    engine.post(Touch(t=0, on=True))
    engine.ingest(TimedText("People went from city to city, holding rallies, and meetings.", 0, 4000))
    scheduler.run_until_idle()
    ids = list(engine.state.queue.visible_group().keyword_ids)
    engine.post(Click(t=5000, target=f"kw:{ids[0]}"))
    scheduler.run_until_idle()
    engine.post(Click(t=6000, target="cand:0"))
    engine.post(Click(t=7000, target=f"kw:{ids[1]}"))
    engine.post(DoubleClick(t=7600, target=f"chip:{ids[1]}"))
    # refine the sentence note to its second candidate
    engine.post(Click(t=8000, target="btn:notes"))
    engine.post(Click(t=8100, target="note:1"))
    engine.post(Click(t=8200, target="cand:1"))
    scheduler.run_until_idle()
    store.close()
    return engine, tmp_path / "s1"


class TestEventCodec:
    def random_event(self, rng):
        choice = rng.randrange(5)
        t = rng.randrange(100000)
        if choice == 0:
            return Touch(t=t, on=rng.random() < 0.5)
        if choice == 1:
            return Click(t=t, target=rng.choice(["kw:3", "cand:0", "arrow:queue:next", "btn:notes"]))
        if choice == 2:
            return DoubleClick(t=t, target="chip:9")
        if choice == 3:
            return SentenceArrived(
                t=t,
                sentence=Sentence(
                    id=rng.randrange(50),
                    text=rng.choice(
                        ["Plain text.", "With\ttabs and = signs, too.", "commas, %, and spaces"]
                    ),
                    start=t,
                    end=t + 100,
                    ordinal=0,
                ),
            )
        return GenerationArrived(
            t=t,
            result=GenerationResult(
                seq=rng.randrange(100),
                kind=rng.choice(["extraction", "organize", "derive_exclusive"]),
                slot=rng.choice(["queue", "candidates", "ring", "review"]),
                group=rng.randrange(100),
                basis=tuple(rng.randrange(20) for _ in range(rng.randrange(3))),
                words=("alpha", "beta w space") if rng.random() < 0.5 else (),
                sentences=("What city noted?",) if rng.random() < 0.5 else (),
                latency_ms=rng.randrange(5000),
                retried=rng.randrange(2),
                dropped=rng.randrange(3),
                error=None if rng.random() < 0.8 else "timeout",
            ),
        )

    def test_round_trip_fuzz(self):
        rng = random.Random(11)
        for _ in range(500):
            event = self.random_event(rng)
            assert decode_event(encode_event(event)) == event

    def test_single_line_even_with_newlines(self):
        event = SentenceArrived(
            t=1, sentence=Sentence(id=0, text="two words", start=0, end=1, ordinal=0)
        )
        assert "\n" not in encode_event(event)


class TestStoreFiles:
    def test_append_then_reopen(self, tmp_path, fast_config):
        _, directory = record_session(tmp_path, fast_config)
        archive = load_archive(directory)
        assert archive.manifest["session"] == "s1"
        assert archive.event_lines
        assert archive.transcript_lines
        assert len(archive.note_lines) == 3  # two notes + one revision

    def test_file_order_matches_call_order(self, tmp_path):
        store = SessionStore(tmp_path / "s")
        store.open("s", 0, EngineConfig(), {})
        store.append_event(Touch(t=1, on=True))
        store.append_event(Touch(t=2, on=False))
        store.close()
        lines = (tmp_path / "s" / "events.log").read_text().splitlines()
        assert [l.split("\t")[0] for l in lines] == ["1", "2"]

    def test_manifest_pins_template_hashes(self, tmp_path, fast_config):
        _, directory = record_session(tmp_path, fast_config)
        archive = load_archive(directory)
        for kind in ("extraction", "derive_exclusive", "derive_contextual", "organize"):
            assert len(archive.manifest[f"template_hash_{kind}"]) == 64

    def test_degraded_mode_on_write_failure(self, tmp_path):
        store = SessionStore(tmp_path / "s")
        store.open("s", 0, EngineConfig(), {})
        store._files["events.log"].close()  # simulate an I/O failure
        assert store.append_event(Touch(t=1, on=True)) is False
        assert store.degraded
        # subsequent appends are silent no-ops, session stays alive
        assert store.append_event(Touch(t=2, on=True)) is False


class TestReplayClosure:
    def test_archive_replays_to_identical_notes(self, tmp_path, fast_config):
        engine, directory = record_session(tmp_path, fast_config)
        archive = load_archive(directory)
        state, note_lines = replay_archive(archive)
        assert note_lines == archive.note_lines
        assert serialize_state(state) == serialize_state(engine.state)

    def test_thousand_event_session_replays(self, tmp_path, fast_config):
        scheduler = VirtualScheduler()
        store = SessionStore(tmp_path / "big")
        engine = SessionEngine("big", fast_config, scheduler, store=store)
        engine.post(Touch(t=0, on=True))
        engine.ingest(TimedText("Council approved harbor project yesterday evening.", 0, 3000))
        scheduler.run_until_idle()
        ids = list(engine.state.queue.visible_group().keyword_ids)
        rng = random.Random(3)
        t = 5000
        for _ in range(1000):
            t += rng.randrange(20, 800)
            roll = rng.random()
            if roll < 0.55:
                engine.post(Click(t=t, target=f"kw:{rng.choice(ids)}"))
            elif roll < 0.7:
                engine.post(Click(t=t, target=f"arrow:queue:{rng.choice(['prev', 'next'])}"))
            elif roll < 0.85 and engine.state.selection:
                engine.post(DoubleClick(t=t, target=f"chip:{engine.state.selection[0]}"))
            else:
                engine.post(Touch(t=t, on=rng.random() < 0.9))
            if rng.random() < 0.3:
                scheduler.run_until_idle()
        scheduler.run_until_idle()
        store.close()
        archive = load_archive(tmp_path / "big")
        assert len(archive.event_lines) >= 1000
        state, note_lines = replay_archive(archive)
        assert note_lines == archive.note_lines
        assert serialize_state(state) == serialize_state(engine.state)


class TestExport:
    def test_plain_text_lists_kind_markers(self, tmp_path, fast_config):
        _, directory = record_session(tmp_path, fast_config)
        text = export_plain_text(load_archive(directory))
        assert "1. [sentence]" in text
        assert "2. [keywords]" in text
        assert "(revised 1x" in text

    def test_plain_text_empty_session(self, tmp_path):
        store = SessionStore(tmp_path / "empty")
        store.open("empty", 0, EngineConfig(), {})
        store.close()
        text = export_plain_text(load_archive(tmp_path / "empty"))
        assert "Session empty notes" in text
        assert "[" not in text  # no note lines at all

    def test_structured_round_trip(self, tmp_path, fast_config):
        _, directory = record_session(tmp_path, fast_config)
        archive = load_archive(directory)
        document = export_structured(archive)
        back = import_structured(document)
        assert back.manifest == archive.manifest
        assert back.event_lines == archive.event_lines
        assert back.transcript_lines == archive.transcript_lines
        assert back.note_lines == archive.note_lines
        # and the reimported archive still replays identically
        _, note_lines = replay_archive(back)
        assert note_lines == archive.note_lines
