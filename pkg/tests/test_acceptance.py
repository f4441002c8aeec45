"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``.  Everything here uses
the mock backend and the virtual clock; no network, no secondary
component.
"""

import hashlib
import random
import time
from pathlib import Path

import pytest

from conftest import (
    APPENDIX_CONTEXTUAL_RESPONSE,
    APPENDIX_DISPLAYED,
    APPENDIX_EXCLUSIVE_RESPONSE,
    APPENDIX_KEYWORD_RESPONSE,
    APPENDIX_ORGANIZE_RESPONSE,
    APPENDIX_SENTENCE,
)
from metrics_oracle import recompute
from noteloop.cli import _bundled
from noteloop.clock import VirtualScheduler
from noteloop.config import EngineConfig
from noteloop.engine import SessionEngine
from noteloop.gateway import MockBackend
from noteloop.metrics import classify_quick, compute_metrics
from noteloop.prompts import (
    PromptLibrary,
    parse_keyword_response,
    parse_sentence_response,
    validate_candidates,
    validate_derivation,
    validate_extraction,
)
from noteloop.replay import run_replay
from noteloop.session import (
    Click,
    DoubleClick,
    GenerationArrived,
    InputNormalizer,
    Touch,
)
from noteloop.stemmer import same_lemma
from noteloop.store import SessionStore, load_archive, replay_archive
from noteloop.transcript import SentenceSegmenter, TimedText, normalize_text
from noteloop.words import tokenize

FAST = dict(
    mock_latency_extraction_ms=100,
    mock_latency_derivation_ms=50,
    mock_latency_organization_ms=80,
)


def ok(name: str) -> None:
    print(f"[PASS] {name}")


# -- criterion 1: appendix golden cases -------------------------------------

def test_appendix_golden_cases():
    started = time.monotonic()
    lib = PromptLibrary.load_default()

    # prompts render from the shipped templates without error
    lib.render_extraction(APPENDIX_SENTENCE)
    lib.render_derive_exclusive("rallies", APPENDIX_DISPLAYED)
    lib.render_derive_contextual("rallies", APPENDIX_DISPLAYED, [APPENDIX_SENTENCE])
    lib.render_organize(("city", "sign"), ("What",), False, ("What", "Why", "How"),
                        [APPENDIX_SENTENCE])

    words = parse_keyword_response(APPENDIX_KEYWORD_RESPONSE)
    assert set(words) == {"people", "city", "rallies", "meetings"}
    assert validate_extraction(words, APPENDIX_SENTENCE).ok

    exclusive = parse_keyword_response(APPENDIX_EXCLUSIVE_RESPONSE)
    assert exclusive == ["media", "civilization"]
    assert validate_derivation(exclusive, "rallies", list(APPENDIX_DISPLAYED)).ok

    contextual = parse_keyword_response(APPENDIX_CONTEXTUAL_RESPONSE)
    assert contextual == ["speeches", "sign"]
    assert validate_derivation(contextual, "rallies", list(APPENDIX_DISPLAYED)).ok

    sentences = parse_sentence_response(APPENDIX_ORGANIZE_RESPONSE)
    assert len(sentences) == 3
    report = validate_candidates(
        sentences, ["city", "sign"], wh_words=("What",), config_wh_words=("What", "Why", "How")
    )
    assert report.ok, report.violations
    for sentence in sentences:
        assert len(tokenize(sentence)) <= 10
        assert tokenize(sentence)[0] == "what"

    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    ok(f"appendix golden cases (100% pass in {elapsed:.3f}s)")


# -- criterion 2: validator property suite ----------------------------------

def test_validator_property_suite():
    rng = random.Random(2024)
    vocab = [
        "city", "sign", "rally", "rallies", "meeting", "meetings", "people",
        "media", "banner", "harbor", "council", "speech", "speeches", "forum",
        "station", "project", "walking", "talked", "organized", "civilization",
    ]

    # extraction: never pass a keyword that is not a token of the sentence
    for _ in range(1000):
        sentence_words = rng.sample(vocab, rng.randint(3, 8))
        sentence = " ".join(sentence_words).capitalize() + "."
        keyword = rng.choice(vocab)
        report = validate_extraction([keyword], sentence)
        truly_in = keyword in tokenize(sentence)
        if not truly_in:
            assert keyword not in report.valid_items()
        else:
            assert keyword in report.valid_items()

    # derivation: any lemma-of-origin word is rejected (stemmer oracle)
    for _ in range(1000):
        origin = rng.choice(vocab)
        word = rng.choice(vocab)
        displayed = rng.sample(vocab, 4)
        report = validate_derivation([word, "unrelatedterm"], origin, displayed)
        if same_lemma(word, origin) or word in displayed:
            assert word not in report.valid_items()

    # candidates: every single-constraint mutant is rejected
    base = "What signs were displayed in each city?"
    mutants = {
        "word_count": "What city had the most controversial and deeply divisive protest signs?",
        "containment": "What banners were displayed in each town?",
        "wh_start": "Were signs displayed in each city?",
    }
    for _ in range(1000):
        which, mutant = rng.choice(list(mutants.items()))
        report = validate_candidates(
            [base, mutant], ["city", "sign"], wh_words=("What",),
            config_wh_words=("What", "Why", "How"),
        )
        assert report.valid_items() == [base]
        assert any(v.code == which for v in report.violations)
    for _ in range(1000):
        # missing "?" in the bare-question form
        report = validate_candidates(
            ["Did the city show a sign", "Did the city show a sign?"],
            ["city", "sign"], question_only=True, config_wh_words=("What", "Why", "How"),
        )
        assert report.valid_items() == ["Did the city show a sign?"]
    ok("validator property suite (4x1000 randomized cases, zero false accepts)")


# -- criterion 3: segmentation ----------------------------------------------

def test_segmentation_gaps_and_lossless():
    for gap, splits in ((800, False), (999, False), (1000, False), (1001, True), (1500, True)):
        seg = SentenceSegmenter()
        seg.ingest(TimedText("alpha", 0, 1000))
        closed = seg.ingest(TimedText("beta", 1000 + gap, 1000 + gap + 100))
        assert bool(closed) == splits, f"gap {gap}"

    rng = random.Random(99)
    for _ in range(10_000):
        events = []
        t = 0
        for _ in range(rng.randint(1, 12)):
            words = [rng.choice(["a", "bb", "ccc", "dddd"]) for _ in range(rng.randint(1, 5))]
            text = " ".join(words) + rng.choice(["", ".", "?", "!", ","])
            duration = rng.randint(50, 4100)
            events.append(TimedText(text, t, t + duration))
            t += duration + rng.randint(0, 2200)
        seg = SentenceSegmenter()
        sentences = []
        for event in events:
            sentences.extend(seg.ingest(event))
        sentences.extend(seg.force_close())
        assert normalize_text(" ".join(s.text for s in sentences)) == normalize_text(
            " ".join(e.text for e in events)
        )
    ok("segmentation: gap thresholds exact, lossless over 10000 fuzzed streams")


# -- criterion 4: staleness / cancellation stress ----------------------------

def test_staleness_cancellation_stress():
    base_sentence = "People went from city to city, holding rallies, and meetings."
    for run in range(1000):
        rng = random.Random(run)
        scheduler = VirtualScheduler()
        config = EngineConfig(**FAST, mock_jitter_ms=150, mock_seed=run)
        engine = SessionEngine(f"stress{run}", config, scheduler)

        cancelled: set[int] = set()
        original_cancel = engine.gateway.cancel_below

        def spying_cancel(seq_below, _orig=original_cancel, _gw=engine.gateway):
            for seq, entry in list(_gw._in_flight.items()):
                if entry.request.lane == "interactive" and seq < seq_below:
                    cancelled.add(seq)
            _orig(seq_below)

        engine.gateway.cancel_below = spying_cancel

        state = engine.state

        def check(event, effects):
            if state.candidates.status == "shown":
                assert state.candidates.basis == tuple(state.selection)

        engine.subscribe(check)
        engine.post(Touch(t=0, on=True))
        engine.ingest(TimedText(base_sentence, 0, 1000))
        scheduler.run_until_idle()
        ids = list(state.queue.visible_group().keyword_ids)

        t = 2000
        for _ in range(rng.randint(3, 10)):
            t += rng.randint(10, 400)
            roll = rng.random()
            if roll < 0.6:
                engine.post(Click(t=t, target=f"kw:{rng.choice(ids)}"))
            elif roll < 0.75 and state.selection:
                engine.post(DoubleClick(t=t, target=f"chip:{state.selection[0]}"))
            elif roll < 0.9:
                engine.post(Click(t=t, target="kw:1"))
            else:
                scheduler.run_until_idle()
        scheduler.run_until_idle()

        if state.candidates.status == "shown":
            assert state.candidates.basis == tuple(state.selection)
        else:
            assert state.candidates.status == "empty" or state.selection
        assert not (set(state.candidate_seqs_shown) & cancelled), "cancelled result rendered"
    ok("staleness stress: 1000 sessions, displayed basis == selection, no cancelled render")


# -- criterion 5: double-click discrimination --------------------------------

def test_double_click_discrimination():
    for delta, coalesces in ((499, True), (500, False), (501, False)):
        scheduler = VirtualScheduler()
        events = []
        normalizer = InputNormalizer(scheduler, events.append)
        scheduler.call_at(0, lambda: normalizer.click(0, "kw:1"))
        scheduler.call_at(delta, lambda d=delta: normalizer.click(d, "kw:1"))
        scheduler.run_until_idle()
        if coalesces:
            assert len(events) == 1 and isinstance(events[0], DoubleClick), delta
        else:
            assert len(events) == 2 and all(isinstance(e, Click) for e in events), delta
    ok("double-click discrimination: 499 coalesces; 500 and 501 do not")


# -- criterion 6: quick-note path ---------------------------------------------

def _quick_note_session(record_delay_ms, with_customized=False):
    scheduler = VirtualScheduler()
    engine = SessionEngine("quick", EngineConfig(**FAST), scheduler)
    engine.post(Touch(t=0, on=True))
    engine.ingest(
        TimedText("People went from city to city, holding rallies, and meetings.", 0, 1000)
    )
    scheduler.run_until_idle()
    kw = engine.state.queue.visible_group().keyword_ids[0]
    t = 5000
    engine.post(Click(t=t, target=f"kw:{kw}"))
    if with_customized:
        engine.post(Click(t=t + 300, target="kw:1"))
    engine.post(DoubleClick(t=t + record_delay_ms, target=f"chip:{kw}"))
    scheduler.run_until_idle()
    return engine.state.notes[0]


def test_quick_note_path():
    note = _quick_note_session(1500)
    assert note.kind == "keywords"
    assert classify_quick(note)
    assert note.steps == 2

    slow = _quick_note_session(2500)
    assert slow.kind == "keywords"
    assert not classify_quick(slow)

    with_custom = _quick_note_session(1500, with_customized=True)
    assert classify_quick(with_custom)
    assert with_custom.steps == 3
    ok("quick-note path: 1500ms quick / 2500ms not; steps exactly 2 and 3")


# -- criterion 7: replay determinism and oracle agreement ---------------------

def _archive_digest(out_dir: Path) -> str:
    blob = b""
    for name in (
        "session/manifest",
        "session/events.log",
        "session/transcript.log",
        "session/notes.log",
        "metrics.txt",
    ):
        blob += (out_dir / name).read_bytes()
    return hashlib.sha256(blob).hexdigest()


def test_replay_determinism_and_oracle_agreement(tmp_path):
    digests = set()
    for i in range(10):
        out = tmp_path / f"run{i}"
        out.mkdir()
        run_replay(_bundled("demo.trace"), _bundled("demo.script"), out_dir=out)
        digests.add(_archive_digest(out))
    assert len(digests) == 1, "replay not byte-identical"

    # oracle agreement over scripted sessions of <= 20 user events
    from test_metrics import SCRIPTS, run_scripted

    for name, script in SCRIPTS.items():
        assert len(script) <= 20
        _, archive, report = run_scripted(tmp_path, script, f"oracle_{name}")
        oracle = recompute(archive.event_lines, archive.config().customized_keywords)
        assert oracle.render() == report.render(), name

    # the bundled demo script (9 user events) agrees as well
    demo_archive = load_archive(tmp_path / "run0" / "session")
    demo_oracle = recompute(
        demo_archive.event_lines, demo_archive.config().customized_keywords
    )
    assert demo_oracle.render() == (tmp_path / "run0" / "metrics.txt").read_text("utf-8")
    ok("replay determinism: 10x byte-identical; oracle agreement on all scripts <= 20 events")


# -- criterion 8: archive round trip ------------------------------------------

def test_archive_round_trip(tmp_path):
    run_replay(_bundled("demo.trace"), _bundled("demo.script"), out_dir=tmp_path)
    archive = load_archive(tmp_path / "session")
    _, note_lines = replay_archive(archive)
    assert note_lines == archive.note_lines, "replay did not reproduce the archived notes"

    # a second, interactively recorded session round-trips too
    scheduler = VirtualScheduler()
    store = SessionStore(tmp_path / "live")
    engine = SessionEngine("live", EngineConfig(**FAST), scheduler, store=store)
    engine.post(Touch(t=0, on=True))
    engine.ingest(TimedText("Council approved the harbor project yesterday.", 0, 900))
    scheduler.run_until_idle()
    kw = engine.state.queue.visible_group().keyword_ids[0]
    engine.post(Click(t=2000, target=f"kw:{kw}"))
    scheduler.run_until_idle()
    engine.post(Click(t=3000, target="cand:0"))
    scheduler.run_until_idle()
    store.close()
    live = load_archive(tmp_path / "live")
    _, live_notes = replay_archive(live)
    assert live_notes == live.note_lines
    ok("archive round trip: load + replay reproduces the note list byte-identically")


# -- criterion 9: latency accounting ------------------------------------------

def test_latency_accounting(tmp_path):
    # paper-reported averages as the configured artificial latencies
    report = run_replay(
        _bundled("demo.trace"), _bundled("demo.script"), EngineConfig(), tmp_path
    )
    assert report.latency_count["extraction"] > 0
    assert report.latency_count["derivation"] > 0
    assert report.latency_count["organization"] > 0
    assert abs(report.latency_mean_ms["extraction"] - 4290) <= 1
    assert abs(report.latency_mean_ms["derivation"] - 1410) <= 1
    assert abs(report.latency_mean_ms["organization"] - 2890) <= 1
    ok("latency accounting: 4290/1410/2890 ms reported within 1 ms")


@pytest.fixture(scope="session", autouse=True)
def _suite_timer():
    started = time.monotonic()
    yield
    print(f"\nacceptance wall time: {time.monotonic() - started:.1f}s")
