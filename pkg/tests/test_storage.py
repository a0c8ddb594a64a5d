"""Event log, replay, and export tests."""

from __future__ import annotations

import zlib
from dataclasses import asdict

import numpy as np
import pytest

from coguess import game
from coguess.bots import simulate_population
from coguess.game import GameConfig
from coguess.maps import rasterize_bubbles
from coguess.scenarios import hotspot_population
from coguess.storage import (
    CorruptLog,
    Event,
    EventLog,
    OutOfOrder,
    UnknownSession,
    collect_bubble_maps,
    export_bubble_maps,
    load_exported_maps,
    replay,
)

SMALL = GameConfig(image_width=60, image_height=60, rounds_per_game=2)


def hand_events(session_id="pair-1", with_bot=False, final_score=103,
                abandon=False):
    """A complete two-round session: one recognized, one skipped."""
    start = {"player_a": "p1", "player_b": "p2",
             "image_sequence": ["img-a", "img-b"], "config": asdict(SMALL),
             "with_bot": with_bot}
    ev = [
        Event(session_id, None, 0.0, "session_start", start),
        Event(session_id, 0, 1000.0, "round_start",
              {"image_id": "img-a", "teacher": "p1", "student": "p2"}),
        Event(session_id, 0, 1000.0, "cursor", {"x": 30, "y": 40}),
        Event(session_id, 0, 1000.0, "bubble", {"x": 30, "y": 40, "seq": 0}),
        Event(session_id, 0, 1100.0, "bubble", {"x": 35, "y": 44, "seq": 1}),
        Event(session_id, 0, 1200.0, "guess",
              {"text": "kettle", "verdict": game.CORRECT}),
        Event(session_id, 0, 1200.0, "round_end",
              {"outcome": game.RECOGNIZED, "bubbles_used": 2,
               "round_score": 2, "session_score": 2}),
        Event(session_id, 1, 2200.0, "round_start",
              {"image_id": "img-b", "teacher": "p2", "student": "p1"}),
        Event(session_id, 1, 2200.0, "cursor", {"x": 10, "y": 10}),
        Event(session_id, 1, 2200.0, "bubble", {"x": 10, "y": 10, "seq": 0}),
        Event(session_id, 1, 2500.0, "skip", {}),
        Event(session_id, 1, 2500.0, "round_end",
              {"outcome": game.SKIPPED, "bubbles_used": 1,
               "round_score": 101, "session_score": 103}),
    ]
    if abandon:
        ev.append(Event(session_id, None, 2600.0, "abandoned", {}))
    else:
        ev.append(Event(session_id, None, 2600.0, "session_end",
                        {"final_score": final_score, "rounds_played": 2}))
    return ev


def write_hand_log(root, **kwargs):
    with EventLog(root) as log:
        for e in hand_events(**kwargs):
            log.append_event(e)
    return EventLog(root)


class TestAppendOrdering:
    def test_well_ordered_stream_accepted(self, tmp_path):
        log = write_hand_log(tmp_path)
        assert len(list(log.iter_events())) == 13
        assert log.files() == [tmp_path / "events-19700101-00.jsonl"]

    def test_timestamp_regression_rejected(self, tmp_path):
        with EventLog(tmp_path) as log:
            log.append_event(Event("s", None, 500.0, "session_start", {}))
            with pytest.raises(OutOfOrder):
                log.append_event(Event("s", 0, 499.0, "cursor", {"x": 1, "y": 1}))

    def test_equal_timestamps_keep_append_order(self, tmp_path):
        with EventLog(tmp_path) as log:
            log.append_event(Event("s", 0, 100.0, "cursor", {"x": 1, "y": 1}))
            log.append_event(Event("s", 0, 100.0, "bubble",
                                   {"x": 1, "y": 1, "seq": 0}))
            kinds = [e.kind for e in log.iter_events()]
        assert kinds == ["cursor", "bubble"]

    def test_second_terminal_rejected(self, tmp_path):
        with EventLog(tmp_path) as log:
            log.append_event(Event("s", None, 0.0, "session_end", {}))
            with pytest.raises(OutOfOrder):
                log.append_event(Event("s", None, 1.0, "cursor", {"x": 0, "y": 0}))
            with pytest.raises(OutOfOrder):
                log.append_event(Event("s", None, 1.0, "abandoned", {}))

    def test_sessions_are_ordered_independently(self, tmp_path):
        with EventLog(tmp_path) as log:
            log.append_event(Event("a", 0, 900.0, "cursor", {"x": 0, "y": 0}))
            log.append_event(Event("b", 0, 100.0, "cursor", {"x": 0, "y": 0}))
            log.append_event(Event("a", 0, 901.0, "cursor", {"x": 1, "y": 0}))
            log.append_event(Event("b", 0, 101.0, "cursor", {"x": 1, "y": 0}))
        assert len(list(EventLog(tmp_path).iter_events())) == 4

    def test_unknown_kind_rejected_at_construction(self):
        with pytest.raises(ValueError):
            Event("s", None, 0.0, "telemetry", {})

    def test_reopen_restores_terminal_state(self, tmp_path):
        with EventLog(tmp_path) as log:
            log.append_event(Event("s", None, 0.0, "session_start", {}))
            log.append_event(Event("s", None, 50.0, "session_end", {}))
        with EventLog(tmp_path) as log:
            with pytest.raises(OutOfOrder):
                log.append_event(Event("s", None, 60.0, "cursor", {"x": 0, "y": 0}))
            with pytest.raises(OutOfOrder):
                log.append_event(Event("s", None, 60.0, "abandoned", {}))

    def test_sharded_file_naming(self, tmp_path):
        with EventLog(tmp_path, shards=4) as log:
            for sid in ("alpha", "beta", "gamma"):
                log.append_event(Event(sid, None, 0.0, "session_start", {}))
        expected = {f"events-19700101-{zlib.crc32(s.encode()) % 4:02d}.jsonl"
                    for s in ("alpha", "beta", "gamma")}
        assert {p.name for p in EventLog(tmp_path, shards=4).files()} == expected


class TestReplay:
    def test_hand_built_session_replays_to_recorded_score(self, tmp_path):
        log = write_hand_log(tmp_path)
        replayed = replay(log, "pair-1")
        s = replayed.session
        assert s.score == 103
        assert [r.outcome for r in s.rounds] == [game.RECOGNIZED, game.SKIPPED]
        assert [b.placed_at for b in s.rounds[0].bubbles] == [0.0, 100.0]
        assert s.rounds[0].guesses == [("kettle", game.CORRECT)]
        assert not replayed.with_bot and not replayed.abandoned

    def test_replay_twice_is_identical(self, tmp_path):
        log = write_hand_log(tmp_path)
        a, b = replay(log, "pair-1"), replay(log, "pair-1")
        assert a.session.score == b.session.score
        assert [r.bubbles for r in a.session.rounds] == \
            [r.bubbles for r in b.session.rounds]

    def test_unknown_session(self, tmp_path):
        log = write_hand_log(tmp_path)
        with pytest.raises(UnknownSession):
            replay(log, "nope")

    def test_bot_flag_surfaces(self, tmp_path):
        log = write_hand_log(tmp_path, session_id="bot-pair", with_bot=True)
        assert replay(log, "bot-pair").with_bot

    def test_abandoned_session(self, tmp_path):
        log = write_hand_log(tmp_path, abandon=True)
        assert replay(log, "pair-1").abandoned

    def test_missing_terminal_is_corrupt(self, tmp_path):
        with EventLog(tmp_path) as log:
            for e in hand_events()[:-1]:
                log.append_event(e)
        with pytest.raises(CorruptLog):
            replay(EventLog(tmp_path), "pair-1")

    def test_tampered_score_is_corrupt(self, tmp_path):
        events = hand_events()
        events[-1] = Event("pair-1", None, 2600.0, "session_end",
                           {"final_score": 999, "rounds_played": 2})
        with EventLog(tmp_path) as log:
            for e in events:
                log.append_event(e)
        with pytest.raises(CorruptLog, match="999"):
            replay(EventLog(tmp_path), "pair-1")

    def test_truncated_line_reports_offset(self, tmp_path):
        log = write_hand_log(tmp_path)
        path = log.files()[0]
        data = path.read_bytes()
        lines = data.splitlines(keepends=True)
        keep = b"".join(lines[:-1])
        path.write_bytes(keep + lines[-1][: len(lines[-1]) // 2])
        with pytest.raises(CorruptLog) as err:
            list(EventLog(tmp_path).iter_events())
        assert err.value.offset == len(keep)
        assert err.value.path == path


class TestSimulatedRoundTrip:
    def _run(self, tmp_path, seed=31):
        man, tb, sb, cfg = hotspot_population(n_images=3, dims=(60, 60), sigma=8.0)
        log = EventLog(tmp_path)
        with log:
            live = simulate_population(man, 2, tb, sb, seed=seed, config=cfg,
                                       log=log)
        return live, EventLog(tmp_path), cfg

    def test_replay_matches_live_state(self, tmp_path):
        live, log, _cfg = self._run(tmp_path)
        for session in live:
            replayed = replay(log, session.session_id).session
            assert replayed.score == session.score
            assert len(replayed.rounds) == len(session.rounds)
            for got, want in zip(replayed.rounds, session.rounds):
                assert got.outcome == want.outcome
                assert got.image_id == want.image_id
                assert [(b.x, b.y, b.seq) for b in got.bubbles] == \
                    [(b.x, b.y, b.seq) for b in want.bubbles]

    def test_disk_pipeline_equals_memory_pipeline(self, tmp_path):
        live, log, cfg = self._run(tmp_path)
        dims = (cfg.image_height, cfg.image_width)
        from_memory = {}
        for s in live:
            for rnd in s.rounds:
                bm = rasterize_bubbles(rnd.bubbles, dims, cfg.bubble_size,
                                       image_id=rnd.image_id, pair_id=s.session_id)
                from_memory[(bm.pair_id, bm.image_id)] = bm.grid
        from_disk = collect_bubble_maps(log, include_abandoned=True)
        assert len(from_disk) == len(from_memory)
        for bm, _outcome in from_disk:
            assert np.array_equal(bm.grid, from_memory[(bm.pair_id, bm.image_id)])


class TestExport:
    def test_export_cardinality(self, tmp_path):
        man, tb, sb, cfg = hotspot_population(n_images=3, dims=(60, 60), sigma=8.0)
        with EventLog(tmp_path / "log") as log:
            simulate_population(man, 2, tb, sb, seed=41, config=cfg, log=log)
        root = export_bubble_maps(EventLog(tmp_path / "log"), tmp_path / "out",
                                  experiment="trial")
        assert root == tmp_path / "out" / "trial"
        grids = sorted(root.glob("*/*.fimap"))
        assert len(grids) == 6                       # 2 pairs x 3 images
        index = (root / "index.csv").read_text().strip().splitlines()
        assert index[0] == "pair_id,image_id,bubble_count,outcome"
        assert len(index) == 7

    def test_bot_sessions_excluded_by_default(self, tmp_path):
        with EventLog(tmp_path / "log") as log:
            for e in hand_events(session_id="humans"):
                log.append_event(e)
            for e in hand_events(session_id="bot-game", with_bot=True):
                log.append_event(e)
        log = EventLog(tmp_path / "log")
        default = {bm.pair_id for bm, _ in collect_bubble_maps(log)}
        assert default == {"humans"}
        everyone = {bm.pair_id for bm, _ in collect_bubble_maps(log,
                                                               include_bots=True)}
        assert everyone == {"humans", "bot-game"}

    def test_skipped_rounds_flagged_and_filtered(self, tmp_path):
        log = write_hand_log(tmp_path / "log")
        root = export_bubble_maps(log, tmp_path / "out")
        rows = (root / "index.csv").read_text().strip().splitlines()[1:]
        outcomes = {line.split(",")[1]: line.split(",")[3] for line in rows}
        assert outcomes == {"img-a": game.RECOGNIZED, "img-b": game.SKIPPED}
        assert [m.image_id for m in load_exported_maps(root)] == ["img-a"]
        both = load_exported_maps(root, include_skipped=True)
        assert sorted(m.image_id for m in both) == ["img-a", "img-b"]

    def test_export_round_trips_grids(self, tmp_path):
        log = write_hand_log(tmp_path / "log")
        root = export_bubble_maps(log, tmp_path / "out")
        (loaded,) = load_exported_maps(root)
        want = rasterize_bubbles(replay(log, "pair-1").session.rounds[0].bubbles,
                                 (60, 60), SMALL.bubble_size,
                                 image_id="img-a", pair_id="pair-1")
        assert loaded.grid.dtype == np.int64
        assert np.array_equal(loaded.grid, want.grid)
        assert loaded.total_bubbles == 2
