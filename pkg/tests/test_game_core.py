"""Rules-engine tests: round lifecycle, bubble mechanics, guessing, scoring."""

from __future__ import annotations

import numpy as np
import pytest

from coguess import game
from coguess.game import (
    CORRECT,
    GameComplete,
    GameConfig,
    ImageRecord,
    IN_PROGRESS,
    INCORRECT,
    NotStudent,
    NotTeacher,
    OutOfBounds,
    RECOGNIZED,
    RoundFinished,
    RoundInProgress,
    SKIPPED,
)

TICK_MS = 10.0

DOG = ImageRecord(
    image_id="img-dog-001",
    category="dog",
    accepted_labels=frozenset({"dog", "border collie"}),
)


def make_session(rounds: int = 110, n_images: int = 120, seed: int = 0,
                 **overrides) -> game.GameSession:
    config = GameConfig(rounds_per_game=rounds, **overrides)
    image_ids = [f"img-{i:04d}" for i in range(n_images)]
    rng = np.random.default_rng(seed)
    return game.new_session("s-1", "alice", "bob", image_ids, config, rng)


def start_round(session: game.GameSession, now: float = 0.0) -> game.RoundState:
    return game.begin_round(session, now)


class TestNormalizeLabel:
    def test_collapses_case_and_whitespace(self):
        assert game.normalize_label("  Border   Collie ") == "border collie"

    def test_identity(self):
        assert game.normalize_label("dog") == "dog"

    def test_lowercases(self):
        assert game.normalize_label("DOG") == "dog"

    def test_empty_never_matches(self):
        assert game.normalize_label("   ") == ""
        assert "" not in DOG.accepted_labels


class TestConfig:
    def test_defaults(self):
        c = GameConfig()
        assert (c.image_width, c.image_height) == (300, 300)
        assert c.bubble_size == 18
        assert (c.min_interval, c.max_interval) == (50.0, 300.0)
        assert c.rounds_per_game == 110
        assert c.skip_penalty == 100
        assert c.adjacency_radius == 9

    def test_rejects_bad_intervals(self):
        with pytest.raises(ValueError):
            GameConfig(min_interval=300.0, max_interval=50.0)
        with pytest.raises(ValueError):
            GameConfig(min_interval=0.0)

    def test_rejects_oversized_bubble(self):
        with pytest.raises(ValueError):
            GameConfig(image_width=10, image_height=10, bubble_size=18)

    def test_extent_truncates_at_borders(self):
        c = GameConfig()
        # interior: full 18x18
        assert c.bubble_extent(150, 150) == (141, 141, 18, 18)
        # corner: [0-9, 0+8] clips to 9 columns/rows
        assert c.bubble_extent(0, 0) == (0, 0, 9, 9)
        assert c.bubble_extent(299, 299) == (290, 290, 10, 10)


class TestImageRecord:
    def test_requires_category_in_labels(self):
        with pytest.raises(ValueError):
            ImageRecord("x", "dog", frozenset({"cat"}))

    def test_requires_normalized_labels(self):
        with pytest.raises(ValueError):
            ImageRecord("x", "dog", frozenset({"Dog"}))


class TestSessionSetup:
    def test_needs_enough_images(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            game.new_session("s", "a", "b", ["only-one"], GameConfig(), rng)

    def test_sequence_is_seeded_permutation_prefix(self):
        s1 = make_session(rounds=10, n_images=40, seed=7)
        s2 = make_session(rounds=10, n_images=40, seed=7)
        s3 = make_session(rounds=10, n_images=40, seed=8)
        assert s1.image_sequence == s2.image_sequence
        assert s1.image_sequence != s3.image_sequence
        assert len(s1.image_sequence) == 10
        assert len(set(s1.image_sequence)) == 10


class TestBeginRound:
    def test_round_zero_roles(self):
        session = make_session()
        rnd = start_round(session)
        assert rnd.teacher_id == "alice"
        assert rnd.student_id == "bob"
        assert rnd.bubbling_active is False
        assert rnd.bubbles == []

    def test_roles_swap_each_round(self):
        session = make_session()
        rnd0 = start_round(session)
        game.skip_round(rnd0, "bob")
        game.finish_round(session, rnd0)
        rnd1 = game.begin_round(session, 1000.0)
        assert rnd1.teacher_id == "bob"
        assert rnd1.student_id == "alice"

    def test_complete_session_refuses_new_round(self):
        session = make_session()
        session.round_index = 110
        with pytest.raises(GameComplete):
            game.begin_round(session, 0.0)

    def test_live_round_blocks_next(self):
        session = make_session()
        start_round(session)
        with pytest.raises(RoundInProgress):
            game.begin_round(session, 50.0)


class TestCursorUpdate:
    def test_first_press_places_seq0_immediately(self):
        session = make_session()
        rnd = start_round(session)
        rng = np.random.default_rng(1)
        bubble = game.cursor_update(rnd, session.config, "alice", 150, 150, 0.0, rng)
        assert bubble is not None
        assert (bubble.x, bubble.y, bubble.seq) == (150, 150, 0)
        assert bubble.placed_at == 0.0
        assert rnd.bubbling_active is True
        assert rnd.next_bubble_due is not None

    def test_terminal_round_rejects_cursor(self):
        session = make_session()
        rnd = start_round(session)
        game.skip_round(rnd, "bob")
        with pytest.raises(RoundFinished):
            game.cursor_update(rnd, session.config, "alice", 10, 10, 0.0,
                               np.random.default_rng(0))

    def test_boundary_pixel_is_in_bounds(self):
        session = make_session()
        rnd = start_round(session)
        bubble = game.cursor_update(rnd, session.config, "alice", 299, 0, 0.0,
                                    np.random.default_rng(0))
        assert (bubble.x, bubble.y) == (299, 0)

    def test_out_of_bounds_rejected(self):
        session = make_session()
        rnd = start_round(session)
        rng = np.random.default_rng(0)
        for x, y in [(300, 0), (0, 300), (-1, 0), (0, -1)]:
            with pytest.raises(OutOfBounds):
                game.cursor_update(rnd, session.config, "alice", x, y, 0.0, rng)

    def test_student_cannot_steer(self):
        session = make_session()
        rnd = start_round(session)
        with pytest.raises(NotTeacher):
            game.cursor_update(rnd, session.config, "bob", 10, 10, 0.0,
                               np.random.default_rng(0))

    def test_later_updates_only_move_cursor(self):
        session = make_session()
        rnd = start_round(session)
        rng = np.random.default_rng(1)
        game.cursor_update(rnd, session.config, "alice", 150, 150, 0.0, rng)
        assert game.cursor_update(rnd, session.config, "alice", 10, 10, 5.0, rng) is None
        assert rnd.cursor == (10, 10)
        assert len(rnd.bubbles) == 1


class TestBubbleTick:
    def _primed_round(self, cursor=(100, 104)):
        session = make_session()
        rnd = start_round(session)
        rng = np.random.default_rng(3)
        game.cursor_update(rnd, session.config, "alice", 100, 100, 0.0, rng)
        game.cursor_update(rnd, session.config, "alice", *cursor, 5.0, rng)
        return session, rnd, rng

    def test_within_radius_no_clamp(self):
        session, rnd, rng = self._primed_round(cursor=(100, 104))
        due = rnd.next_bubble_due
        bubble = game.bubble_tick(rnd, session.config, due, rng)
        assert (bubble.x, bubble.y) == (100, 104)

    def test_per_axis_clamp_to_radius(self):
        session, rnd, rng = self._primed_round(cursor=(100, 150))
        due = rnd.next_bubble_due
        bubble = game.bubble_tick(rnd, session.config, due, rng)
        assert (bubble.x, bubble.y) == (100, 109)

    def test_early_tick_places_nothing(self):
        session, rnd, rng = self._primed_round()
        early = rnd.next_bubble_due - 1.0
        assert game.bubble_tick(rnd, session.config, early, rng) is None
        assert len(rnd.bubbles) == 1

    def test_inactive_round_ignores_ticks(self):
        session = make_session()
        rnd = start_round(session)
        assert game.bubble_tick(rnd, session.config, 1000.0, np.random.default_rng(0)) is None


class TestSubmitGuess:
    def test_basic_level_label_correct(self):
        session = make_session()
        rnd = start_round(session)
        assert game.submit_guess(rnd, DOG, "bob", "dog") == CORRECT
        assert rnd.outcome == RECOGNIZED

    def test_subordinate_label_correct_after_normalization(self):
        session = make_session()
        rnd = start_round(session)
        assert game.submit_guess(rnd, DOG, "bob", "Border Collie") == CORRECT

    def test_wrong_guess_keeps_round_alive(self):
        session = make_session()
        rnd = start_round(session)
        assert game.submit_guess(rnd, DOG, "bob", "cat") == INCORRECT
        assert rnd.outcome == IN_PROGRESS
        assert rnd.guesses == [("cat", INCORRECT)]

    def test_correct_guess_stops_bubbling(self):
        session = make_session()
        rnd = start_round(session)
        rng = np.random.default_rng(5)
        game.cursor_update(rnd, session.config, "alice", 50, 50, 0.0, rng)
        game.submit_guess(rnd, DOG, "bob", "dog")
        assert rnd.next_bubble_due is None
        assert game.bubble_tick(rnd, session.config, 1e9, rng) is None

    def test_teacher_cannot_guess(self):
        session = make_session()
        rnd = start_round(session)
        with pytest.raises(NotStudent):
            game.submit_guess(rnd, DOG, "alice", "dog")

    def test_terminal_round_rejects_guess(self):
        session = make_session()
        rnd = start_round(session)
        game.submit_guess(rnd, DOG, "bob", "dog")
        with pytest.raises(RoundFinished):
            game.submit_guess(rnd, DOG, "bob", "dog")


class TestSkipAndScore:
    def _round_with_bubbles(self, session, n):
        rnd = game.begin_round(session, 0.0)
        rng = np.random.default_rng(9)
        now = 0.0
        game.cursor_update(rnd, session.config, rnd.teacher_id, 150, 150, now, rng)
        while len(rnd.bubbles) < n:
            now += TICK_MS
            game.bubble_tick(rnd, session.config, now, rng)
        return rnd

    def test_skip_adds_penalty_to_bubble_count(self):
        session = make_session()
        rnd = self._round_with_bubbles(session, 7)
        game.skip_round(rnd, rnd.student_id)
        assert rnd.outcome == SKIPPED
        assert game.round_score(rnd, session.config) == 107

    def test_zero_bubble_skip_scores_penalty(self):
        session = make_session()
        rnd = start_round(session)
        game.skip_round(rnd, "bob")
        assert game.round_score(rnd, session.config) == 100

    def test_double_skip_rejected(self):
        session = make_session()
        rnd = start_round(session)
        game.skip_round(rnd, "bob")
        with pytest.raises(RoundFinished):
            game.skip_round(rnd, "bob")

    def test_teacher_cannot_skip(self):
        session = make_session()
        rnd = start_round(session)
        with pytest.raises(NotStudent):
            game.skip_round(rnd, "alice")

    def test_session_score_sums_recognized_bubbles(self):
        session = make_session(rounds=2)
        for n in (5, 3):
            rnd = self._round_with_bubbles(session, n)
            game.submit_guess(rnd, DOG, rnd.student_id, "dog")
            game.finish_round(session, rnd)
        assert game.session_score(session) == 8
        assert session.score == 8

    def test_session_score_includes_skip_penalty(self):
        session = make_session(rounds=2)
        rnd = self._round_with_bubbles(session, 5)
        game.submit_guess(rnd, DOG, rnd.student_id, "dog")
        game.finish_round(session, rnd)
        rnd = self._round_with_bubbles(session, 3)
        game.skip_round(rnd, rnd.student_id)
        game.finish_round(session, rnd)
        assert game.session_score(session) == 108

    def test_empty_session_scores_zero(self):
        assert game.session_score(make_session()) == 0

    def test_finish_requires_terminal_round(self):
        session = make_session()
        rnd = start_round(session)
        with pytest.raises(RoundInProgress):
            game.finish_round(session, rnd)


def drive_round(session, rnd, rng, walk_rng, n_bubbles, start=(150, 150)):
    """Play one round to `n_bubbles` bubbles with a random cursor walk,
    ticking the authoritative clock every 10 ms."""
    now = rnd.started_at
    cx, cy = start
    game.cursor_update(rnd, session.config, rnd.teacher_id, cx, cy, now, rng)
    while len(rnd.bubbles) < n_bubbles:
        now += TICK_MS
        cx = int(np.clip(cx + walk_rng.integers(-15, 16), 0, session.config.image_width - 1))
        cy = int(np.clip(cy + walk_rng.integers(-15, 16), 0, session.config.image_height - 1))
        game.cursor_update(rnd, session.config, rnd.teacher_id, cx, cy, now, rng)
        game.bubble_tick(rnd, session.config, now, rng)
    return now


class TestBubbleProperties:
    N_PLACEMENTS = 12_000

    def _long_trace(self, seed):
        session = make_session(rounds=1)
        rnd = start_round(session)
        rng = np.random.default_rng(seed)
        walk_rng = np.random.default_rng(seed + 1)
        drive_round(session, rnd, rng, walk_rng, self.N_PLACEMENTS)
        return session, rnd

    def test_intervals_within_band(self):
        """Every inter-bubble gap lies in [min, max + tick resolution]."""
        session, rnd = self._long_trace(seed=42)
        times = np.array([b.placed_at for b in rnd.bubbles])
        gaps = np.diff(times)
        assert len(gaps) >= 10_000
        assert gaps.min() >= session.config.min_interval
        assert gaps.max() <= session.config.max_interval + TICK_MS

    def test_adjacency_radius_never_exceeded(self):
        session, rnd = self._long_trace(seed=43)
        xs = np.array([b.x for b in rnd.bubbles])
        ys = np.array([b.y for b in rnd.bubbles])
        cheb = np.maximum(np.abs(np.diff(xs)), np.abs(np.diff(ys)))
        assert cheb.max() <= session.config.adjacency_radius

    def test_seq_and_centers_stay_valid(self):
        session, rnd = self._long_trace(seed=44)
        assert [b.seq for b in rnd.bubbles] == list(range(len(rnd.bubbles)))
        for b in rnd.bubbles[:: 500]:
            assert 0 <= b.x < session.config.image_width
            assert 0 <= b.y < session.config.image_height

    def test_same_seed_reproduces_round_exactly(self):
        traces = []
        for _ in range(2):
            session = make_session(rounds=1, seed=5)
            rnd = start_round(session)
            drive_round(session, rnd, np.random.default_rng(7),
                        np.random.default_rng(8), 200)
            traces.append(rnd)
        assert traces[0] == traces[1]

    def test_role_alternation_over_full_session(self):
        session = make_session(rounds=12)
        seen = []
        for _ in range(12):
            rnd = game.begin_round(session, 0.0)
            seen.append((rnd.teacher_id, rnd.student_id))
            game.skip_round(rnd, rnd.student_id)
            game.finish_round(session, rnd)
        for k in range(11):
            assert seen[k + 1][0] == seen[k][1]
        assert session.complete
