"""Deterministic rules engine for the cooperative reveal-and-guess game.

One player (the teacher) sees the full image and paints small square
"bubbles" onto it; the other (the student) sees only the revealed patches
and tries to name the object category. All timing and placement decisions
are made here, server-side, from an injected clock and seeded random
source, so a recorded session can be replayed bit-for-bit.

State lives in plain dataclasses; the operations below mutate them in
place and raise a :class:`GameError` subclass on any contract violation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

# Round outcomes
IN_PROGRESS = "in_progress"
RECOGNIZED = "recognized"
SKIPPED = "skipped"

# Guess verdicts
CORRECT = "correct"
INCORRECT = "incorrect"

_WHITESPACE_RUN = re.compile(r"\s+")


class GameError(Exception):
    """Base class for rule violations."""


class GameComplete(GameError):
    """All rounds of the session have been played."""


class RoundInProgress(GameError):
    """A new round was requested while the previous one is still live."""


class RoundFinished(GameError):
    """The round has already reached a terminal outcome."""


class NotTeacher(GameError):
    """A teacher-only action was attempted by another player."""


class NotStudent(GameError):
    """A student-only action was attempted by another player."""


class OutOfBounds(GameError):
    """A coordinate lies outside the image."""


@dataclass(frozen=True)
class GameConfig:
    """Tunable rules. Defaults match the production game."""

    image_width: int = 300
    image_height: int = 300
    bubble_size: int = 18
    min_interval: float = 50.0       # ms between bubble placements
    max_interval: float = 300.0
    rounds_per_game: int = 110
    skip_penalty: int = 100          # bubble-equivalents added on skip
    adjacency_radius: int = 9        # max Chebyshev step between consecutive bubbles

    def __post_init__(self) -> None:
        if self.bubble_size <= 0 or self.bubble_size > min(self.image_width, self.image_height):
            raise ValueError("bubble_size must be in (0, min(image dims)]")
        if not (0 < self.min_interval <= self.max_interval):
            raise ValueError("need 0 < min_interval <= max_interval")
        if self.skip_penalty < 0:
            raise ValueError("skip_penalty must be >= 0")
        if self.rounds_per_game < 1:
            raise ValueError("rounds_per_game must be >= 1")
        if self.adjacency_radius < 0:
            raise ValueError("adjacency_radius must be >= 0")

    def bubble_extent(self, cx: int, cy: int) -> tuple[int, int, int, int]:
        """Border-truncated (x0, y0, w, h) of the bubble centered at (cx, cy).

        An even-sided bubble is anchored as [c - s//2, c + s//2 - 1] on each
        axis, then clipped to the image.
        """
        half = self.bubble_size // 2
        x0 = max(cx - half, 0)
        y0 = max(cy - half, 0)
        x1 = min(cx - half + self.bubble_size - 1, self.image_width - 1)
        y1 = min(cy - half + self.bubble_size - 1, self.image_height - 1)
        return x0, y0, x1 - x0 + 1, y1 - y0 + 1


@dataclass(frozen=True)
class ImageRecord:
    """One playable image: id, canonical category, and the label set accepted
    as a correct guess (category plus subordinate synonyms, all normalized)."""

    image_id: str
    category: str
    accepted_labels: frozenset[str]
    pixel_data_ref: str = ""

    def __post_init__(self) -> None:
        if not self.accepted_labels:
            raise ValueError("accepted_labels must be non-empty")
        for label in self.accepted_labels:
            if label != normalize_label(label):
                raise ValueError(f"label not normalized: {label!r}")
        if normalize_label(self.category) not in self.accepted_labels:
            raise ValueError("accepted_labels must contain the category")


@dataclass(frozen=True)
class Bubble:
    """One revealed patch: center pixel, time since round start, and its
    0-based index within the round."""

    x: int
    y: int
    placed_at: float
    seq: int


@dataclass
class RoundState:
    round_index: int
    image_id: str
    teacher_id: str
    student_id: str
    started_at: float
    bubbles: list[Bubble] = field(default_factory=list)
    bubbling_active: bool = False
    next_bubble_due: float | None = None
    cursor: tuple[int, int] | None = None
    guesses: list[tuple[str, str]] = field(default_factory=list)
    outcome: str = IN_PROGRESS

    @property
    def terminal(self) -> bool:
        return self.outcome != IN_PROGRESS


@dataclass
class GameSession:
    session_id: str
    player_a: str
    player_b: str
    image_sequence: list[str]
    config: GameConfig
    round_index: int = 0
    rounds: list[RoundState] = field(default_factory=list)
    score: int = 0
    current_round: RoundState | None = None

    def teacher_for(self, round_index: int) -> str:
        # player_a teaches round 0; roles swap every round
        return self.player_a if round_index % 2 == 0 else self.player_b

    def student_for(self, round_index: int) -> str:
        return self.player_b if round_index % 2 == 0 else self.player_a

    @property
    def complete(self) -> bool:
        return self.round_index >= self.config.rounds_per_game and self.current_round is None


def normalize_label(text: str) -> str:
    """Lowercase, strip, and collapse internal whitespace runs to one space."""
    return _WHITESPACE_RUN.sub(" ", text.strip()).lower()


def new_session(session_id: str, player_a: str, player_b: str,
                image_ids: list[str], config: GameConfig, rng) -> GameSession:
    """Create a session with a per-session random ordering of images.

    `rng` is a numpy Generator; the first `rounds_per_game` entries of its
    permutation of `image_ids` become the play order.
    """
    if len(image_ids) < config.rounds_per_game:
        raise ValueError(
            f"need at least {config.rounds_per_game} images, got {len(image_ids)}")
    order = rng.permutation(len(image_ids))[: config.rounds_per_game]
    sequence = [image_ids[i] for i in order]
    return GameSession(session_id, player_a, player_b, sequence, config)


def begin_round(session: GameSession, now: float) -> RoundState:
    """Open the next round, swapping teacher/student relative to the last."""
    if session.round_index >= session.config.rounds_per_game:
        raise GameComplete(f"session {session.session_id} already played "
                           f"{session.config.rounds_per_game} rounds")
    if session.current_round is not None and not session.current_round.terminal:
        raise RoundInProgress(f"round {session.current_round.round_index} is still live")
    k = session.round_index
    rnd = RoundState(
        round_index=k,
        image_id=session.image_sequence[k],
        teacher_id=session.teacher_for(k),
        student_id=session.student_for(k),
        started_at=now,
    )
    session.current_round = rnd
    return rnd


def cursor_update(rnd: RoundState, config: GameConfig, actor: str,
                  x: int, y: int, now: float, rng) -> Bubble | None:
    """Record the teacher's cursor. The first in-bounds press starts bubbling:
    a bubble is placed immediately at the cursor and the next one is
    scheduled a uniform [min_interval, max_interval] ms later.

    Returns the bubble placed by this call, if any.
    """
    if rnd.terminal:
        raise RoundFinished(f"round {rnd.round_index} is over")
    if actor != rnd.teacher_id:
        raise NotTeacher(f"{actor} is not the teacher of round {rnd.round_index}")
    if not (0 <= x < config.image_width and 0 <= y < config.image_height):
        raise OutOfBounds(f"({x}, {y}) outside {config.image_width}x{config.image_height}")
    rnd.cursor = (x, y)
    if rnd.bubbling_active:
        return None
    rnd.bubbling_active = True
    bubble = Bubble(x=x, y=y, placed_at=now - rnd.started_at, seq=0)
    rnd.bubbles.append(bubble)
    rnd.next_bubble_due = now + rng.uniform(config.min_interval, config.max_interval)
    return bubble


def bubble_tick(rnd: RoundState, config: GameConfig, now: float, rng) -> Bubble | None:
    """Authoritative clock tick. When a bubble is due, place it at the
    teacher's cursor clamped (per axis) to within `adjacency_radius` of the
    previous bubble's center, and schedule the next one. No-op otherwise.
    """
    if rnd.terminal or not rnd.bubbling_active:
        return None
    if rnd.next_bubble_due is None or now < rnd.next_bubble_due:
        return None
    prev = rnd.bubbles[-1]
    cx, cy = rnd.cursor if rnd.cursor is not None else (prev.x, prev.y)
    r = config.adjacency_radius
    bx = min(max(cx, prev.x - r), prev.x + r)
    by = min(max(cy, prev.y - r), prev.y + r)
    bubble = Bubble(x=bx, y=by, placed_at=now - rnd.started_at, seq=prev.seq + 1)
    rnd.bubbles.append(bubble)
    rnd.next_bubble_due = now + rng.uniform(config.min_interval, config.max_interval)
    return bubble


def submit_guess(rnd: RoundState, image: ImageRecord, actor: str, text: str) -> str:
    """Judge a student guess against the image's accepted labels.

    A correct guess ends the round (outcome `recognized`); an incorrect one
    is recorded and the round continues -- wrong answers carry no explicit
    penalty beyond the bubbles that keep accumulating.
    """
    if rnd.terminal:
        raise RoundFinished(f"round {rnd.round_index} is over")
    if actor != rnd.student_id:
        raise NotStudent(f"{actor} is not the student of round {rnd.round_index}")
    verdict = CORRECT if normalize_label(text) in image.accepted_labels else INCORRECT
    rnd.guesses.append((text, verdict))
    if verdict == CORRECT:
        rnd.outcome = RECOGNIZED
        rnd.next_bubble_due = None
    return verdict


def skip_round(rnd: RoundState, actor: str) -> None:
    """Student gives up; the round ends with the skip penalty applied."""
    if rnd.terminal:
        raise RoundFinished(f"round {rnd.round_index} is over")
    if actor != rnd.student_id:
        raise NotStudent(f"{actor} is not the student of round {rnd.round_index}")
    rnd.outcome = SKIPPED
    rnd.next_bubble_due = None


def round_score(rnd: RoundState, config: GameConfig) -> int:
    """Bubble-equivalents this round contributes to the session score."""
    if not rnd.terminal:
        raise RoundInProgress("score is defined for terminal rounds only")
    penalty = config.skip_penalty if rnd.outcome == SKIPPED else 0
    return len(rnd.bubbles) + penalty


def finish_round(session: GameSession, rnd: RoundState) -> int:
    """Archive a terminal round on its session and update the running score.

    Returns the round's score contribution.
    """
    if rnd is not session.current_round:
        raise GameError("round does not belong to this session")
    if not rnd.terminal:
        raise RoundInProgress("cannot finish a live round")
    contribution = round_score(rnd, session.config)
    session.rounds.append(rnd)
    session.current_round = None
    session.round_index += 1
    session.score += contribution
    return contribution


def session_score(session: GameSession) -> int:
    """Total bubble-equivalents over completed rounds (lower is better)."""
    return sum(round_score(r, session.config) for r in session.rounds)
