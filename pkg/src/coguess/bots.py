"""Scripted teacher and student policies, and headless population simulation.

A bot teacher streams cursor positions toward regions its policy deems
informative; a bot student watches revealed coverage of its diagnostic
mask and guesses once enough is visible. simulate_population runs whole
populations of such pairs through the real rules engine, emitting event
logs schema-identical to human play, so the analysis pipeline can be
exercised and calibrated at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from coguess import game
from coguess.game import GameConfig, GameSession, ImageRecord, RoundState
from coguess.storage import Event, EventLog

HOTSPOT_WALK = "hotspot_walk"
UNIFORM_WALK = "uniform_walk"

TICK_MS = 10.0
ROUND_GAP_MS = 1000.0


@dataclass(frozen=True)
class TeacherPolicy:
    """Where a bot teacher steers. hotspot_walk greedily uncovers the mass
    of `target_map`; uniform_walk wanders with no spatial preference."""

    strategy: str
    target_map: np.ndarray | None = None
    noise_scale: float = 0.0

    def __post_init__(self) -> None:
        if self.strategy not in (HOTSPOT_WALK, UNIFORM_WALK):
            raise ValueError(f"unknown strategy: {self.strategy!r}")
        if self.strategy == HOTSPOT_WALK and self.target_map is None:
            raise ValueError("hotspot_walk needs a target_map")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")


@dataclass(frozen=True)
class StudentPolicy:
    """When a bot student guesses: once the revealed fraction of its
    diagnostic mask reaches the threshold, optionally after one wrong try."""

    diagnostic_mask: np.ndarray
    recognition_threshold: float
    guess_noise: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.recognition_threshold <= 1.0):
            raise ValueError("recognition_threshold must be in [0, 1]")
        if not (0.0 <= self.guess_noise <= 1.0):
            raise ValueError("guess_noise must be a probability")
        if not bool(np.any(self.diagnostic_mask)):
            raise ValueError("diagnostic_mask must select at least one pixel")


@dataclass
class RoundView:
    """What a bot is allowed to see: revealed coverage and the last bubble."""

    revealed: np.ndarray                     # H x W bool
    last_center: tuple[int, int] | None
    config: GameConfig


def _reflect(value: int, size: int) -> int:
    """Reflect an out-of-range coordinate back into [0, size); keeps a
    symmetric random walk's stationary distribution uniform."""
    period = 2 * size
    value %= period
    if value < 0:
        value += period
    return value if value < size else period - 1 - value


def _window_sums(patch: np.ndarray, side: int) -> np.ndarray:
    """Sliding-window sums of a side x side box over `patch` (valid mode)."""
    integral = np.zeros((patch.shape[0] + 1, patch.shape[1] + 1))
    np.cumsum(patch, axis=0, out=integral[1:, 1:])
    integral[1:, 1:] = np.cumsum(integral[1:, 1:], axis=1)
    return (integral[side:, side:] - integral[:-side, side:]
            - integral[side:, :-side] + integral[:-side, :-side])


def bot_teacher_step(policy: TeacherPolicy, view: RoundView, rng) -> tuple[int, int]:
    """Choose the teacher's next cursor position.

    hotspot_walk starts at the (noise-perturbed) argmax of the target map,
    then greedily picks the reachable center whose bubble extent holds the
    most unrevealed target mass; on a local plateau it steps toward the
    global argmax of unrevealed mass. uniform_walk starts uniformly and
    takes symmetric reflected steps.
    """
    config = view.config
    width, height = config.image_width, config.image_height
    r = config.adjacency_radius
    if policy.strategy == UNIFORM_WALK:
        if view.last_center is None:
            return int(rng.integers(0, width)), int(rng.integers(0, height))
        px, py = view.last_center
        dx = int(rng.integers(-r, r + 1))
        dy = int(rng.integers(-r, r + 1))
        return _reflect(px + dx, width), _reflect(py + dy, height)

    target = policy.target_map
    if view.last_center is None:
        flat = int(np.argmax(target))
        y, x = divmod(flat, width)
        if policy.noise_scale > 0:
            x += int(round(rng.normal(0.0, policy.noise_scale)))
            y += int(round(rng.normal(0.0, policy.noise_scale)))
        return (min(max(x, 0), width - 1), min(max(y, 0), height - 1))

    px, py = view.last_center
    size = config.bubble_size
    half = size // 2
    # local patch covering every candidate extent: centers px+-r, extents +-(half, size-half-1)
    lx0, ly0 = px - r - half, py - r - half
    span = 2 * r + size
    patch = np.zeros((span, span))
    sx0, sy0 = max(lx0, 0), max(ly0, 0)
    sx1, sy1 = min(lx0 + span, width), min(ly0 + span, height)
    if sx1 > sx0 and sy1 > sy0:
        region = target[sy0:sy1, sx0:sx1] * ~view.revealed[sy0:sy1, sx0:sx1]
        patch[sy0 - ly0:sy1 - ly0, sx0 - lx0:sx1 - lx0] = region
    scores = _window_sums(patch, size)           # (2r+1) x (2r+1) candidate scores
    cand_x = np.arange(px - r, px + r + 1)
    cand_y = np.arange(py - r, py + r + 1)
    valid = ((cand_y >= 0) & (cand_y < height))[:, None] \
        & ((cand_x >= 0) & (cand_x < width))[None, :]
    scores = np.where(valid, scores, -1.0)
    best = int(np.argmax(scores))
    by, bx = divmod(best, scores.shape[1])
    if scores[by, bx] > 0.0:
        return int(cand_x[bx]), int(cand_y[by])
    # local plateau: head toward the richest unrevealed region
    remaining = target * ~view.revealed
    if float(remaining.sum()) <= 0.0:
        dx = int(rng.integers(-r, r + 1))
        dy = int(rng.integers(-r, r + 1))
        return _reflect(px + dx, width), _reflect(py + dy, height)
    gy, gx = divmod(int(np.argmax(remaining)), width)
    step_x = min(max(gx - px, -r), r)
    step_y = min(max(gy - py, -r), r)
    return px + step_x, py + step_y


def bot_student_step(policy: StudentPolicy, revealed: np.ndarray,
                     image: ImageRecord, wrong_pool: list[str], rng) -> list[str]:
    """Return the guesses to submit now (possibly empty).

    Guessing triggers when the revealed fraction of the diagnostic mask
    reaches the recognition threshold; with probability guess_noise one
    wrong label from the pool precedes the correct category.
    """
    mask = policy.diagnostic_mask
    covered = int(np.count_nonzero(revealed & mask))
    if covered / int(np.count_nonzero(mask)) < policy.recognition_threshold:
        return []
    guesses: list[str] = []
    if wrong_pool and policy.guess_noise > 0 and rng.random() < policy.guess_noise:
        guesses.append(wrong_pool[int(rng.integers(0, len(wrong_pool)))])
    guesses.append(image.category)
    return guesses


def _policy_for(policies, pair_index: int, image_id: str):
    """Resolve a policy spec: single policy, per-image bank, or per-pair
    list of either."""
    spec = policies
    if isinstance(spec, list):
        spec = spec[pair_index]
    if isinstance(spec, dict):
        return spec[image_id]
    return spec


def _reveal(revealed: np.ndarray, x: int, y: int, config: GameConfig) -> None:
    x0, y0, w, h = config.bubble_extent(x, y)
    revealed[y0:y0 + h, x0:x0 + w] = True


def simulate_population(manifest: dict[str, ImageRecord], n_pairs: int,
                        teacher_policies, student_policies, seed: int,
                        config: GameConfig, log: EventLog | None = None,
                        skip_after: int = 400,
                        session_prefix: str = "sim") -> list[GameSession]:
    """Run n_pairs full games through the rules engine, logging as it goes.

    All randomness derives from per-pair children of the master seed, so
    results are reproducible and independent of scheduling. The simulated
    clock starts at 0 ms per session and advances on the 10 ms tick
    lattice, jumping idle stretches. Rounds exceeding `skip_after` bubbles
    are skipped by the student to bound runaway walks.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    image_ids = list(manifest)
    wrong_pools = _wrong_pools(manifest)
    children = np.random.SeedSequence(seed).spawn(n_pairs)
    sessions: list[GameSession] = []

    def emit(e: Event) -> None:
        if log is not None:
            log.append_event(e)

    for i in range(n_pairs):
        rng = np.random.default_rng(children[i])
        session_id = f"{session_prefix}-{i:04d}"
        session = game.new_session(session_id, f"{session_id}-a", f"{session_id}-b",
                                   image_ids, config, rng)
        emit(Event(session_id, None, 0.0, "session_start", {
            "player_a": session.player_a, "player_b": session.player_b,
            "image_sequence": session.image_sequence,
            "config": asdict(config), "with_bot": False, "simulated": True,
        }))
        now = 0.0
        for _ in range(config.rounds_per_game):
            rnd = game.begin_round(session, now)
            image = manifest[rnd.image_id]
            teacher = _policy_for(teacher_policies, i, rnd.image_id)
            student = _policy_for(student_policies, i, rnd.image_id)
            emit(Event(session_id, rnd.round_index, now, "round_start", {
                "image_id": rnd.image_id, "teacher": rnd.teacher_id,
                "student": rnd.student_id,
            }))
            now = _play_round(session, rnd, image, teacher, student,
                              wrong_pools[image.category], rng, now,
                              skip_after, emit)
            game.finish_round(session, rnd)
            emit(Event(session_id, rnd.round_index, now, "round_end", {
                "outcome": rnd.outcome, "bubbles_used": len(rnd.bubbles),
                "round_score": game.round_score(rnd, config),
                "session_score": session.score,
            }))
            now += ROUND_GAP_MS
        emit(Event(session_id, None, now, "session_end", {
            "final_score": session.score, "rounds_played": session.round_index,
        }))
        sessions.append(session)
    return sessions


def _wrong_pools(manifest: dict[str, ImageRecord]) -> dict[str, list[str]]:
    categories = sorted({rec.category for rec in manifest.values()})
    return {cat: [c for c in categories if c != cat] for cat in categories}


def _play_round(session: GameSession, rnd: RoundState, image: ImageRecord,
                teacher: TeacherPolicy, student: StudentPolicy,
                wrong_pool: list[str], rng, now: float,
                skip_after: int, emit) -> float:
    config = session.config
    revealed = np.zeros((config.image_height, config.image_width), dtype=bool)
    view = RoundView(revealed=revealed, last_center=None, config=config)
    session_id = session.session_id

    x, y = bot_teacher_step(teacher, view, rng)
    emit(Event(session_id, rnd.round_index, now, "cursor", {"x": x, "y": y}))
    bubble = game.cursor_update(rnd, config, rnd.teacher_id, x, y, now, rng)
    while True:
        _reveal(revealed, bubble.x, bubble.y, config)
        view.last_center = (bubble.x, bubble.y)
        emit(Event(session_id, rnd.round_index, now, "bubble",
                   {"x": bubble.x, "y": bubble.y, "seq": bubble.seq}))

        for text in bot_student_step(student, revealed, image, wrong_pool, rng):
            verdict = game.submit_guess(rnd, image, rnd.student_id, text)
            emit(Event(session_id, rnd.round_index, now, "guess",
                       {"text": text, "verdict": verdict}))
            if verdict == game.CORRECT:
                return now
        if len(rnd.bubbles) >= skip_after:
            game.skip_round(rnd, rnd.student_id)
            emit(Event(session_id, rnd.round_index, now, "skip", {}))
            return now

        # jump to the tick on which the next bubble lands
        due = rnd.next_bubble_due
        now = float(np.ceil(due / TICK_MS) * TICK_MS)
        x, y = bot_teacher_step(teacher, view, rng)
        emit(Event(session_id, rnd.round_index, now, "cursor", {"x": x, "y": y}))
        game.cursor_update(rnd, config, rnd.teacher_id, x, y, now, rng)
        bubble = game.bubble_tick(rnd, config, now, rng)
        assert bubble is not None
