"""Realtime session hub: lobby, role-aware message relay, and transports.

The hub itself is a deterministic, I/O-free state machine: every entry
point takes an explicit millisecond clock value and returns the list of
(connection id, Message) pairs to deliver. The asyncio TCP and WebSocket
front ends at the bottom of the module feed it bytes and ship its output,
so everything above them can be tested without sockets.

Key behaviors:
  - join_lobby enters the FIFO lobby; pairing (or the 120 s bot fallback)
    starts a session and round 0 immediately.
  - The teacher's round_start carries the full image; the student's does
    not. Pixels reach the student only as per-patch blocks inside
    patch_revealed, so information hiding holds against a modified client.
  - cursor_move is accepted only from the teacher and rate-limited to
    60/s per connection; excess updates are dropped silently.
  - Every authoritative bubble fans out as one patch_revealed to the
    student and one score_update (with the patch extent) to both sides.
  - A disconnected player has a 30 s grace window to rejoin with the same
    player id; afterwards the session is abandoned and logged as such.
"""

from __future__ import annotations

import asyncio
import base64
import math
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from coguess import game
from coguess.bots import (
    StudentPolicy,
    TeacherPolicy,
    UNIFORM_WALK,
    RoundView,
    _wrong_pools,
    bot_student_step,
    bot_teacher_step,
)
from coguess.game import GameConfig, GameSession, ImageRecord, RoundState
from coguess.lobby import AlreadyPlayed, Leaderboard, Lobby
from coguess.protocol import (
    FrameReader,
    MalformedMessage,
    Message,
    decode_body,
    encode_message,
)
from coguess.storage import Event, EventLog

CURSOR_RATE_PER_S = 60.0
GRACE_MS = 30_000.0
DEFAULT_TICK_MS = 10.0

_CLIENT_KINDS = frozenset({"join_lobby", "cursor_move", "guess_submit",
                           "skip", "activity_notice"})


class SyntheticPixels:
    """Deterministic stand-in pixels keyed by image id.

    Each image gets a smooth two-gradient wash plus a few seeded blobs so
    patches are visually distinguishable; no files needed.
    """

    def __init__(self, width: int, height: int) -> None:
        self.width = width
        self.height = height
        self._cache: dict[str, np.ndarray] = {}

    def pixels(self, image_id: str) -> np.ndarray:
        cached = self._cache.get(image_id)
        if cached is not None:
            return cached
        rng = np.random.default_rng(zlib.crc32(image_id.encode("utf-8")))
        h, w = self.height, self.width
        ys, xs = np.mgrid[0:h, 0:w]
        img = np.zeros((h, w, 3), dtype=np.float64)
        img[:, :, 0] = 255.0 * xs / max(w - 1, 1)
        img[:, :, 1] = 255.0 * ys / max(h - 1, 1)
        img[:, :, 2] = 96.0
        for _ in range(4):
            cy, cx = rng.integers(0, h), rng.integers(0, w)
            sigma = rng.uniform(min(h, w) / 12, min(h, w) / 5)
            blob = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * sigma**2))
            img[:, :, rng.integers(0, 3)] += 160.0 * blob
        out = np.clip(img, 0, 255).astype(np.uint8)
        self._cache[image_id] = out
        return out


class FilePixels:
    """Load image files referenced by the manifest, resized to game dims."""

    def __init__(self, manifest: dict[str, ImageRecord], width: int,
                 height: int) -> None:
        self.manifest = manifest
        self.width = width
        self.height = height
        self._cache: dict[str, np.ndarray] = {}
        self._fallback = SyntheticPixels(width, height)

    def pixels(self, image_id: str) -> np.ndarray:
        cached = self._cache.get(image_id)
        if cached is not None:
            return cached
        record = self.manifest[image_id]
        if not record.pixel_data_ref:
            return self._fallback.pixels(image_id)
        from PIL import Image

        with Image.open(record.pixel_data_ref) as im:
            im = im.convert("RGB")
            if im.size != (self.width, self.height):
                im = im.resize((self.width, self.height))
            out = np.asarray(im, dtype=np.uint8)
        self._cache[image_id] = out
        return out


def _b64(block: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(block).tobytes()).decode("ascii")


@dataclass
class _Connection:
    conn_id: str
    player_id: str | None = None
    game_id: str | None = None
    seq: int = 0
    last_cursor_at: float = -math.inf


@dataclass
class _LiveGame:
    game_id: str
    session: GameSession
    rng: np.random.Generator
    with_bot: bool
    bot_id: str | None = None
    bot_rng: np.random.Generator | None = None
    conns: dict[str, str | None] = field(default_factory=dict)
    grace: dict[str, float] = field(default_factory=dict)
    revealed: np.ndarray | None = None
    done: bool = False

    def partner(self, player_id: str) -> str:
        s = self.session
        return s.player_b if player_id == s.player_a else s.player_a


class SessionHub:
    """Authoritative server core. Methods return outbound (conn, message)
    pairs; the caller owns delivery and the clock."""

    def __init__(self, manifest: dict[str, ImageRecord],
                 config: GameConfig | None = None, *,
                 log: EventLog | None = None,
                 pixel_source=None,
                 seed: int = 0,
                 bot_teacher: TeacherPolicy | None = None,
                 bot_student: StudentPolicy | None = None,
                 bot_skip_after: int = 400,
                 grace_ms: float = GRACE_MS,
                 cursor_rate_per_s: float = CURSOR_RATE_PER_S) -> None:
        if not manifest:
            raise ValueError("manifest is empty")
        self.manifest = manifest
        self.config = config or GameConfig()
        self.log = log
        self.seed = seed
        self.lobby = Lobby()
        self.leaderboard = Leaderboard()
        self.pixel_source = pixel_source or SyntheticPixels(
            self.config.image_width, self.config.image_height)
        self.grace_ms = grace_ms
        self._cursor_gap_ms = 1000.0 / cursor_rate_per_s
        self._image_ids = sorted(manifest)
        self._wrong = _wrong_pools(manifest)
        self._conns: dict[str, _Connection] = {}
        self._by_player: dict[str, str] = {}
        self._games: dict[str, _LiveGame] = {}
        self._game_counter = 0
        self.bot_teacher = bot_teacher or TeacherPolicy(strategy=UNIFORM_WALK)
        if bot_student is None:
            mask = np.ones((self.config.image_height, self.config.image_width),
                           dtype=bool)
            bot_student = StudentPolicy(diagnostic_mask=mask,
                                        recognition_threshold=0.15)
        self.bot_student = bot_student
        self.bot_skip_after = bot_skip_after

    # -- plumbing ---------------------------------------------------------

    def _send(self, out: list, conn_id: str | None, kind: str, payload: dict,
              now: float) -> None:
        if conn_id is None:
            return
        conn = self._conns.get(conn_id)
        if conn is None:
            return
        out.append((conn_id, Message(kind=kind, payload=payload,
                                     seq=conn.seq, sent_at=now)))
        conn.seq += 1

    def _error(self, out: list, conn_id: str, code: str, reason: str,
               now: float) -> None:
        self._send(out, conn_id, "error", {"code": code, "reason": reason}, now)

    def _record(self, session_id: str, round_index: int | None, now: float,
                kind: str, payload: dict) -> None:
        if self.log is not None:
            self.log.append_event(Event(session_id, round_index, now, kind, payload))

    # -- connection lifecycle --------------------------------------------

    def connect(self, conn_id: str, now: float) -> list:
        if conn_id in self._conns:
            raise ValueError(f"connection id {conn_id} already in use")
        self._conns[conn_id] = _Connection(conn_id=conn_id)
        return []

    def disconnect(self, conn_id: str, now: float) -> list:
        conn = self._conns.pop(conn_id, None)
        out: list = []
        if conn is None or conn.player_id is None:
            return out
        self._by_player.pop(conn.player_id, None)
        live = self._games.get(conn.game_id) if conn.game_id else None
        if live is None or live.done:
            self.lobby.leave(conn.player_id)
            return out
        live.conns[conn.player_id] = None
        live.grace[conn.player_id] = now + self.grace_ms
        partner = live.partner(conn.player_id)
        self._error(out, live.conns.get(partner), "partner_disconnected",
                    f"{conn.player_id} disconnected; waiting for rejoin", now)
        return out

    # -- inbound dispatch -------------------------------------------------

    def handle_message(self, conn_id: str, message: Message, now: float) -> list:
        out: list = []
        conn = self._conns.get(conn_id)
        if conn is None:
            return out
        kind = message.kind
        if kind not in _CLIENT_KINDS:
            self._error(out, conn_id, "unexpected_kind",
                        f"clients do not send {kind}", now)
            return out
        if kind == "join_lobby":
            self._handle_join(out, conn, message.payload, now)
            return out
        live = self._games.get(conn.game_id) if conn.game_id else None
        if live is None or live.done:
            self._error(out, conn_id, "no_session", "join the lobby first", now)
            return out
        rnd = live.session.current_round
        if rnd is None or rnd.terminal:
            self._error(out, conn_id, "round_finished",
                        "no round is accepting input", now)
            return out
        if kind == "cursor_move":
            self._handle_cursor(out, conn, live, rnd, message.payload, now)
        elif kind == "guess_submit":
            self._handle_guess(out, conn, live, rnd,
                               str(message.payload["text"]), now)
        elif kind == "skip":
            self._handle_skip(out, conn, live, rnd, now)
        elif kind == "activity_notice":
            self._relay_activity(out, conn, live, message.payload, now)
        return out

    def _handle_join(self, out: list, conn: _Connection, payload: dict,
                     now: float) -> None:
        player_id = str(payload["player_id"])
        if conn.player_id is not None:
            self._error(out, conn.conn_id, "already_joined",
                        f"connection is already {conn.player_id}", now)
            return
        if player_id in self._by_player:
            self._error(out, conn.conn_id, "player_id_taken",
                        f"{player_id} is connected elsewhere", now)
            return
        for live in self._games.values():
            if not live.done and player_id in live.conns \
                    and live.conns[player_id] is None:
                conn.player_id = player_id
                conn.game_id = live.game_id
                self._by_player[player_id] = conn.conn_id
                self._resume(out, conn, live, player_id, now)
                return
        try:
            self.lobby.enter_lobby(player_id, now)
        except AlreadyPlayed as exc:
            self._error(out, conn.conn_id, "already_played", str(exc), now)
            return
        conn.player_id = player_id
        self._by_player[player_id] = conn.conn_id

    def _handle_cursor(self, out: list, conn: _Connection, live: _LiveGame,
                       rnd: RoundState, payload: dict, now: float) -> None:
        if now - conn.last_cursor_at < self._cursor_gap_ms:
            return
        conn.last_cursor_at = now
        x, y = int(payload["x"]), int(payload["y"])
        try:
            bubble = game.cursor_update(rnd, live.session.config,
                                        conn.player_id, x, y, now, live.rng)
        except game.NotTeacher:
            self._error(out, conn.conn_id, "role_violation",
                        "only the teacher moves the cursor", now)
            return
        except game.OutOfBounds as exc:
            self._error(out, conn.conn_id, "out_of_bounds", str(exc), now)
            return
        self._record(live.game_id, rnd.round_index, now, "cursor",
                     {"x": x, "y": y})
        if bubble is not None:
            self._record(live.game_id, rnd.round_index, now, "bubble",
                         {"x": bubble.x, "y": bubble.y, "seq": bubble.seq})
            self._fan_out_bubble(out, live, rnd, bubble, now)

    def _handle_guess(self, out: list, conn: _Connection, live: _LiveGame,
                      rnd: RoundState, text: str, now: float) -> None:
        image = self.manifest[rnd.image_id]
        try:
            verdict = game.submit_guess(rnd, image, conn.player_id, text)
        except game.NotStudent:
            self._error(out, conn.conn_id, "role_violation",
                        "only the student guesses", now)
            return
        self._record(live.game_id, rnd.round_index, now, "guess",
                     {"text": text, "verdict": verdict})
        self._broadcast_guess(out, live, rnd, text, verdict, now)
        if rnd.terminal:
            self._finish_round(out, live, rnd, now)

    def _handle_skip(self, out: list, conn: _Connection, live: _LiveGame,
                     rnd: RoundState, now: float) -> None:
        try:
            game.skip_round(rnd, conn.player_id)
        except game.NotStudent:
            self._error(out, conn.conn_id, "role_violation",
                        "only the student skips", now)
            return
        self._record(live.game_id, rnd.round_index, now, "skip", {})
        self._finish_round(out, live, rnd, now)

    def _relay_activity(self, out: list, conn: _Connection, live: _LiveGame,
                        payload: dict, now: float) -> None:
        if payload.get("activity") != "typing":
            self._error(out, conn.conn_id, "bad_activity",
                        "clients only report typing", now)
            return
        rnd = live.session.current_round
        role = "student" if conn.player_id == rnd.student_id else "teacher"
        partner = live.partner(conn.player_id)
        self._send(out, live.conns.get(partner), "activity_notice",
                   {"actor": role, "activity": "typing"}, now)

    # -- game flow --------------------------------------------------------

    def tick(self, now: float) -> list:
        out: list = []
        for pairing in self.lobby.match_tick(now):
            self._start_game(out, pairing, now)
        for live in list(self._games.values()):
            if live.done:
                continue
            expired = [p for p, deadline in live.grace.items() if now >= deadline]
            if expired:
                self._abandon(out, live, now)
                continue
            rnd = live.session.current_round
            if rnd is None or rnd.terminal:
                continue
            if live.bot_id == rnd.teacher_id:
                self._bot_teacher_move(out, live, rnd, now)
            while (not rnd.terminal and rnd.next_bubble_due is not None
                   and now >= rnd.next_bubble_due):
                bubble = game.bubble_tick(rnd, live.session.config, now, live.rng)
                if bubble is None:
                    break
                self._record(live.game_id, rnd.round_index, now, "bubble",
                             {"x": bubble.x, "y": bubble.y, "seq": bubble.seq})
                self._fan_out_bubble(out, live, rnd, bubble, now)
        return out

    def _start_game(self, out: list, pairing, now: float) -> None:
        self._game_counter += 1
        game_id = f"game-{self._game_counter:04d}"
        seeds = np.random.SeedSequence([self.seed, self._game_counter]).spawn(2)
        rng = np.random.default_rng(seeds[0])
        player_a, player_b = pairing.players
        session = game.new_session(game_id, player_a, player_b,
                                   self._image_ids, self.config, rng)
        live = _LiveGame(game_id=game_id, session=session, rng=rng,
                         with_bot=pairing.with_bot)
        if pairing.with_bot:
            live.bot_id = player_b
            live.bot_rng = np.random.default_rng(seeds[1])
        for player in (player_a, player_b):
            if player == live.bot_id:
                continue
            conn_id = self._by_player.get(player)
            live.conns[player] = conn_id
            if conn_id is not None:
                self._conns[conn_id].game_id = game_id
        if live.bot_id is not None:
            live.conns[live.bot_id] = None
        self._games[game_id] = live
        self._record(game_id, None, now, "session_start",
                     {"player_a": player_a, "player_b": player_b,
                      "image_sequence": session.image_sequence,
                      "config": asdict(self.config), "with_bot": pairing.with_bot})
        for player in (player_a, player_b):
            self._send(out, live.conns.get(player), "paired",
                       {"session_id": game_id, "partner": live.partner(player),
                        "with_bot": pairing.with_bot}, now)
        self._begin_round(out, live, now)

    def _begin_round(self, out: list, live: _LiveGame, now: float) -> None:
        session = live.session
        rnd = game.begin_round(session, now)
        cfg = session.config
        live.revealed = np.zeros((cfg.image_height, cfg.image_width), dtype=bool)
        self._record(live.game_id, rnd.round_index, now, "round_start",
                     {"image_id": rnd.image_id, "teacher": rnd.teacher_id,
                      "student": rnd.student_id})
        base = {"round_index": rnd.round_index, "width": cfg.image_width,
                "height": cfg.image_height}
        teacher_payload = dict(base, role="teacher", image_id=rnd.image_id,
                               image=_b64(self.pixel_source.pixels(rnd.image_id)))
        self._send(out, live.conns.get(rnd.teacher_id), "round_start",
                   teacher_payload, now)
        self._send(out, live.conns.get(rnd.student_id), "round_start",
                   dict(base, role="student"), now)
        self._send(out, live.conns.get(rnd.student_id), "activity_notice",
                   {"actor": "teacher", "activity": "considering"}, now)

    def _fan_out_bubble(self, out: list, live: _LiveGame, rnd: RoundState,
                        bubble, now: float) -> None:
        cfg = live.session.config
        x0, y0, w, h = cfg.bubble_extent(bubble.x, bubble.y)
        pixels = self.pixel_source.pixels(rnd.image_id)
        patch = pixels[y0:y0 + h, x0:x0 + w]
        live.revealed[y0:y0 + h, x0:x0 + w] = True
        if bubble.seq == 0:
            self._send(out, live.conns.get(rnd.student_id), "activity_notice",
                       {"actor": "teacher", "activity": "bubbling"}, now)
        self._send(out, live.conns.get(rnd.student_id), "patch_revealed",
                   {"x": x0, "y": y0, "w": w, "h": h, "seq": bubble.seq,
                    "data": _b64(patch)}, now)
        running = live.session.score + len(rnd.bubbles)
        score = {"session_score": running, "round_bubbles": len(rnd.bubbles),
                 "x": x0, "y": y0, "w": w, "h": h, "seq": bubble.seq}
        for player in live.conns:
            self._send(out, live.conns.get(player), "score_update", score, now)
        if live.bot_id == rnd.student_id:
            self._bot_student_turn(out, live, rnd, now)

    def _broadcast_guess(self, out: list, live: _LiveGame, rnd: RoundState,
                         text: str, verdict: str, now: float) -> None:
        for player in live.conns:
            self._send(out, live.conns.get(player), "guess_result",
                       {"text": text, "verdict": verdict}, now)
        activity = "correct" if verdict == game.CORRECT else "incorrect"
        self._send(out, live.conns.get(rnd.teacher_id), "activity_notice",
                   {"actor": "student", "activity": activity}, now)

    def _finish_round(self, out: list, live: _LiveGame, rnd: RoundState,
                      now: float) -> None:
        session = live.session
        game.finish_round(session, rnd)
        self._record(live.game_id, rnd.round_index, now, "round_end",
                     {"outcome": rnd.outcome, "bubbles_used": len(rnd.bubbles),
                      "round_score": game.round_score(rnd, session.config),
                      "session_score": session.score})
        payload = {"round_index": rnd.round_index, "outcome": rnd.outcome,
                   "bubbles_used": len(rnd.bubbles),
                   "session_score": session.score}
        for player in live.conns:
            self._send(out, live.conns.get(player), "round_end", payload, now)
        if session.complete:
            self._finish_game(out, live, now)
        else:
            self._begin_round(out, live, now)

    def _finish_game(self, out: list, live: _LiveGame, now: float) -> None:
        session = live.session
        live.done = True
        self._record(live.game_id, None, now, "session_end",
                     {"final_score": session.score,
                      "rounds_played": len(session.rounds)})
        if not live.with_bot:
            team = f"{session.player_a}+{session.player_b}"
            self.leaderboard.record_result(team, session.score, now)
        rows = [{"rank": r, "team": t, "score": s, "completed_at": at}
                for r, t, s, at in self.leaderboard.export_rows()]
        final = {"final_score": session.score,
                 "rounds_played": len(session.rounds)}
        for player in live.conns:
            self._send(out, live.conns.get(player), "game_end", final, now)
            self._send(out, live.conns.get(player), "leaderboard",
                       {"entries": rows}, now)

    def _abandon(self, out: list, live: _LiveGame, now: float) -> None:
        live.done = True
        rnd = live.session.current_round
        round_index = rnd.round_index if rnd is not None else None
        self._record(live.game_id, round_index, now, "abandoned", {})
        for player, conn_id in live.conns.items():
            self._error(out, conn_id, "session_abandoned",
                        "partner did not return within the grace window", now)

    def _resume(self, out: list, conn: _Connection, live: _LiveGame,
                player_id: str, now: float) -> None:
        live.conns[player_id] = conn.conn_id
        live.grace.pop(player_id, None)
        partner = live.partner(player_id)
        self._send(out, conn.conn_id, "paired",
                   {"session_id": live.game_id, "partner": partner,
                    "with_bot": live.with_bot}, now)
        session = live.session
        rnd = session.current_round
        if rnd is None or rnd.terminal:
            return
        cfg = session.config
        base = {"round_index": rnd.round_index, "width": cfg.image_width,
                "height": cfg.image_height}
        if player_id == rnd.teacher_id:
            self._send(out, conn.conn_id, "round_start",
                       dict(base, role="teacher", image_id=rnd.image_id,
                            image=_b64(self.pixel_source.pixels(rnd.image_id))),
                       now)
        else:
            self._send(out, conn.conn_id, "round_start",
                       dict(base, role="student"), now)
            pixels = self.pixel_source.pixels(rnd.image_id)
            for bubble in rnd.bubbles:
                x0, y0, w, h = cfg.bubble_extent(bubble.x, bubble.y)
                self._send(out, conn.conn_id, "patch_revealed",
                           {"x": x0, "y": y0, "w": w, "h": h, "seq": bubble.seq,
                            "data": _b64(pixels[y0:y0 + h, x0:x0 + w])}, now)
        self._send(out, conn.conn_id, "score_update",
                   {"session_score": session.score + len(rnd.bubbles),
                    "round_bubbles": len(rnd.bubbles)}, now)
        self._error(out, live.conns.get(partner), "partner_rejoined",
                    f"{player_id} is back", now)

    # -- built-in bot opponent -------------------------------------------

    def _bot_teacher_move(self, out: list, live: _LiveGame, rnd: RoundState,
                          now: float) -> None:
        last = (rnd.bubbles[-1].x, rnd.bubbles[-1].y) if rnd.bubbles else None
        view = RoundView(revealed=live.revealed, last_center=last,
                         config=live.session.config)
        x, y = bot_teacher_step(self.bot_teacher, view, live.bot_rng)
        bubble = game.cursor_update(rnd, live.session.config, live.bot_id,
                                    x, y, now, live.rng)
        self._record(live.game_id, rnd.round_index, now, "cursor",
                     {"x": x, "y": y})
        if bubble is not None:
            self._record(live.game_id, rnd.round_index, now, "bubble",
                         {"x": bubble.x, "y": bubble.y, "seq": bubble.seq})
            self._fan_out_bubble(out, live, rnd, bubble, now)

    def _bot_student_turn(self, out: list, live: _LiveGame, rnd: RoundState,
                          now: float) -> None:
        if rnd.terminal:
            return
        if len(rnd.bubbles) >= self.bot_skip_after:
            game.skip_round(rnd, live.bot_id)
            self._record(live.game_id, rnd.round_index, now, "skip", {})
            self._finish_round(out, live, rnd, now)
            return
        image = self.manifest[rnd.image_id]
        guesses = bot_student_step(self.bot_student, live.revealed, image,
                                   self._wrong.get(rnd.image_id, []),
                                   live.bot_rng)
        for text in guesses:
            verdict = game.submit_guess(rnd, image, live.bot_id, text)
            self._record(live.game_id, rnd.round_index, now, "guess",
                         {"text": text, "verdict": verdict})
            self._broadcast_guess(out, live, rnd, text, verdict, now)
            if rnd.terminal:
                self._finish_round(out, live, rnd, now)
                return


# -- asyncio front ends ---------------------------------------------------


def _now_ms() -> float:
    return time.time() * 1000.0


class GameServer:
    """Serve one SessionHub over TCP and WebSocket.

    Both transports exchange the same byte frames (4-byte big-endian
    length prefix + UTF-8 JSON body); over WebSocket each frame travels
    as one binary message. All hub access is serialized on the event
    loop, which realizes the per-session mailbox ordering.
    """

    def __init__(self, hub: SessionHub, host: str = "127.0.0.1",
                 tcp_port: int = 0, ws_port: int = 0,
                 tick_ms: float = DEFAULT_TICK_MS, clock=_now_ms) -> None:
        self.hub = hub
        self.host = host
        self.tcp_port = tcp_port
        self.ws_port = ws_port
        self.tick_ms = tick_ms
        self.clock = clock
        self._senders: dict[str, object] = {}
        self._counter = 0
        self._tcp_server = None
        self._ws_server = None
        self._tick_task = None

    def _next_conn_id(self) -> str:
        self._counter += 1
        return f"conn-{self._counter:05d}"

    async def _dispatch(self, outbound: list) -> None:
        for conn_id, message in outbound:
            sender = self._senders.get(conn_id)
            if sender is None:
                continue
            try:
                await sender(encode_message(message))
            except Exception:
                pass

    async def _handle_frames(self, conn_id: str, body: bytes) -> None:
        try:
            message = decode_body(body)
        except MalformedMessage as exc:
            now = self.clock()
            conn = self.hub._conns.get(conn_id)
            if conn is not None:
                err = Message(kind="error",
                              payload={"code": "malformed", "reason": str(exc)},
                              seq=conn.seq, sent_at=now)
                conn.seq += 1
                await self._dispatch([(conn_id, err)])
            return
        await self._dispatch(self.hub.handle_message(conn_id, message,
                                                     self.clock()))

    async def _tcp_client(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        conn_id = self._next_conn_id()

        async def send(frame: bytes) -> None:
            writer.write(frame)
            await writer.drain()

        self._senders[conn_id] = send
        self.hub.connect(conn_id, self.clock())
        frames = FrameReader()
        try:
            while True:
                chunk = await reader.read(65536)
                if not chunk:
                    break
                for body in frames.feed(chunk):
                    await self._handle_frames(conn_id, body)
        except (ConnectionError, MalformedMessage):
            pass
        finally:
            self._senders.pop(conn_id, None)
            await self._dispatch(self.hub.disconnect(conn_id, self.clock()))
            writer.close()

    async def _ws_client(self, ws) -> None:
        conn_id = self._next_conn_id()

        async def send(frame: bytes) -> None:
            await ws.send(frame)

        self._senders[conn_id] = send
        self.hub.connect(conn_id, self.clock())
        try:
            async for raw in ws:
                if isinstance(raw, str):
                    raw = raw.encode("utf-8")
                if len(raw) >= 4:
                    await self._handle_frames(conn_id, raw[4:])
        except Exception:
            pass
        finally:
            self._senders.pop(conn_id, None)
            await self._dispatch(self.hub.disconnect(conn_id, self.clock()))

    async def _tick_loop(self) -> None:
        while True:
            await self._dispatch(self.hub.tick(self.clock()))
            await asyncio.sleep(self.tick_ms / 1000.0)

    async def start(self) -> tuple[int, int]:
        """Bind both listeners; returns (tcp_port, ws_port)."""
        import websockets

        self._tcp_server = await asyncio.start_server(
            self._tcp_client, self.host, self.tcp_port)
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self._ws_server = await websockets.serve(
            self._ws_client, self.host, self.ws_port)
        self.ws_port = next(iter(self._ws_server.sockets)).getsockname()[1]
        self._tick_task = asyncio.create_task(self._tick_loop())
        return self.tcp_port, self.ws_port

    async def stop(self) -> None:
        if self._tick_task is not None:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()

    async def serve_forever(self) -> None:
        await self.start()
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()
