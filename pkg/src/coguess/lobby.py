"""Waiting room, automatic pairing, bot fallback, and the top-10 board.

Players enter once, are paired FIFO two at a time on the authoritative
clock tick, and anyone left waiting longer than `bot_timeout` seconds is
handed a bot partner instead. Bot-partnered sessions are flagged so the
analysis pipeline can exclude them.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

WAITING = "waiting"
PAIRED = "paired"
BOT_ASSIGNED = "bot_assigned"

BOT_TIMEOUT_MS = 120_000.0

BOARD_SIZE = 10


class LobbyError(Exception):
    pass


class AlreadyPlayed(LobbyError):
    """One game per participant; re-entry is refused."""


@dataclass
class LobbyTicket:
    player_id: str
    entered_at: float
    status: str = WAITING


@dataclass(frozen=True)
class PairingEvent:
    """One match decision: two humans, or one human plus a bot stand-in."""

    players: tuple[str, str]
    at: float
    with_bot: bool = False


@dataclass(frozen=True)
class LeaderboardEntry:
    team: str
    score: int
    completed_at: float


class Lobby:
    """Serialized waiting-room state. All mutation goes through
    enter_lobby/match_tick in arrival order."""

    def __init__(self, bot_timeout_ms: float = BOT_TIMEOUT_MS) -> None:
        self.bot_timeout_ms = bot_timeout_ms
        self._queue: list[LobbyTicket] = []
        self._tickets: dict[str, LobbyTicket] = {}

    def enter_lobby(self, player_id: str, now: float) -> LobbyTicket:
        if player_id in self._tickets:
            raise AlreadyPlayed(f"{player_id} has already played")
        ticket = LobbyTicket(player_id=player_id, entered_at=now)
        self._tickets[player_id] = ticket
        self._queue.append(ticket)
        return ticket

    def leave(self, player_id: str) -> None:
        """Drop a waiting ticket (disconnect before pairing). The player may
        re-enter later; only a started game locks them out."""
        ticket = self._tickets.get(player_id)
        if ticket is not None and ticket.status == WAITING:
            self._queue.remove(ticket)
            del self._tickets[player_id]

    def waiting(self) -> list[str]:
        return [t.player_id for t in self._queue]

    def match_tick(self, now: float) -> list[PairingEvent]:
        """Pair waiting tickets FIFO two at a time; time out stragglers.

        A ticket waiting past the bot timeout with no partner available is
        matched against a bot. Human pairing takes priority: timeouts are
        only considered once fewer than two humans remain in the queue.
        """
        events: list[PairingEvent] = []
        while len(self._queue) >= 2:
            a, b = self._queue.pop(0), self._queue.pop(0)
            a.status = b.status = PAIRED
            events.append(PairingEvent(players=(a.player_id, b.player_id), at=now))
        if self._queue and now - self._queue[0].entered_at > self.bot_timeout_ms:
            ticket = self._queue.pop(0)
            ticket.status = BOT_ASSIGNED
            events.append(PairingEvent(players=(ticket.player_id, f"bot:{ticket.player_id}"),
                                       at=now, with_bot=True))
        return events


class Leaderboard:
    """Top-10 board, ascending by score (lower is better), ties broken by
    earlier completion."""

    def __init__(self, size: int = BOARD_SIZE) -> None:
        self.size = size
        self._entries: list[LeaderboardEntry] = []

    @property
    def entries(self) -> list[LeaderboardEntry]:
        return list(self._entries)

    def record_result(self, team: str, score: int, now: float) -> int | None:
        """Insert a finished team's score. Returns its 1-based rank when it
        makes the board, else None."""
        entry = LeaderboardEntry(team=team, score=score, completed_at=now)
        keys = [(e.score, e.completed_at) for e in self._entries]
        pos = bisect.bisect_right(keys, (entry.score, entry.completed_at))
        if pos >= self.size:
            return None
        self._entries.insert(pos, entry)
        del self._entries[self.size:]
        return pos + 1

    def top_mean(self) -> float | None:
        """Arithmetic mean score of the current board, shown in-game."""
        if not self._entries:
            return None
        return sum(e.score for e in self._entries) / len(self._entries)

    def export_rows(self) -> list[tuple[int, str, int, float]]:
        return [(rank, e.team, e.score, e.completed_at)
                for rank, e in enumerate(self._entries, start=1)]
