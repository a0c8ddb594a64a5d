"""Append-only event logging, deterministic replay, and analysis export.

Every session action lands as one JSON line in a day/shard file under the
log root. Replay folds those recorded facts back into a GameSession
without re-drawing any randomness, validating scores as it goes, so the
log is the single durable source of truth behind all analysis.
"""

from __future__ import annotations

import csv
import json
import re
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from coguess import game
from coguess.game import GameConfig, GameSession, RoundState, Bubble
from coguess.maps import BubbleMap, rasterize_bubbles, read_grid, write_grid

EVENT_KINDS = frozenset({
    "session_start", "round_start", "cursor", "bubble", "guess",
    "skip", "round_end", "session_end", "abandoned",
})

TERMINAL_KINDS = frozenset({"session_end", "abandoned"})

_UNSAFE_PATH = re.compile(r"[^A-Za-z0-9._-]")


class StorageError(Exception):
    pass


class OutOfOrder(StorageError):
    """Timestamp regression or event after a session's terminal event."""


class UnknownSession(StorageError):
    pass


class CorruptLog(StorageError):
    def __init__(self, message: str, offset: int = -1, path: Path | None = None) -> None:
        where = f" at {path}:{offset}" if path is not None else ""
        super().__init__(f"{message}{where}")
        self.offset = offset
        self.path = path


@dataclass(frozen=True)
class Event:
    session_id: str
    round_index: int | None
    at: float
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {self.kind!r}")


def _encode_event(e: Event) -> bytes:
    return (json.dumps(
        {"session_id": e.session_id, "round_index": e.round_index,
         "at": e.at, "kind": e.kind, "payload": e.payload},
        sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _decode_event(line: str) -> Event:
    raw = json.loads(line)
    return Event(session_id=raw["session_id"], round_index=raw["round_index"],
                 at=float(raw["at"]), kind=raw["kind"], payload=raw["payload"])


class EventLog:
    """One JSON record per line, one file per day per shard.

    Appends are flushed before returning. Per-session ordering is
    enforced: timestamps may not regress (equal timestamps keep append
    order) and nothing may follow a session's terminal event.
    """

    def __init__(self, root: str | Path, shards: int = 1) -> None:
        if shards < 1:
            raise ValueError("shards must be >= 1")
        self.root = Path(root)
        self.shards = shards
        self.root.mkdir(parents=True, exist_ok=True)
        self._handles: dict[Path, object] = {}
        self._last_at: dict[str, float] = {}
        self._terminal: set[str] = set()
        for event in self.iter_events():
            self._last_at[event.session_id] = event.at
            if event.kind in TERMINAL_KINDS:
                self._terminal.add(event.session_id)

    def _file_for(self, e: Event) -> Path:
        day = datetime.fromtimestamp(e.at / 1000.0, tz=timezone.utc).strftime("%Y%m%d")
        shard = zlib.crc32(e.session_id.encode("utf-8")) % self.shards
        return self.root / f"events-{day}-{shard:02d}.jsonl"

    def append_event(self, e: Event) -> None:
        if e.session_id in self._terminal:
            raise OutOfOrder(f"{e.session_id}: event after terminal")
        last = self._last_at.get(e.session_id)
        if last is not None and e.at < last:
            raise OutOfOrder(f"{e.session_id}: {e.at} < {last}")
        path = self._file_for(e)
        fh = self._handles.get(path)
        if fh is None:
            fh = path.open("ab")
            self._handles[path] = fh
        fh.write(_encode_event(e))
        fh.flush()
        self._last_at[e.session_id] = e.at
        if e.kind in TERMINAL_KINDS:
            self._terminal.add(e.session_id)

    def close(self) -> None:
        for fh in self._handles.values():
            fh.close()
        self._handles.clear()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def files(self) -> list[Path]:
        return sorted(self.root.glob("events-*.jsonl"))

    def _iter_raw(self):
        """Yield (event, path, line offset) for every valid line; raise
        CorruptLog at the first undecodable one."""
        for path in self.files():
            offset = 0
            with path.open("rb") as fh:
                for raw in fh:
                    line = raw.decode("utf-8", errors="replace").strip()
                    if line:
                        try:
                            event = _decode_event(line)
                        except (json.JSONDecodeError, KeyError, ValueError) as exc:
                            raise CorruptLog(f"undecodable event: {exc}",
                                             offset=offset, path=path) from exc
                        yield event, path, offset
                    offset += len(raw)

    def iter_events(self):
        for event, _path, _offset in self._iter_raw():
            yield event

    def session_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for event in self.iter_events():
            seen.setdefault(event.session_id, None)
        return list(seen)


@dataclass
class ReplayedSession:
    session: GameSession
    with_bot: bool
    abandoned: bool


def replay(log: EventLog, session_id: str) -> ReplayedSession:
    """Reconstruct a session from its recorded facts.

    No randomness is re-drawn: bubbles, guesses, and outcomes come straight
    from the log. Scores are recomputed through the rules engine and
    checked against the recorded values; any inconsistency or truncation
    raises CorruptLog with the last valid location.
    """
    trace = [(e, path, off) for e, path, off in log._iter_raw()
             if e.session_id == session_id]
    if not trace:
        raise UnknownSession(session_id)

    first, path, offset = trace[0]
    if first.kind != "session_start":
        raise CorruptLog(f"{session_id}: first event is {first.kind}",
                         offset=offset, path=path)
    p = first.payload
    config = GameConfig(**p["config"])
    session = GameSession(session_id=session_id, player_a=p["player_a"],
                          player_b=p["player_b"],
                          image_sequence=list(p["image_sequence"]), config=config)
    with_bot = bool(p.get("with_bot", False))
    abandoned = False
    current: RoundState | None = None

    for event, path, offset in trace[1:]:
        if event.kind == "round_start":
            if current is not None:
                raise CorruptLog(f"{session_id}: round_start inside a round",
                                 offset=offset, path=path)
            q = event.payload
            current = RoundState(round_index=event.round_index,
                                 image_id=q["image_id"],
                                 teacher_id=q["teacher"], student_id=q["student"],
                                 started_at=event.at)
            if q["image_id"] != session.image_sequence[event.round_index]:
                raise CorruptLog(f"{session_id}: image out of sequence",
                                 offset=offset, path=path)
            session.current_round = current
        elif event.kind == "cursor":
            if current is None:
                raise CorruptLog(f"{session_id}: cursor outside a round",
                                 offset=offset, path=path)
            current.cursor = (event.payload["x"], event.payload["y"])
        elif event.kind == "bubble":
            if current is None:
                raise CorruptLog(f"{session_id}: bubble outside a round",
                                 offset=offset, path=path)
            current.bubbling_active = True
            current.bubbles.append(Bubble(x=event.payload["x"], y=event.payload["y"],
                                          placed_at=event.at - current.started_at,
                                          seq=event.payload["seq"]))
        elif event.kind == "guess":
            if current is None:
                raise CorruptLog(f"{session_id}: guess outside a round",
                                 offset=offset, path=path)
            verdict = event.payload["verdict"]
            current.guesses.append((event.payload["text"], verdict))
            if verdict == game.CORRECT:
                current.outcome = game.RECOGNIZED
        elif event.kind == "skip":
            if current is None:
                raise CorruptLog(f"{session_id}: skip outside a round",
                                 offset=offset, path=path)
            current.outcome = game.SKIPPED
        elif event.kind == "round_end":
            if current is None:
                raise CorruptLog(f"{session_id}: round_end outside a round",
                                 offset=offset, path=path)
            if current.outcome != event.payload["outcome"]:
                raise CorruptLog(
                    f"{session_id}: outcome {current.outcome} vs recorded "
                    f"{event.payload['outcome']}", offset=offset, path=path)
            game.finish_round(session, current)
            if session.score != event.payload["session_score"]:
                raise CorruptLog(
                    f"{session_id}: replayed score {session.score} vs recorded "
                    f"{event.payload['session_score']}", offset=offset, path=path)
            current = None
        elif event.kind == "session_end":
            if session.score != event.payload["final_score"]:
                raise CorruptLog(
                    f"{session_id}: final score {session.score} vs recorded "
                    f"{event.payload['final_score']}", offset=offset, path=path)
        elif event.kind == "abandoned":
            abandoned = True

    last, path, offset = trace[-1]
    if last.kind not in TERMINAL_KINDS:
        raise CorruptLog(f"{session_id}: log ends without a terminal event",
                         offset=offset, path=path)
    return ReplayedSession(session=session, with_bot=with_bot, abandoned=abandoned)


def _safe_name(name: str) -> str:
    return _UNSAFE_PATH.sub("_", name)


def collect_bubble_maps(log: EventLog, include_bots: bool = False,
                        include_abandoned: bool = False) -> list[tuple[BubbleMap, str]]:
    """Replay every session and rasterize each completed round.

    Returns (map, outcome) tuples; pair_id is the session_id. Bot and
    abandoned sessions are excluded unless asked for.
    """
    out: list[tuple[BubbleMap, str]] = []
    for session_id in log.session_ids():
        replayed = replay(log, session_id)
        if replayed.with_bot and not include_bots:
            continue
        if replayed.abandoned and not include_abandoned:
            continue
        config = replayed.session.config
        dims = (config.image_height, config.image_width)
        for rnd in replayed.session.rounds:
            bm = rasterize_bubbles(rnd.bubbles, dims, config.bubble_size,
                                   image_id=rnd.image_id, pair_id=session_id)
            out.append((bm, rnd.outcome))
    return out


def export_bubble_maps(log: EventLog, out_dir: str | Path,
                       experiment: str = "default",
                       include_bots: bool = False,
                       include_abandoned: bool = False) -> Path:
    """Write one FIMAP grid per (pair, image) plus an index CSV.

    Layout: <out_dir>/<experiment>/<image_id>/<pair_id>.fimap and
    <out_dir>/<experiment>/index.csv with columns
    pair_id,image_id,bubble_count,outcome (sorted for determinism).
    """
    root = Path(out_dir) / _safe_name(experiment)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for bm, outcome in collect_bubble_maps(log, include_bots=include_bots,
                                           include_abandoned=include_abandoned):
        grid_path = root / _safe_name(bm.image_id) / f"{_safe_name(bm.pair_id)}.fimap"
        write_grid(bm.grid.astype(np.float64), grid_path)
        rows.append((bm.pair_id, bm.image_id, bm.total_bubbles, outcome))
    rows.sort()
    with (root / "index.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "image_id", "bubble_count", "outcome"])
        writer.writerows(rows)
    return root


def load_exported_maps(export_root: str | Path,
                       include_skipped: bool = False) -> list[BubbleMap]:
    """Read an export directory back into BubbleMaps via its index.

    Skipped rounds are excluded by default: their bubbles never sufficed
    for recognition, so the default analysis leaves them out.
    """
    export_root = Path(export_root)
    index = export_root / "index.csv"
    if not index.exists():
        raise StorageError(f"no index at {index}")
    out: list[BubbleMap] = []
    with index.open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["outcome"] == game.SKIPPED and not include_skipped:
                continue
            grid_path = (export_root / _safe_name(row["image_id"])
                         / f"{_safe_name(row['pair_id'])}.fimap")
            grid = read_grid(grid_path).astype(np.int64)
            out.append(BubbleMap(image_id=row["image_id"], pair_id=row["pair_id"],
                                 grid=grid, total_bubbles=int(row["bubble_count"])))
    return out
