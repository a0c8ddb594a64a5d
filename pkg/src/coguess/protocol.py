"""Wire protocol: message schema and byte-exact framing.

Every message travels as one frame: a 4-byte big-endian length prefix
followed by that many bytes of UTF-8 JSON with exactly the keys
``kind``, ``seq``, ``sent_at``, ``payload``. The same frame bytes are
carried over raw TCP (stream, reassembled by :class:`FrameReader`) and
over WebSocket (one binary message per frame).

The kind set is closed; decoding rejects unknown kinds and payloads
missing a kind's required fields. Extra payload fields are allowed so
the schema can grow without breaking old clients.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

MAX_FRAME_BYTES = 8 * 1024 * 1024

_PREFIX = struct.Struct(">I")

KINDS = frozenset({
    "join_lobby",
    "paired",
    "round_start",
    "cursor_move",
    "patch_revealed",
    "guess_submit",
    "guess_result",
    "skip",
    "score_update",
    "activity_notice",
    "round_end",
    "game_end",
    "leaderboard",
    "error",
})

ACTIVITIES = frozenset({"bubbling", "typing", "correct", "incorrect", "considering"})

ACTORS = frozenset({"teacher", "student"})

# Required payload fields per kind; extras are permitted.
REQUIRED_FIELDS: dict[str, tuple[str, ...]] = {
    "join_lobby": ("player_id",),
    "paired": ("session_id", "partner", "with_bot"),
    "round_start": ("round_index", "role", "width", "height"),
    "cursor_move": ("x", "y"),
    "patch_revealed": ("x", "y", "w", "h", "seq", "data"),
    "guess_submit": ("text",),
    "guess_result": ("text", "verdict"),
    "skip": (),
    "score_update": ("session_score", "round_bubbles"),
    "activity_notice": ("actor", "activity"),
    "round_end": ("round_index", "outcome", "bubbles_used", "session_score"),
    "game_end": ("final_score", "rounds_played"),
    "leaderboard": ("entries",),
    "error": ("code", "reason"),
}


class MalformedMessage(Exception):
    """Bytes that do not decode to a valid message; `reason` is a stable
    machine-readable code."""

    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class Message:
    kind: str
    payload: dict = field(default_factory=dict)
    seq: int = 0
    sent_at: float = 0.0


def _validate(m: Message) -> None:
    if m.kind not in KINDS:
        raise MalformedMessage("unknown_kind", m.kind)
    missing = [f for f in REQUIRED_FIELDS[m.kind] if f not in m.payload]
    if missing:
        raise MalformedMessage("missing_field", f"{m.kind}: {', '.join(missing)}")
    if m.kind == "activity_notice":
        if m.payload["activity"] not in ACTIVITIES:
            raise MalformedMessage("bad_activity", str(m.payload["activity"]))
        if m.payload["actor"] not in ACTORS:
            raise MalformedMessage("bad_actor", str(m.payload["actor"]))


def encode_message(m: Message) -> bytes:
    """Serialize a message to its full frame, length prefix included."""
    _validate(m)
    body = json.dumps(
        {"kind": m.kind, "seq": m.seq, "sent_at": m.sent_at, "payload": m.payload},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise MalformedMessage("frame_too_large", str(len(body)))
    return _PREFIX.pack(len(body)) + body


def decode_body(body: bytes) -> Message:
    """Decode an unprefixed frame body (a single WebSocket binary message)."""
    try:
        raw = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMessage("bad_json", str(exc)) from exc
    if not isinstance(raw, dict):
        raise MalformedMessage("bad_json", "top level is not an object")
    try:
        kind = raw["kind"]
        seq = raw["seq"]
        sent_at = raw["sent_at"]
        payload = raw["payload"]
    except KeyError as exc:
        raise MalformedMessage("missing_envelope_key", str(exc)) from exc
    if not isinstance(payload, dict):
        raise MalformedMessage("bad_payload", "payload is not an object")
    m = Message(kind=kind, payload=payload, seq=int(seq), sent_at=float(sent_at))
    _validate(m)
    return m


def decode_message(data: bytes) -> Message:
    """Decode one complete prefixed frame."""
    if len(data) < _PREFIX.size:
        raise MalformedMessage("truncated_frame", f"{len(data)} bytes")
    (length,) = _PREFIX.unpack_from(data)
    if length > MAX_FRAME_BYTES:
        raise MalformedMessage("frame_too_large", str(length))
    body = data[_PREFIX.size:]
    if len(body) != length:
        raise MalformedMessage("length_mismatch", f"prefix {length}, body {len(body)}")
    return decode_body(body)


class FrameReader:
    """Incremental reassembly of prefixed frames from a byte stream."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        """Absorb stream bytes; return the bodies of all frames completed."""
        self._buf.extend(data)
        bodies: list[bytes] = []
        while True:
            if len(self._buf) < _PREFIX.size:
                return bodies
            (length,) = _PREFIX.unpack_from(self._buf)
            if length > MAX_FRAME_BYTES:
                raise MalformedMessage("frame_too_large", str(length))
            end = _PREFIX.size + length
            if len(self._buf) < end:
                return bodies
            bodies.append(bytes(self._buf[_PREFIX.size:end]))
            del self._buf[:end]
