// Wire codec: 4-byte big-endian length prefix + UTF-8 JSON body. Every
// WebSocket binary message carries exactly one complete frame, prefix
// included, so the bytes match the TCP transport.

export const MAX_FRAME_BYTES = 8 * 1024 * 1024;

export type Kind =
  | "join_lobby"
  | "paired"
  | "round_start"
  | "cursor_move"
  | "patch_revealed"
  | "guess_submit"
  | "guess_result"
  | "skip"
  | "score_update"
  | "activity_notice"
  | "round_end"
  | "game_end"
  | "leaderboard"
  | "error";

export const KINDS: ReadonlySet<string> = new Set<Kind>([
  "join_lobby", "paired", "round_start", "cursor_move", "patch_revealed",
  "guess_submit", "guess_result", "skip", "score_update", "activity_notice",
  "round_end", "game_end", "leaderboard", "error",
]);

export interface Envelope {
  kind: Kind;
  payload: Record<string, unknown>;
  seq: number;
  sent_at: number;
}

export class FrameError extends Error {
  constructor(public reason: string, detail = "") {
    super(detail ? `${reason}: ${detail}` : reason);
  }
}

const encoder = new TextEncoder();
const decoder = new TextDecoder("utf-8", { fatal: true });

export function encodeFrame(message: Envelope): Uint8Array {
  if (!KINDS.has(message.kind)) {
    throw new FrameError("unknown_kind", message.kind);
  }
  const body = encoder.encode(JSON.stringify({
    kind: message.kind,
    payload: message.payload,
    seq: message.seq,
    sent_at: message.sent_at,
  }));
  if (body.length > MAX_FRAME_BYTES) {
    throw new FrameError("frame_too_large", String(body.length));
  }
  const frame = new Uint8Array(4 + body.length);
  new DataView(frame.buffer).setUint32(0, body.length, false);
  frame.set(body, 4);
  return frame;
}

export function decodeFrame(data: Uint8Array): Envelope {
  if (data.length < 4) {
    throw new FrameError("truncated_frame", `${data.length} bytes`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const length = view.getUint32(0, false);
  if (length > MAX_FRAME_BYTES) {
    throw new FrameError("frame_too_large", String(length));
  }
  if (data.length - 4 !== length) {
    throw new FrameError("length_mismatch",
      `prefix ${length}, body ${data.length - 4}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(decoder.decode(data.subarray(4)));
  } catch (exc) {
    throw new FrameError("bad_json", String(exc));
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new FrameError("bad_json", "top level is not an object");
  }
  const record = raw as Record<string, unknown>;
  const { kind, payload, seq, sent_at } = record;
  if (typeof kind !== "string" || !KINDS.has(kind)) {
    throw new FrameError("unknown_kind", String(kind));
  }
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    throw new FrameError("bad_payload", "payload is not an object");
  }
  if (typeof seq !== "number" || typeof sent_at !== "number") {
    throw new FrameError("missing_envelope_key", "seq/sent_at");
  }
  return {
    kind: kind as Kind,
    payload: payload as Record<string, unknown>,
    seq,
    sent_at,
  };
}

/** Decode base64 into raw bytes; works in browsers and Node alike. */
export function base64ToBytes(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) {
    out[i] = bin.charCodeAt(i);
  }
  return out;
}
