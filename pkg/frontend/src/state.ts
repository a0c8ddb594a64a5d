// Client view state as a pure function of the inbound message history.
// The reducer never touches the network or the DOM: feeding the same
// sequence of events into reduce() always yields the same state, which
// is what makes the UI replayable in tests.

import { Envelope } from "./protocol.js";

export type Phase =
  | "lobby"
  | "waiting"
  | "playing_teacher"
  | "playing_student"
  | "round_transition"
  | "game_over";

export type Flash = "none" | "red" | "green";
export type Role = "teacher" | "student";

export const GREEN_FLASH_MS = 800;
export const RED_FLASH_MS = 500;

export interface Patch {
  x: number;
  y: number;
  w: number;
  h: number;
  seq: number;
  data: string; // base64 RGB, w*h*3 bytes
}

export interface BubbleBox {
  x: number;
  y: number;
  w: number;
  h: number;
  seq: number;
}

export interface LeaderboardRow {
  team: string;
  score: number;
  completed_at: number;
}

export interface ViewState {
  phase: Phase;
  connection: "connecting" | "open" | "lost";
  playerId: string;
  sessionId: string | null;
  partner: string | null;
  withBot: boolean;
  roundIndex: number;
  role: Role | null;
  width: number;
  height: number;
  /** Teacher only: the full image arrives in its round_start. */
  imageId: string | null;
  image: string | null;
  /** Student only: every pixel the client may draw came from one of these. */
  patches: Patch[];
  /** Teacher overlay: exactly one box per confirmed bubble. */
  bubbles: BubbleBox[];
  score: number;
  roundBubbles: number;
  partnerActivity: string | null;
  lastGuess: { text: string; verdict: string } | null;
  lastOutcome: string | null;
  flash: Flash;
  flashUntil: number;
  leaderboard: LeaderboardRow[];
  finalScore: number | null;
  roundsPlayed: number | null;
  abandoned: boolean;
  lastError: string | null;
  lastSeq: number;
}

export type ClientEvent =
  | { type: "connected"; now: number }
  | { type: "connection_lost"; now: number }
  | { type: "message"; message: Envelope; now: number }
  | { type: "tick"; now: number };

export function initialState(playerId: string): ViewState {
  return {
    phase: "lobby",
    connection: "connecting",
    playerId,
    sessionId: null,
    partner: null,
    withBot: false,
    roundIndex: -1,
    role: null,
    width: 0,
    height: 0,
    imageId: null,
    image: null,
    patches: [],
    bubbles: [],
    score: 0,
    roundBubbles: 0,
    partnerActivity: null,
    lastGuess: null,
    lastOutcome: null,
    flash: "none",
    flashUntil: 0,
    leaderboard: [],
    finalScore: null,
    roundsPlayed: null,
    abandoned: false,
    lastError: null,
    lastSeq: -1,
  };
}

export function reduce(state: ViewState, event: ClientEvent): ViewState {
  switch (event.type) {
    case "connected":
      // A fresh connection restarts the server's outbound counter.
      return { ...state, connection: "open", phase: "waiting", lastSeq: -1 };
    case "connection_lost":
      return { ...state, connection: "lost", partnerActivity: null };
    case "tick":
      if (state.flash !== "none" && event.now >= state.flashUntil) {
        return { ...state, flash: "none", flashUntil: 0 };
      }
      return state;
    case "message":
      return applyMessage(state, event.message, event.now);
  }
}

function applyMessage(state: ViewState, m: Envelope, now: number): ViewState {
  if (m.seq <= state.lastSeq) {
    return state; // stale or duplicate frame
  }
  const s: ViewState = { ...state, lastSeq: m.seq };
  switch (m.kind) {
    case "paired":
      return {
        ...s,
        sessionId: m.payload["session_id"] as string,
        partner: m.payload["partner"] as string,
        withBot: Boolean(m.payload["with_bot"]),
      };
    case "round_start": {
      const role = m.payload["role"] as Role;
      return {
        ...s,
        phase: role === "teacher" ? "playing_teacher" : "playing_student",
        role,
        roundIndex: m.payload["round_index"] as number,
        width: m.payload["width"] as number,
        height: m.payload["height"] as number,
        imageId: (m.payload["image_id"] as string | undefined) ?? null,
        image: (m.payload["image"] as string | undefined) ?? null,
        patches: [],
        bubbles: [],
        roundBubbles: 0,
        partnerActivity: null,
        lastGuess: null,
        lastOutcome: null,
        flash: "none",
        flashUntil: 0,
      };
    }
    case "patch_revealed": {
      const patch: Patch = {
        x: m.payload["x"] as number,
        y: m.payload["y"] as number,
        w: m.payload["w"] as number,
        h: m.payload["h"] as number,
        seq: m.payload["seq"] as number,
        data: m.payload["data"] as string,
      };
      return { ...s, patches: [...s.patches, patch] };
    }
    case "score_update": {
      const next: ViewState = {
        ...s,
        score: m.payload["session_score"] as number,
        roundBubbles: m.payload["round_bubbles"] as number,
      };
      // The extent rides along so the teacher can paint the confirmed
      // box; one box per bubble, keyed by its sequence number.
      const seq = m.payload["seq"] as number | undefined;
      if (seq !== undefined && !s.bubbles.some((b) => b.seq === seq)) {
        next.bubbles = [...s.bubbles, {
          x: m.payload["x"] as number,
          y: m.payload["y"] as number,
          w: m.payload["w"] as number,
          h: m.payload["h"] as number,
          seq,
        }];
      }
      return next;
    }
    case "guess_result": {
      const verdict = m.payload["verdict"] as string;
      return {
        ...s,
        lastGuess: { text: m.payload["text"] as string, verdict },
        flash: verdict === "correct" ? "green" : "red",
        flashUntil: now + (verdict === "correct" ? GREEN_FLASH_MS : RED_FLASH_MS),
      };
    }
    case "activity_notice":
      return { ...s, partnerActivity: m.payload["activity"] as string };
    case "round_end":
      return {
        ...s,
        phase: "round_transition",
        lastOutcome: m.payload["outcome"] as string,
        score: m.payload["session_score"] as number,
      };
    case "game_end":
      return {
        ...s,
        phase: "game_over",
        finalScore: m.payload["final_score"] as number,
        roundsPlayed: m.payload["rounds_played"] as number,
        score: m.payload["final_score"] as number,
      };
    case "leaderboard":
      return { ...s, leaderboard: m.payload["entries"] as LeaderboardRow[] };
    case "error":
      return applyError(s, m.payload);
    default:
      // Server-bound kinds never arrive; ignore rather than crash.
      return s;
  }
}

function applyError(s: ViewState, payload: Record<string, unknown>): ViewState {
  const code = payload["code"] as string;
  switch (code) {
    case "partner_disconnected":
      return { ...s, partnerActivity: "disconnected" };
    case "partner_rejoined":
      return { ...s, partnerActivity: null };
    case "session_abandoned":
      return {
        ...s,
        phase: "game_over",
        abandoned: true,
        lastError: String(payload["reason"] ?? code),
      };
    default:
      return { ...s, lastError: String(payload["reason"] ?? code) };
  }
}
