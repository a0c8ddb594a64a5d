// One socket, one reducer, arrival order. The client owns the only
// mutable state in the page: the current ViewState, replaced wholesale
// by reduce() on every socket event. User input goes straight out the
// wire; nothing is rendered optimistically, the server echo is the
// truth.

import { Envelope, Kind, decodeFrame, encodeFrame } from "./protocol.js";
import { ClientEvent, ViewState, initialState, reduce } from "./state.js";

export const CURSOR_RATE_PER_S = 60;

/** The subset of WebSocket both browsers and the `ws` package provide. */
export interface SocketLike {
  binaryType: string;
  send(data: Uint8Array): void;
  close(): void;
  addEventListener(type: "open", listener: () => void): void;
  addEventListener(type: "close", listener: () => void): void;
  addEventListener(type: "message", listener: (event: { data: unknown }) => void): void;
}

export interface ClientOptions {
  socket: SocketLike;
  playerId: string;
  /** Millisecond clock, injectable for tests. */
  now?: () => number;
  onChange?: (view: ViewState) => void;
}

export class GameClient {
  view: ViewState;
  private socket: SocketLike;
  private now: () => number;
  private onChange: (view: ViewState) => void;
  private lastCursorAt = -Infinity;
  private minCursorGap = 1000 / CURSOR_RATE_PER_S;

  constructor(options: ClientOptions) {
    this.socket = options.socket;
    this.now = options.now ?? (() => Date.now());
    this.onChange = options.onChange ?? (() => undefined);
    this.view = initialState(options.playerId);

    this.socket.binaryType = "arraybuffer";
    this.socket.addEventListener("open", () => {
      this.apply({ type: "connected", now: this.now() });
      this.sendMessage("join_lobby", { player_id: this.view.playerId });
    });
    this.socket.addEventListener("close", () => {
      this.apply({ type: "connection_lost", now: this.now() });
    });
    this.socket.addEventListener("message", (event) => {
      this.apply({
        type: "message",
        message: decodeFrame(toBytes(event.data)),
        now: this.now(),
      });
    });
  }

  private apply(event: ClientEvent): void {
    const next = reduce(this.view, event);
    if (next !== this.view) {
      this.view = next;
      this.onChange(next);
    }
  }

  /** Expire the outline flash; call from the animation loop. */
  tick(): void {
    this.apply({ type: "tick", now: this.now() });
  }

  private sendMessage(kind: Kind, payload: Record<string, unknown>): void {
    if (this.view.connection !== "open" && kind !== "join_lobby") {
      return; // input is disabled while disconnected
    }
    const message: Envelope = { kind, payload, seq: 0, sent_at: this.now() };
    this.socket.send(encodeFrame(message));
  }

  /**
   * Stream the teacher's press-and-drag position, throttled to the
   * server's 60/s acceptance rate so no update is wasted.
   */
  moveCursor(x: number, y: number): void {
    if (this.view.phase !== "playing_teacher") {
      return;
    }
    const at = this.now();
    if (at - this.lastCursorAt < this.minCursorGap) {
      return;
    }
    this.lastCursorAt = at;
    this.sendMessage("cursor_move", { x, y });
  }

  guess(text: string): void {
    if (this.view.phase === "playing_student" && text.trim().length > 0) {
      this.sendMessage("guess_submit", { text });
    }
  }

  skip(): void {
    if (this.view.phase === "playing_student") {
      this.sendMessage("skip", {});
    }
  }

  typing(): void {
    if (this.view.phase === "playing_student") {
      this.sendMessage("activity_notice", { actor: "student", activity: "typing" });
    }
  }

  close(): void {
    this.socket.close();
  }
}

function toBytes(data: unknown): Uint8Array {
  if (data instanceof Uint8Array) {
    return data;
  }
  if (data instanceof ArrayBuffer) {
    return new Uint8Array(data);
  }
  throw new Error(`expected binary frame, got ${typeof data}`);
}
