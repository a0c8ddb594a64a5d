// Browser entry point: builds the page around one GameClient and one
// canvas. The server address and player name come from page parameters,
// e.g.  index.html?server=ws://127.0.0.1:4201&player=alice

import { GameClient, SocketLike } from "./client.js";
import { render } from "./render.js";
import { ViewState } from "./state.js";
import { CanvasSurface } from "./surface.js";

const params = new URLSearchParams(window.location.search);
const serverUrl = params.get("server") ?? "ws://127.0.0.1:4201";
const playerId = params.get("player") ?? `player-${Math.floor(Math.random() * 1e6)}`;

const canvas = document.getElementById("board") as HTMLCanvasElement;
const status = document.getElementById("status") as HTMLElement;
const activity = document.getElementById("activity") as HTMLElement;
const scoreEl = document.getElementById("score") as HTMLElement;
const banner = document.getElementById("banner") as HTMLElement;
const guessForm = document.getElementById("guess-form") as HTMLFormElement;
const guessInput = document.getElementById("guess") as HTMLInputElement;
const skipButton = document.getElementById("skip") as HTMLButtonElement;
const boardList = document.getElementById("leaderboard") as HTMLElement;

// The DOM and `ws` WebSocket types disagree on send() overloads; both
// accept the binary frames we send, so the boundary narrows to
// SocketLike here.
const client = new GameClient({
  socket: new WebSocket(serverUrl) as unknown as SocketLike,
  playerId,
  onChange: sync,
});

let surface: CanvasSurface | null = null;

function sync(view: ViewState): void {
  if (canvas.width !== view.width || canvas.height !== view.height) {
    canvas.width = Math.max(view.width, 1);
    canvas.height = Math.max(view.height, 1);
    surface = null;
  }
  status.textContent = describe(view);
  scoreEl.textContent = `score ${view.score} (lower is better)`;
  activity.textContent = view.partnerActivity
    ? `partner is ${view.partnerActivity}` : "";
  banner.hidden = view.connection !== "lost";
  const guessing = view.phase === "playing_student" && view.connection === "open";
  guessInput.disabled = !guessing;
  skipButton.disabled = !guessing;
  boardList.innerHTML = "";
  for (const row of view.leaderboard) {
    const item = document.createElement("li");
    item.textContent = `${row.team}: ${row.score}`;
    boardList.appendChild(item);
  }
}

function describe(view: ViewState): string {
  switch (view.phase) {
    case "lobby": return "connecting...";
    case "waiting": return "waiting for a partner (a bot joins after 2 min)";
    case "playing_teacher":
      return `round ${view.roundIndex + 1}: you teach - press and drag to reveal`;
    case "playing_student":
      return `round ${view.roundIndex + 1}: you guess - name the object`;
    case "round_transition":
      return `round over: ${view.lastOutcome}`;
    case "game_over":
      return view.abandoned
        ? "session abandoned"
        : `game over - final score ${view.finalScore}`;
  }
}

// Teacher input: press-and-drag streams the cursor (throttled inside
// the client); releasing simply stops the stream.
let pressed = false;
canvas.addEventListener("mousedown", (e) => {
  pressed = true;
  client.moveCursor(offsetX(e), offsetY(e));
});
canvas.addEventListener("mousemove", (e) => {
  if (pressed) {
    client.moveCursor(offsetX(e), offsetY(e));
  }
});
window.addEventListener("mouseup", () => {
  pressed = false;
});

function offsetX(e: MouseEvent): number {
  const rect = canvas.getBoundingClientRect();
  return Math.floor((e.clientX - rect.left) * (canvas.width / rect.width));
}

function offsetY(e: MouseEvent): number {
  const rect = canvas.getBoundingClientRect();
  return Math.floor((e.clientY - rect.top) * (canvas.height / rect.height));
}

// Student input: guesses, typing notices, skip.
guessForm.addEventListener("submit", (e) => {
  e.preventDefault();
  client.guess(guessInput.value);
  guessInput.value = "";
});
guessInput.addEventListener("input", () => client.typing());
skipButton.addEventListener("click", () => client.skip());

function frame(): void {
  client.tick();
  const ctx = canvas.getContext("2d");
  if (ctx !== null) {
    if (surface === null) {
      surface = new CanvasSurface(ctx);
    }
    render(client.view, surface);
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
