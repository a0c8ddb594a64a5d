"""
A live round over TCP, message by message
=========================================

Starts the real server on ephemeral ports, connects two socket clients,
and plays one full round: join, pair, teach, reveal, guess, score. The
printout annotates the asymmetry that makes the game work: the teacher
receives the full image at round start, while the student receives
pixels only inside patch_revealed frames.
"""

import asyncio
import base64

from coguess.game import GameConfig
from coguess.protocol import FrameReader, Message, decode_body, encode_message
from coguess.scenarios import synthetic_manifest
from coguess.server import GameServer, SessionHub


class Client:
    """Minimal frame-speaking TCP client with a receive log."""

    def __init__(self, name, reader, writer):
        self.name = name
        self.reader = reader
        self.writer = writer
        self.received = []
        self.frames = FrameReader()
        self._task = asyncio.create_task(self._pump())

    async def _pump(self):
        try:
            while True:
                chunk = await self.reader.read(65536)
                if not chunk:
                    return
                for body in self.frames.feed(chunk):
                    self.received.append(decode_body(body))
        except (ConnectionError, asyncio.CancelledError):
            pass

    async def send(self, kind, **payload):
        self.writer.write(encode_message(Message(kind=kind, payload=payload)))
        await self.writer.drain()

    async def wait(self, kind):
        while not any(m.kind == kind for m in self.received):
            await asyncio.sleep(0.005)
        return next(m for m in self.received if m.kind == kind)

    async def close(self):
        self._task.cancel()
        self.writer.close()


async def main():
    manifest = synthetic_manifest(3)
    config = GameConfig(image_width=60, image_height=60, rounds_per_game=1,
                        min_interval=50.0, max_interval=120.0)
    hub = SessionHub(manifest, config, seed=1)
    server = GameServer(hub, tick_ms=5.0)
    tcp_port, ws_port = await server.start()
    print(f"server up: tcp :{tcp_port}  websocket :{ws_port}\n")

    async def connect(name):
        reader, writer = await asyncio.open_connection("127.0.0.1", tcp_port)
        return Client(name, reader, writer)

    alice, bob = await connect("alice"), await connect("bob")
    await alice.send("join_lobby", player_id="alice")
    await bob.send("join_lobby", player_id="bob")

    paired = await alice.wait("paired")
    print(f"paired: session {paired.payload['session_id']}, "
          f"alice's partner is {paired.payload['partner']}")

    start_a = await alice.wait("round_start")
    start_b = await bob.wait("round_start")
    teacher, student = (alice, bob) if start_a.payload["role"] == "teacher" \
        else (bob, alice)
    t_start = start_a if teacher is alice else start_b
    s_start = start_b if teacher is alice else start_a

    image_bytes = len(base64.b64decode(t_start.payload["image"]))
    print(f"\n{teacher.name} is the teacher: round_start carries "
          f"image {t_start.payload['image_id']} ({image_bytes} RGB bytes)")
    print(f"{student.name} is the student: round_start carries only "
          f"{sorted(s_start.payload)} - no pixels, no image identity")

    # The teacher presses, then drags; the interval scheduler streams a
    # bubble every 50-120 ms at the (adjacency-clamped) cursor until the
    # student has three patches.
    targets = [(30, 30), (39, 38), (48, 46)]
    await teacher.send("cursor_move", x=30, y=30)
    seen = 0
    while seen < 3:
        count = sum(m.kind == "patch_revealed" for m in student.received)
        if count > seen:
            seen = count
            if seen < 3:
                x, y = targets[seen]
                await teacher.send("cursor_move", x=x, y=y)
        await asyncio.sleep(0.01)

    print(f"\n{student.name}'s first three patches:")
    for m in [m for m in student.received if m.kind == "patch_revealed"][:3]:
        p = m.payload
        print(f"  bubble #{p['seq']}: {p['w']}x{p['h']} block at "
              f"({p['x']}, {p['y']}), {len(base64.b64decode(p['data']))} bytes")

    # Guess the right category (the hub tracks the hidden image for us
    # here; a human would be squinting at the patches instead).
    live = next(iter(hub._games.values()))
    category = manifest[live.session.image_sequence[0]].category
    await student.send("guess_submit", text="toaster")
    verdict = await student.wait("guess_result")
    print(f"\n{student.name} guesses 'toaster': {verdict.payload['verdict']}")

    await student.send("guess_submit", text=category)
    end = await alice.wait("game_end")
    print(f"{student.name} guesses '{category}': correct - game over, "
          f"final score {end.payload['final_score']} "
          f"({end.payload['rounds_played']} round)")

    board = await alice.wait("leaderboard")
    for entry in board.payload["entries"]:
        print(f"leaderboard: {entry['team']} with {entry['score']}")

    await alice.close()
    await bob.close()
    await server.stop()


asyncio.run(main())
