"""
One round by hand: the cooperative reveal-and-guess rules
=========================================================

Drives the rules engine directly, with no server and no sockets, to
show what a round is: the teacher presses to place the first 18x18
bubble, the interval scheduler keeps placing neighbors while the press
is held, and the round ends when the student names the category.
"""

import numpy as np

from coguess.game import (
    GameConfig, ImageRecord, new_session, begin_round, cursor_update,
    bubble_tick, submit_guess, skip_round, finish_round, session_score,
)

rng = np.random.default_rng(0)

# A 2-round game on one small synthetic image. The config carries every
# rule knob: bubble size, the 50-300 ms interval window, the 9 px
# adjacency clamp, and the 100-point skip penalty.
config = GameConfig(image_width=120, image_height=90, rounds_per_game=2)
image = ImageRecord(image_id="img-demo", category="kettle",
                    accepted_labels=frozenset({"kettle", "tea kettle"}))

session = new_session("demo", "alice", "bob", ["img-demo", "img-demo"],
                      config, rng)
print(f"round 0 teacher: {session.teacher_for(0)}  student: {session.student_for(0)}")
print(f"round 1 teacher: {session.teacher_for(1)}  (roles alternate)\n")

# --- round 0: recognized -------------------------------------------------
rnd = begin_round(session, now=0.0)

# The first in-bounds press places bubble 0 immediately and arms the
# interval schedule.
bubble = cursor_update(rnd, config, "alice", x=40, y=30, now=1000.0, rng=rng)
print(f"press at (40, 30) -> bubble #{bubble.seq} at ({bubble.x}, {bubble.y})")

# While the press is held the engine places one bubble per elapsed
# interval. Each lands at the cursor but clamped to within 9 px
# (Chebyshev) of the previous bubble, so a fast drag leaves a connected
# trail. We drag toward the far corner and watch the clamp bite.
now, cx, cy = 1000.0, 40, 30
while len(rnd.bubbles) < 6:
    now += 10.0
    cx, cy = min(cx + 4, 119), min(cy + 3, 89)    # dragging quickly
    cursor_update(rnd, config, "alice", x=cx, y=cy, now=now, rng=rng)
    b = bubble_tick(rnd, config, now=now, rng=rng)
    if b is not None:
        prev = rnd.bubbles[-2]
        cheb = max(abs(b.x - prev.x), abs(b.y - prev.y))
        gap = b.placed_at - prev.placed_at
        print(f"  +{gap:5.0f} ms -> bubble #{b.seq} at ({b.x:3d}, {b.y:3d}), "
              f"cursor at ({cx:3d}, {cy:3d}), Chebyshev step {cheb}")

# A wrong guess costs nothing by itself; the round just continues.
verdict = submit_guess(rnd, image, "bob", "toaster")
print(f"\nbob guesses 'toaster': {verdict}")

# Matching is case- and whitespace-insensitive over the valid labels.
verdict = submit_guess(rnd, image, "bob", "  Tea   Kettle ")
print(f"bob guesses '  Tea   Kettle ': {verdict}")

cost = finish_round(session, rnd)
print(f"round 0 cost = bubbles used = {cost}\n")

# --- round 1: skipped ----------------------------------------------------
rnd = begin_round(session, now=60_000.0)
cursor_update(rnd, config, "bob", x=10, y=10, now=61_000.0, rng=rng)
skip_round(rnd, "alice")                      # the student gives up
cost = finish_round(session, rnd)
print(f"round 1 skipped after {len(rnd.bubbles)} bubble -> cost {cost} "
      f"(bubbles + 100 penalty)")

print(f"\nfinal team score (lower is better): {session_score(session)}")
