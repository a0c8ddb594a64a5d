"""
Split-half consistency and the efficiency median split
======================================================

Two questions about a population of recorded games:

1. Do independent halves of the pool produce the same importance maps?
   (split-half consistency: correlate mean maps of random halves)
2. Do pairs that recognize with fewer bubbles produce sharper, more
   consistent maps? (median split on bubble count per image)

Bot populations with known ground truth make the expected answers
checkable: hotspot-sharers should agree across halves, wanderers
should not, and a mixed population should split cleanly.
"""

import time

from coguess.bots import simulate_population
from coguess.maps import rasterize_bubbles
from coguess.scenarios import (
    hotspot_population, mixed_population, uniform_population,
)
from coguess.stats import median_split_efficiency, split_half_consistency


def bubble_maps(population, n_pairs, seed):
    manifest, teachers, students, config = population
    sessions = simulate_population(manifest, n_pairs, teachers, students,
                                   seed=seed, config=config)
    maps = []
    for s in sessions:
        for rnd in s.rounds:
            maps.append(rasterize_bubbles(
                rnd.bubbles, (config.image_height, config.image_width),
                config.bubble_size, image_id=rnd.image_id,
                pair_id=s.session_id))
    return maps


# --- split-half: consistent vs inconsistent populations ------------------
t0 = time.perf_counter()
for label, population in [
    ("hotspot-sharing", hotspot_population(n_images=6, dims=(80, 80))),
    ("independent walk", uniform_population(n_images=6, dims=(80, 80))),
]:
    maps = bubble_maps(population, n_pairs=16, seed=3)
    result = split_half_consistency(maps, n_iterations=500, seed=0)
    print(f"{label:>16}: mean split-half rho = {result.mean_rho:+.3f} "
          f"over {result.n_iterations} random halvings")
print(f"({time.perf_counter() - t0:.1f}s)\n")

# --- median split: efficient vs inefficient pairs ------------------------
# Half the pairs share tight hotspots and recognize fast; half wander
# and recognize late. Splitting each image's pairs at the median bubble
# count should recover the two kinds.
maps = bubble_maps(mixed_population(16, dims=(80, 80)), n_pairs=16, seed=4)
ms = median_split_efficiency(maps, n_iterations=300, seed=0)

print(f"median split over {ms.n_images} images:")
print(f"  kurtosis    efficient {ms.kurtosis_efficient:7.2f}   "
      f"inefficient {ms.kurtosis_inefficient:7.2f}")
print(f"  split-half  efficient {ms.split_half_efficient.mean_rho:+7.3f}   "
      f"inefficient {ms.split_half_inefficient.mean_rho:+7.3f}")
print("\nefficient pairs concentrate on less of the image (higher "
      "kurtosis)\nand agree more with each other (higher split-half rho).")
