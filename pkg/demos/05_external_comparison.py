"""
Comparing importance maps against external heatmaps
===================================================

Given per-image importance maps from recorded play, how well does an
externally produced spatial map (a model attribution map, a saliency
prediction, fixation density) explain where the mass went? The metric
is the rank correlation per image, averaged, and its significance is
judged against the population's own split-half distribution: an
external source is only as good as the agreement between two random
halves of the players themselves.
"""

import numpy as np

from coguess.bots import simulate_population
from coguess.maps import (
    ExternalHeatmap, aggregate_importance, rasterize_bubbles, resample_grid,
)
from coguess.scenarios import hotspot_population
from coguess.stats import (
    compare_to_external, permutation_p, split_half_consistency,
)

manifest, teachers, students, config = hotspot_population(
    n_images=6, dims=(80, 80))
sessions = simulate_population(manifest, 16, teachers, students,
                               seed=11, config=config)

by_image: dict[str, list] = {}
maps = []
for s in sessions:
    for rnd in s.rounds:
        if rnd.outcome != "recognized":
            continue
        bm = rasterize_bubbles(rnd.bubbles,
                               (config.image_height, config.image_width),
                               config.bubble_size, image_id=rnd.image_id,
                               pair_id=s.session_id)
        maps.append(bm)
        by_image.setdefault(rnd.image_id, []).append(bm)

importance = {i: aggregate_importance(v) for i, v in sorted(by_image.items())}
categories = {i: manifest[i].category for i in manifest}

# The yardstick: how consistent is the population with itself?
split = split_half_consistency(maps, n_iterations=1000, seed=0)
print(f"population self-consistency: mean split-half rho "
      f"{split.mean_rho:+.3f}\n")

rng = np.random.default_rng(5)

# Candidate A: the mean map of half the pairs, passed off as an
# "external" source. It knows exactly what the population looks at, so
# it should land inside the split-half distribution (large p: not
# distinguishable from another half of the players).
half_ids = {s.session_id for s in sessions[:8]}
own = {i: ExternalHeatmap(image_id=i, source="other",
                          grid=aggregate_importance(
                              [m for m in v if m.pair_id in half_ids]).grid)
       for i, v in by_image.items()}

# Candidate B: uniform noise at a foreign resolution (the compare
# pipeline block-mean resamples it down). It knows nothing, so it
# should fall below every split-half draw (tiny p).
noise = {i: ExternalHeatmap(image_id=i, source="bottom_up_saliency",
                            grid=rng.uniform(size=(480, 640)))
         for i in importance}

for label, heatmaps in [("half the players", own), ("uniform noise", noise)]:
    result = compare_to_external(importance, heatmaps, categories)
    p = permutation_p(split, result.overall_mean_rho)
    print(f"{label:>18}: mean rho {result.overall_mean_rho:+.3f}   "
          f"permutation p = {p:.4g}")

print("\na small p means the source falls short of the population's own"
      "\nconsistency: the split-half rho is the ceiling any external"
      "\nsource is judged against.")
