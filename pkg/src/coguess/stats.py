"""Statistical battery for importance-map analysis.

Rank correlation with tie correction, distribution shape (kurtosis,
KS normality), two-sample t-tests, split-half reliability of the
participant pool, median-split efficiency grouping, and comparison of
importance maps against externally supplied heatmaps with permutation
significance.

All kernels are implemented here directly on numpy and the stdlib so
every numeric step is auditable; the test suite checks them against
independent high-precision references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from coguess.maps import (
    DimensionMismatch,
    ImportanceMap,
    aggregate_importance,
    resample_grid,
)

KS_ALPHA_COEFF = 1.358          # asymptotic critical coefficient at alpha = 0.05


class StatsError(Exception):
    pass


class LengthMismatch(StatsError):
    pass


class DegenerateInput(StatsError):
    """A constant-valued side makes rank correlation undefined."""


class ZeroVariance(StatsError):
    pass


class TooFewValues(StatsError):
    pass


class TooFewPairs(StatsError):
    pass


class MissingHeatmap(StatsError):
    pass


@dataclass
class SplitHalfResult:
    """Per-iteration correlations between random half-pool mean maps."""

    scores: np.ndarray
    mean_rho: float
    n_iterations: int
    seed: int
    n_degenerate: int = 0


@dataclass
class MedianSplitResult:
    efficient_maps: dict[str, ImportanceMap]
    inefficient_maps: dict[str, ImportanceMap]
    kurtosis_efficient: float
    kurtosis_inefficient: float
    split_half_efficient: SplitHalfResult
    split_half_inefficient: SplitHalfResult
    n_images: int


@dataclass
class ComparisonResult:
    source: str
    per_image: dict[str, float]
    per_category: dict[str, float]
    overall_mean_rho: float
    n_excluded: int
    permutation_p: float | None = None


def _as_flat(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr.ravel()


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the mean of their span."""
    order = np.argsort(values, kind="stable")
    ordered = values[order]
    run_start = np.empty(len(values), dtype=bool)
    run_start[0] = True
    np.not_equal(ordered[1:], ordered[:-1], out=run_start[1:])
    run_id = np.cumsum(run_start) - 1
    counts = np.bincount(run_id)
    ends = np.cumsum(counts)                       # last 1-based rank in each run
    mean_rank = (ends - counts + 1 + ends) / 2.0
    ranks = np.empty(len(values), dtype=np.float64)
    ranks[order] = mean_rank[run_id]
    return ranks


def spearman(x, y) -> float:
    """Rank-order correlation: Pearson on average-fractional ranks.

    Grids are compared by row-major flattening. Ties share their rank
    span's mean, so heavily tied inputs (mostly-zero maps) are handled
    correctly; the classic 6*sum(d^2) shortcut is not valid under ties.
    """
    xf = _as_flat(x)
    yf = _as_flat(y)
    if len(xf) != len(yf):
        raise LengthMismatch(f"{len(xf)} vs {len(yf)} values")
    if len(xf) < 2:
        raise LengthMismatch("need at least 2 values")
    if np.all(xf == xf[0]) or np.all(yf == yf[0]):
        raise DegenerateInput("constant input has no rank ordering")
    rx = average_ranks(xf)
    ry = average_ranks(yf)
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))
    return min(1.0, max(-1.0, rho))


def kurtosis(values) -> float:
    """Population (non-excess) Pearson kurtosis m4 / m2^2; normal = 3."""
    flat = _as_flat(values)
    if len(flat) < 4:
        raise TooFewValues("kurtosis needs at least 4 values")
    centered = flat - flat.mean()
    m2 = float(np.mean(centered ** 2))
    if m2 == 0.0:
        raise ZeroVariance("constant input")
    m4 = float(np.mean(centered ** 4))
    return m4 / (m2 * m2)


def normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def ks_normality(values) -> tuple[float, bool]:
    """One-sample KS statistic against N(sample mean, sample sd).

    Returns (D, reject) with reject = D > 1.358 / sqrt(n), the asymptotic
    alpha = 0.05 critical value. Parameters are estimated from the sample,
    which makes the test anti-conservative; it is used as a coarse screen.
    """
    flat = _as_flat(values)
    n = len(flat)
    if n < 8:
        raise TooFewValues(f"KS screen needs >= 8 values, got {n}")
    sd = float(flat.std(ddof=1))
    if sd == 0.0:
        raise ZeroVariance("constant input")
    z = np.sort((flat - flat.mean()) / sd)
    cdf = 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))
    steps = np.arange(1, n + 1) / n
    d_plus = float(np.max(steps - cdf))
    d_minus = float(np.max(cdf - (steps - 1.0 / n)))
    d = max(d_plus, d_minus)
    return d, d > KS_ALPHA_COEFF / math.sqrt(n)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz method)."""
    max_iter, eps, tiny = 300, 3e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via the continued fraction, switched at the symmetry point."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_test_ind(a, b) -> tuple[float, float]:
    """Two-sample Student t with pooled variance; two-tailed p.

    Zero pooled variance is a saturated case: equal means report (0, 1),
    unequal means report (+-inf, 0).
    """
    av = _as_flat(a)
    bv = _as_flat(b)
    if len(av) < 2 or len(bv) < 2:
        raise TooFewValues("each sample needs at least 2 values")
    n1, n2 = len(av), len(bv)
    df = n1 + n2 - 2
    mean_diff = float(av.mean() - bv.mean())
    ss = float(((av - av.mean()) ** 2).sum() + ((bv - bv.mean()) ** 2).sum())
    pooled = ss / df
    if pooled == 0.0:
        if mean_diff == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean_diff), 0.0
    t = mean_diff / math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return t, min(1.0, max(0.0, p))


def _group_maps_by_image(bubble_maps) -> dict[str, dict[str, np.ndarray]]:
    by_image: dict[str, dict[str, np.ndarray]] = {}
    for bm in bubble_maps:
        per_pair = by_image.setdefault(bm.image_id, {})
        if bm.pair_id in per_pair:
            raise StatsError(f"duplicate map for ({bm.pair_id}, {bm.image_id})")
        per_pair[bm.pair_id] = np.asarray(bm.grid, dtype=np.float64).ravel()
    return by_image


def split_half_consistency(bubble_maps, n_iterations: int = 1000,
                           seed: int = 0) -> SplitHalfResult:
    """Reliability of the participant pool by repeated random halving.

    Each iteration partitions pairs into two groups of size floor(n/2) and
    ceil(n/2); for every image with a contributor in both groups the two
    group mean maps are rank-correlated; the iteration's score is the mean
    over such images. Iteration randomness comes from counter-derived
    sub-seeds so execution order cannot matter.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    by_image = _group_maps_by_image(bubble_maps)
    all_pairs = sorted({p for per_pair in by_image.values() for p in per_pair})
    n = len(all_pairs)
    if n < 2:
        raise TooFewPairs(f"split-half needs >= 2 pairs, got {n}")
    pair_index = {p: i for i, p in enumerate(all_pairs)}
    # per image: contributing pair indices + stacked row-per-pair matrix
    stacked = []
    for image_id in sorted(by_image):
        per_pair = by_image[image_id]
        idx = np.array([pair_index[p] for p in sorted(per_pair)], dtype=np.intp)
        mat = np.stack([per_pair[p] for p in sorted(per_pair)])
        stacked.append((idx, mat))
    half = n // 2
    scores = np.empty(n_iterations, dtype=np.float64)
    n_degenerate = 0
    for i in range(n_iterations):
        rng = np.random.default_rng([seed, i])
        perm = rng.permutation(n)
        in_group_a = np.zeros(n, dtype=bool)
        in_group_a[perm[:half]] = True
        rhos = []
        for idx, mat in stacked:
            mask_a = in_group_a[idx]
            if not mask_a.any() or mask_a.all():
                continue
            mean_a = mat[mask_a].mean(axis=0)
            mean_b = mat[~mask_a].mean(axis=0)
            try:
                rhos.append(spearman(mean_a, mean_b))
            except DegenerateInput:
                continue
        if rhos:
            scores[i] = float(np.mean(rhos))
        else:
            scores[i] = np.nan
            n_degenerate += 1
    valid = scores[~np.isnan(scores)]
    if len(valid) == 0:
        raise DegenerateInput("every iteration was degenerate")
    return SplitHalfResult(scores=scores, mean_rho=float(valid.mean()),
                           n_iterations=n_iterations, seed=seed,
                           n_degenerate=n_degenerate)


def median_split_efficiency(bubble_maps, n_iterations: int = 1000,
                            seed: int = 0, min_pairs_per_image: int = 4,
                            counts=None) -> MedianSplitResult:
    """Partition pairs per image by bubble count relative to the image median.

    Strictly below the median -> efficient; at or above -> inefficient.
    Images with fewer than `min_pairs_per_image` contributors are skipped,
    as is either group when the strict rule leaves it empty. Reports each
    group's per-image importance maps, mean map kurtosis across images,
    and within-group split-half reliability.
    """
    maps_list = list(bubble_maps)
    by_image: dict[str, list] = {}
    for bm in maps_list:
        by_image.setdefault(bm.image_id, []).append(bm)

    def count_for(bm) -> float:
        if counts is not None:
            return float(counts[(bm.pair_id, bm.image_id)])
        return float(bm.total_bubbles)

    efficient_maps: dict[str, ImportanceMap] = {}
    inefficient_maps: dict[str, ImportanceMap] = {}
    efficient_bms, inefficient_bms = [], []
    n_images = 0
    for image_id in sorted(by_image):
        group = sorted(by_image[image_id], key=lambda bm: bm.pair_id)
        if len(group) < min_pairs_per_image:
            continue
        values = np.array([count_for(bm) for bm in group])
        median = float(np.median(values))
        eff = [bm for bm, v in zip(group, values) if v < median]
        ineff = [bm for bm, v in zip(group, values) if v >= median]
        n_images += 1
        if eff:
            efficient_maps[image_id] = aggregate_importance(eff)
            efficient_bms.extend(eff)
        if ineff:
            inefficient_maps[image_id] = aggregate_importance(ineff)
            inefficient_bms.extend(ineff)
    if n_images == 0:
        raise TooFewPairs(
            f"no image has >= {min_pairs_per_image} contributing pairs")

    def mean_kurtosis(maps: dict[str, ImportanceMap]) -> float:
        values = []
        for im in maps.values():
            try:
                values.append(kurtosis(im.grid))
            except (ZeroVariance, TooFewValues):
                continue
        return float(np.mean(values)) if values else math.nan

    def group_split_half(bms) -> SplitHalfResult:
        try:
            return split_half_consistency(bms, n_iterations=n_iterations, seed=seed)
        except (TooFewPairs, DegenerateInput):
            return SplitHalfResult(scores=np.array([]), mean_rho=math.nan,
                                   n_iterations=0, seed=seed)

    return MedianSplitResult(
        efficient_maps=efficient_maps,
        inefficient_maps=inefficient_maps,
        kurtosis_efficient=mean_kurtosis(efficient_maps),
        kurtosis_inefficient=mean_kurtosis(inefficient_maps),
        split_half_efficient=group_split_half(efficient_bms),
        split_half_inefficient=group_split_half(inefficient_bms),
        n_images=n_images,
    )


def compare_to_external(importance_maps: dict[str, ImportanceMap],
                        heatmaps, categories: dict[str, str],
                        source: str | None = None) -> ComparisonResult:
    """Rank-correlate per-image importance maps against one external source.

    Heatmaps are block-mean resampled onto each importance map's grid
    first. Images where either side is constant are excluded from all
    means and counted in n_excluded.
    """
    if not importance_maps:
        raise TooFewValues("no importance maps to compare")
    sources = {hm.source for hm in heatmaps.values()}
    if source is None:
        if len(sources) != 1:
            raise StatsError(f"mixed heatmap sources: {sorted(sources)}")
        source = next(iter(sources))
    per_image: dict[str, float] = {}
    n_excluded = 0
    for image_id in sorted(importance_maps):
        im = importance_maps[image_id]
        if image_id not in heatmaps:
            raise MissingHeatmap(f"no {source} heatmap for {image_id}")
        hm = heatmaps[image_id]
        grid = hm.grid
        if grid.shape != im.grid.shape:
            grid = resample_grid(grid, im.grid.shape)
        if grid.shape != im.grid.shape:
            raise DimensionMismatch(
                f"{image_id}: heatmap {grid.shape} vs map {im.grid.shape}")
        try:
            per_image[image_id] = spearman(im.grid, grid)
        except DegenerateInput:
            n_excluded += 1
    if not per_image:
        raise DegenerateInput("every image comparison was degenerate")
    by_category: dict[str, list[float]] = {}
    for image_id, rho in per_image.items():
        by_category.setdefault(categories.get(image_id, "unknown"), []).append(rho)
    per_category = {cat: float(np.mean(v)) for cat, v in sorted(by_category.items())}
    overall = float(np.mean(list(per_image.values())))
    return ComparisonResult(source=source, per_image=per_image,
                            per_category=per_category,
                            overall_mean_rho=overall, n_excluded=n_excluded)


def permutation_p(split_half: SplitHalfResult, external_mean_rho: float) -> float:
    """Fraction of split-half iterations at or below the external score,
    with add-one correction so the result is never exactly zero."""
    scores = np.asarray(split_half.scores, dtype=np.float64)
    n = split_half.n_iterations
    if n < 1 or len(scores) < 1:
        raise TooFewValues("split-half result has no iterations")
    at_or_below = int(np.sum(scores <= external_mean_rho))    # NaN never counts
    return (1 + at_or_below) / (n + 1)
