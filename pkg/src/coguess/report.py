"""Plain-text analysis reports with companion CSV tables.

The first line of every report is ``# generated: <timestamp>`` and is the
only non-deterministic byte in the output: identical inputs yield
byte-identical reports below that line, which is what the determinism
checks compare.
"""

from __future__ import annotations

import io
import csv
from datetime import datetime, timezone

import numpy as np

from coguess.maps import BubbleMap, ImportanceMap, aggregate_importance
from coguess.stats import (
    ComparisonResult,
    MedianSplitResult,
    SplitHalfResult,
    StatsError,
    kurtosis,
    ks_normality,
    t_test_ind,
)


def _fmt(value: float) -> str:
    """Stable numeric formatting for report bodies."""
    if isinstance(value, float) and np.isnan(value):
        return "nan"
    return f"{value:.6g}"


def _rule(title: str) -> list[str]:
    return [title, "-" * len(title)]


def generated_line(now: datetime | None = None) -> str:
    stamp = (now or datetime.now(timezone.utc)).isoformat(timespec="seconds")
    return f"# generated: {stamp}"


def strip_generated(text: str) -> str:
    """Drop the timestamp header; the remainder is the deterministic body."""
    lines = text.splitlines(keepends=True)
    if lines and lines[0].startswith("# generated:"):
        return "".join(lines[1:])
    return text


def group_importance(bubble_maps: list[BubbleMap]) -> dict[str, ImportanceMap]:
    """Per-image mean maps over every contributing pair, sorted by image."""
    by_image: dict[str, list[BubbleMap]] = {}
    for bm in bubble_maps:
        by_image.setdefault(bm.image_id, []).append(bm)
    return {image_id: aggregate_importance(by_image[image_id])
            for image_id in sorted(by_image)}


def per_image_shape_rows(importance: dict[str, ImportanceMap]) -> list[dict]:
    """Kurtosis and KS normality per importance map."""
    rows = []
    for image_id in sorted(importance):
        grid = importance[image_id].grid
        row = {"image_id": image_id,
               "n_pairs": importance[image_id].n_pairs,
               "kurtosis": kurtosis(grid)}
        try:
            d, reject = ks_normality(grid)
            row["ks_d"] = d
            row["normality_rejected"] = reject
        except StatsError:
            row["ks_d"] = float("nan")
            row["normality_rejected"] = False
        rows.append(row)
    return rows


def analysis_report(bubble_maps: list[BubbleMap],
                    split_half: SplitHalfResult,
                    median_split: MedianSplitResult | None,
                    params: dict,
                    now: datetime | None = None) -> str:
    """Render the full analysis battery as a text document."""
    lines = [generated_line(now), "bubble-game analysis", "=" * 20, ""]

    lines += _rule("parameters")
    for key in sorted(params):
        lines.append(f"{key}: {params[key]}")
    lines.append("")

    pair_ids = sorted({bm.pair_id for bm in bubble_maps})
    importance = group_importance(bubble_maps)
    counts = np.array([bm.total_bubbles for bm in bubble_maps], dtype=np.float64)
    lines += _rule("population")
    lines.append(f"pairs: {len(pair_ids)}")
    lines.append(f"images: {len(importance)}")
    lines.append(f"maps: {len(bubble_maps)}")
    lines.append(f"bubbles_per_round: median {_fmt(float(np.median(counts)))} "
                 f"mean {_fmt(float(counts.mean()))}")
    lines.append("")

    lines += _rule("split-half consistency")
    lines.append(f"mean_rho: {_fmt(split_half.mean_rho)}")
    lines.append(f"iterations: {split_half.n_iterations}")
    lines.append(f"degenerate_iterations: {split_half.n_degenerate}")
    lines.append(f"seed: {split_half.seed}")
    lines.append("")

    shape_rows = per_image_shape_rows(importance)
    lines += _rule("importance-map shape")
    lines.append("image_id n_pairs kurtosis ks_d normality_rejected")
    for row in shape_rows:
        lines.append(f"{row['image_id']} {row['n_pairs']} "
                     f"{_fmt(row['kurtosis'])} {_fmt(row['ks_d'])} "
                     f"{'yes' if row['normality_rejected'] else 'no'}")
    mean_kurt = float(np.mean([r["kurtosis"] for r in shape_rows]))
    lines.append(f"mean_kurtosis: {_fmt(mean_kurt)}")
    lines.append("")

    lines += _rule("median split")
    if median_split is None:
        lines.append("skipped: too few pairs per image")
    else:
        ms = median_split
        lines.append(f"images_split: {ms.n_images}")
        lines.append(f"kurtosis_efficient: {_fmt(ms.kurtosis_efficient)}")
        lines.append(f"kurtosis_inefficient: {_fmt(ms.kurtosis_inefficient)}")
        lines.append(
            f"split_half_efficient: {_fmt(ms.split_half_efficient.mean_rho)}")
        lines.append(
            f"split_half_inefficient: "
            f"{_fmt(ms.split_half_inefficient.mean_rho)}")
        eff = [kurtosis(m.grid) for _, m in sorted(ms.efficient_maps.items())]
        ineff = [kurtosis(m.grid) for _, m in sorted(ms.inefficient_maps.items())]
        try:
            t, p = t_test_ind(eff, ineff)
            lines.append(f"kurtosis_t_test: t {_fmt(t)} p {_fmt(p)}")
        except StatsError as exc:
            lines.append(f"kurtosis_t_test: unavailable ({exc})")
    lines.append("")
    return "\n".join(lines)


def comparison_report(results: list[ComparisonResult],
                      params: dict,
                      now: datetime | None = None) -> str:
    lines = [generated_line(now), "external-heatmap comparison", "=" * 27, ""]
    lines += _rule("parameters")
    for key in sorted(params):
        lines.append(f"{key}: {params[key]}")
    lines.append("")
    for result in results:
        lines += _rule(f"source: {result.source}")
        lines.append(f"overall_mean_rho: {_fmt(result.overall_mean_rho)}")
        if result.permutation_p is not None:
            lines.append(f"permutation_p: {_fmt(result.permutation_p)}")
        lines.append(f"images_excluded: {result.n_excluded}")
        lines.append("per_category:")
        for category in sorted(result.per_category):
            lines.append(f"  {category}: {_fmt(result.per_category[category])}")
        lines.append("per_image:")
        for image_id in sorted(result.per_image):
            lines.append(f"  {image_id}: {_fmt(result.per_image[image_id])}")
        lines.append("")
    return "\n".join(lines)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def analysis_tables(bubble_maps: list[BubbleMap],
                    split_half: SplitHalfResult,
                    median_split: MedianSplitResult | None) -> dict[str, str]:
    """CSV companions for every list-valued report section."""
    tables: dict[str, str] = {}
    importance = group_importance(bubble_maps)
    shape_rows = per_image_shape_rows(importance)
    tables["per_image_shape.csv"] = _csv_text(
        ["image_id", "n_pairs", "kurtosis", "ks_d", "normality_rejected"],
        [[r["image_id"], r["n_pairs"], repr(r["kurtosis"]), repr(r["ks_d"]),
          int(r["normality_rejected"])] for r in shape_rows])
    tables["bubble_counts.csv"] = _csv_text(
        ["pair_id", "image_id", "total_bubbles"],
        [[bm.pair_id, bm.image_id, bm.total_bubbles]
         for bm in sorted(bubble_maps, key=lambda b: (b.pair_id, b.image_id))])
    tables["split_half_scores.csv"] = _csv_text(
        ["iteration", "rho"],
        [[i, repr(float(s))] for i, s in enumerate(split_half.scores)])
    if median_split is not None:
        rows = []
        for group, maps in (("efficient", median_split.efficient_maps),
                            ("inefficient", median_split.inefficient_maps)):
            for image_id in sorted(maps):
                rows.append([group, image_id, maps[image_id].n_pairs,
                             repr(kurtosis(maps[image_id].grid))])
        tables["median_split_groups.csv"] = _csv_text(
            ["group", "image_id", "n_pairs", "kurtosis"], rows)
    return tables


def comparison_tables(results: list[ComparisonResult]) -> dict[str, str]:
    tables: dict[str, str] = {}
    for result in results:
        rows = [[image_id, repr(result.per_image[image_id])]
                for image_id in sorted(result.per_image)]
        tables[f"compare_{result.source}_per_image.csv"] = _csv_text(
            ["image_id", "rho"], rows)
        rows = [[category, repr(result.per_category[category])]
                for category in sorted(result.per_category)]
        tables[f"compare_{result.source}_per_category.csv"] = _csv_text(
            ["category", "mean_rho"], rows)
    return tables
