"""Spatial-map construction and I/O.

Bubble logs become per-(pair, image) integer bubble maps; bubble maps
average into per-image importance maps; externally produced heatmaps are
read from disk and resampled onto the importance-map grid. Grids travel
in a small binary format (FIMAP) with a CSV fallback for interop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEATMAP_SOURCES = frozenset({
    "lrp", "cam", "sensitivity", "bottom_up_saliency",
    "deepgaze2", "human_salicon", "other",
})

FIMAP_MAGIC = "FIMAP"
FIMAP_VERSION = 1


class MapError(Exception):
    pass


class CenterOutOfBounds(MapError):
    pass


class EmptyInput(MapError):
    pass


class DimensionMismatch(MapError):
    pass


class NonIntegerRatio(MapError):
    pass


class BadMagic(MapError):
    pass


class TruncatedPayload(MapError):
    pass


class NonFiniteValue(MapError):
    pass


@dataclass
class BubbleMap:
    """Integer grid counting how many bubbles covered each pixel for one
    (pair, image)."""

    image_id: str
    pair_id: str
    grid: np.ndarray
    total_bubbles: int


@dataclass
class ImportanceMap:
    """Per-image mean bubble count per pixel across contributing pairs."""

    image_id: str
    grid: np.ndarray
    n_pairs: int


@dataclass
class ExternalHeatmap:
    image_id: str
    source: str
    grid: np.ndarray

    def __post_init__(self) -> None:
        if self.source not in HEATMAP_SOURCES:
            raise ValueError(f"unknown heatmap source: {self.source!r}")
        if self.grid.ndim != 2 or min(self.grid.shape) < 1:
            raise ValueError("heatmap grid must be 2-D and non-empty")
        if not np.all(np.isfinite(self.grid)):
            raise NonFiniteValue(f"heatmap {self.image_id} has non-finite values")


def bubble_extent(cx: int, cy: int, size: int,
                  width: int, height: int) -> tuple[int, int, int, int]:
    """Border-truncated (x0, y0, x1, y1) inclusive extent of a bubble.

    Even-sided bubbles anchor as [c - size//2, c + size//2 - 1] per axis.
    """
    half = size // 2
    x0 = max(cx - half, 0)
    y0 = max(cy - half, 0)
    x1 = min(cx - half + size - 1, width - 1)
    y1 = min(cy - half + size - 1, height - 1)
    return x0, y0, x1, y1


def rasterize_bubbles(bubbles, dims: tuple[int, int], bubble_size: int = 18,
                      *, image_id: str = "", pair_id: str = "") -> BubbleMap:
    """Accumulate each bubble's truncated square extent into a count grid.

    `dims` is (height, width); bubbles carry pixel centers (x right, y down).
    """
    height, width = dims
    grid = np.zeros((height, width), dtype=np.int64)
    n = 0
    for b in bubbles:
        if not (0 <= b.x < width and 0 <= b.y < height):
            raise CenterOutOfBounds(f"bubble center ({b.x}, {b.y}) outside {width}x{height}")
        x0, y0, x1, y1 = bubble_extent(b.x, b.y, bubble_size, width, height)
        grid[y0:y1 + 1, x0:x1 + 1] += 1
        n += 1
    return BubbleMap(image_id=image_id, pair_id=pair_id, grid=grid, total_bubbles=n)


def aggregate_importance(bubble_maps) -> ImportanceMap:
    """Elementwise mean of same-image bubble maps."""
    bubble_maps = list(bubble_maps)
    if not bubble_maps:
        raise EmptyInput("no bubble maps to aggregate")
    first = bubble_maps[0]
    for bm in bubble_maps[1:]:
        if bm.image_id != first.image_id:
            raise DimensionMismatch(
                f"mixed images: {first.image_id!r} vs {bm.image_id!r}")
        if bm.grid.shape != first.grid.shape:
            raise DimensionMismatch(
                f"{bm.pair_id}: shape {bm.grid.shape} vs {first.grid.shape}")
    stack = np.stack([bm.grid for bm in bubble_maps]).astype(np.float64)
    return ImportanceMap(image_id=first.image_id,
                         grid=stack.mean(axis=0),
                         n_pairs=len(bubble_maps))


def _resample_axis(grid: np.ndarray, target: int, axis: int) -> np.ndarray:
    source = grid.shape[axis]
    if target == source:
        return grid
    if source % target == 0:
        block = source // target
        shape = list(grid.shape)
        shape[axis] = target
        shape.insert(axis + 1, block)
        return grid.reshape(shape).mean(axis=axis + 1)
    if target % source == 0:
        return np.repeat(grid, target // source, axis=axis)
    raise NonIntegerRatio(f"axis {axis}: {source} -> {target} is not an integer ratio")


def resample_grid(grid: np.ndarray, target_dims: tuple[int, int],
                  mode: str = "box_mean") -> np.ndarray:
    """Block-mean resample to (height, width); each axis ratio must be integer.

    Downsampling averages source blocks; upsampling repeats cells (each
    target cell is still the mean of its one-source-cell block), so total
    mass scales exactly by target area / source area.
    """
    if mode != "box_mean":
        raise ValueError(f"unknown resample mode: {mode!r}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise DimensionMismatch(f"expected 2-D grid, got {grid.ndim}-D")
    out = _resample_axis(grid, target_dims[0], axis=0)
    out = _resample_axis(out, target_dims[1], axis=1)
    return out


def write_grid(grid: np.ndarray, path: str | Path) -> None:
    """Write a grid as FIMAP: ASCII header "FIMAP 1 <height> <width>\\n"
    then height*width little-endian float32, row-major."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise DimensionMismatch(f"expected 2-D grid, got {grid.ndim}-D")
    if not np.all(np.isfinite(grid)):
        raise NonFiniteValue("grid contains non-finite values")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"{FIMAP_MAGIC} {FIMAP_VERSION} {grid.shape[0]} {grid.shape[1]}\n"
    with path.open("wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(grid, dtype="<f4").tobytes())


def read_grid(path: str | Path) -> np.ndarray:
    path = Path(path)
    with path.open("rb") as fh:
        header = fh.readline(64)
        parts = header.decode("ascii", errors="replace").split()
        if len(parts) != 4 or parts[0] != FIMAP_MAGIC or parts[1] != str(FIMAP_VERSION):
            raise BadMagic(f"{path}: bad header {header!r}")
        try:
            height, width = int(parts[2]), int(parts[3])
        except ValueError as exc:
            raise BadMagic(f"{path}: bad dims in header {header!r}") from exc
        if height < 1 or width < 1:
            raise BadMagic(f"{path}: non-positive dims {height}x{width}")
        payload = fh.read()
    expected = height * width * 4
    if len(payload) != expected:
        raise TruncatedPayload(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f4")
    grid = flat.reshape(height, width).astype(np.float64)
    if not np.all(np.isfinite(grid)):
        raise NonFiniteValue(f"{path}: non-finite values in payload")
    return grid


def write_grid_csv(grid: np.ndarray, path: str | Path) -> None:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise DimensionMismatch(f"expected 2-D grid, got {grid.ndim}-D")
    if not np.all(np.isfinite(grid)):
        raise NonFiniteValue("grid contains non-finite values")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, grid, delimiter=",", fmt="%.17g")


def read_grid_csv(path: str | Path) -> np.ndarray:
    grid = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    if not np.all(np.isfinite(grid)):
        raise NonFiniteValue(f"{path}: non-finite values")
    return grid


def load_any_grid(path: str | Path) -> np.ndarray:
    """Dispatch on extension: .fimap binary, anything else CSV."""
    path = Path(path)
    if path.suffix == ".fimap":
        return read_grid(path)
    return read_grid_csv(path)


def write_heatmap_manifest(entries, path: str | Path) -> None:
    """Entries are (image_id, source, grid_path) triples, one JSON line each."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for image_id, source, grid_path in entries:
            fh.write(json.dumps({"id": image_id, "source": source,
                                 "path": str(grid_path)}, sort_keys=True) + "\n")


def load_heatmaps(manifest_path: str | Path) -> dict[str, ExternalHeatmap]:
    """Read a heatmap manifest and every grid it references.

    Relative grid paths resolve against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise EmptyInput(f"heatmap manifest not found: {manifest_path}")
    heatmaps: dict[str, ExternalHeatmap] = {}
    with manifest_path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            grid_path = Path(raw["path"])
            if not grid_path.is_absolute():
                grid_path = manifest_path.parent / grid_path
            hm = ExternalHeatmap(image_id=raw["id"], source=raw["source"],
                                 grid=load_any_grid(grid_path))
            if hm.image_id in heatmaps:
                raise MapError(f"{manifest_path}:{lineno}: duplicate id {hm.image_id!r}")
            heatmaps[hm.image_id] = hm
    if not heatmaps:
        raise EmptyInput(f"heatmap manifest is empty: {manifest_path}")
    return heatmaps
