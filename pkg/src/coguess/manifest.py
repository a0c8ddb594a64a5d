"""Image manifest I/O.

A manifest is a line-delimited JSON file, one record per playable image:

    {"id": "...", "category": "...", "labels": ["...", ...], "path": "..."}

`labels` is the full set of normalized guesses accepted as correct for the
image (the category itself plus any subordinate synonyms); `path` points at
the pixel data and may be empty for synthetic images.
"""

from __future__ import annotations

import json
from pathlib import Path

from coguess.game import ImageRecord, normalize_label


class ManifestError(Exception):
    """The manifest file is missing, malformed, or inconsistent."""


def load_manifest(path: str | Path) -> dict[str, ImageRecord]:
    """Read a manifest into an id-keyed mapping, preserving file order."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    records: dict[str, ImageRecord] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                record = ImageRecord(
                    image_id=raw["id"],
                    category=raw["category"],
                    accepted_labels=frozenset(normalize_label(t) for t in raw["labels"]),
                    pixel_data_ref=raw.get("path", ""),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: bad record: {exc}") from exc
            if record.image_id in records:
                raise ManifestError(f"{path}:{lineno}: duplicate id {record.image_id!r}")
            records[record.image_id] = record
    if not records:
        raise ManifestError(f"manifest is empty: {path}")
    return records


def write_manifest(records: dict[str, ImageRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records.values():
            fh.write(json.dumps({
                "id": record.image_id,
                "category": record.category,
                "labels": sorted(record.accepted_labels),
                "path": record.pixel_data_ref,
            }, sort_keys=True) + "\n")


def categories(records: dict[str, ImageRecord]) -> dict[str, list[str]]:
    """Group image ids by category, preserving manifest order within groups."""
    by_cat: dict[str, list[str]] = {}
    for record in records.values():
        by_cat.setdefault(record.category, []).append(record.image_id)
    return by_cat
