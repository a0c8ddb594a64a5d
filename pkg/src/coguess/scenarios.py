"""Prebuilt synthetic populations for calibration and analysis checks.

Each builder returns (manifest, teacher_policies, student_policies,
config) ready for simulate_population. The populations are engineered to
have known structure: hotspot populations share per-image informative
regions (high reliability), uniform populations wander independently
(no reliability), and mixed populations contain both kinds of pair.
"""

from __future__ import annotations

import numpy as np

from coguess.bots import (
    HOTSPOT_WALK,
    UNIFORM_WALK,
    StudentPolicy,
    TeacherPolicy,
)
from coguess.game import GameConfig, ImageRecord

CATEGORY_NAMES = [
    "backpack", "bicycle", "candle", "chair", "clock", "drum", "guitar",
    "hammer", "kettle", "ladder", "lamp", "mirror", "pencil", "scissors",
    "shovel", "spoon", "teapot", "umbrella", "vase", "wheel",
]


def synthetic_manifest(n_images: int,
                       categories: list[str] | None = None) -> dict[str, ImageRecord]:
    """Deterministic manifest of synthetic images, categories cycling."""
    categories = categories or CATEGORY_NAMES
    records: dict[str, ImageRecord] = {}
    for i in range(n_images):
        category = categories[i % len(categories)]
        image_id = f"img-{i:03d}"
        records[image_id] = ImageRecord(
            image_id=image_id, category=category,
            accepted_labels=frozenset({category}),
            pixel_data_ref="")
    return records


def gaussian_target(dims: tuple[int, int], center: tuple[int, int],
                    sigma: float) -> np.ndarray:
    """Unnormalized isotropic Gaussian bump; (height, width) grid."""
    height, width = dims
    cy, cx = center
    yy = np.arange(height)[:, None] - cy
    xx = np.arange(width)[None, :] - cx
    return np.exp(-(yy * yy + xx * xx) / (2.0 * sigma * sigma))


def _hotspot_centers(n_images: int, dims: tuple[int, int], seed: int,
                     margin: int) -> list[tuple[int, int]]:
    rng = np.random.default_rng(seed)
    height, width = dims
    margin = min(margin, (min(height, width) - 1) // 2)
    return [(int(rng.integers(margin, height - margin)),
             int(rng.integers(margin, width - margin)))
            for _ in range(n_images)]


def scenario_config(dims: tuple[int, int], n_rounds: int) -> GameConfig:
    height, width = dims
    return GameConfig(image_width=width, image_height=height,
                      rounds_per_game=n_rounds)


def hotspot_population(n_images: int = 10, dims: tuple[int, int] = (100, 100),
                       seed: int = 101, sigma: float = 12.0,
                       threshold: float = 0.85, noise_scale: float = 3.0):
    """All pairs share one tight informative region per image.

    Teachers walk the shared hotspot (start jittered by noise_scale);
    students recognize once `threshold` of the hotspot is revealed.
    """
    manifest = synthetic_manifest(n_images)
    centers = _hotspot_centers(n_images, dims, seed, margin=int(3 * sigma))
    teacher_bank: dict[str, TeacherPolicy] = {}
    student_bank: dict[str, StudentPolicy] = {}
    for image_id, center in zip(manifest, centers):
        target = gaussian_target(dims, center, sigma)
        teacher_bank[image_id] = TeacherPolicy(
            strategy=HOTSPOT_WALK, target_map=target, noise_scale=noise_scale)
        student_bank[image_id] = StudentPolicy(
            diagnostic_mask=target >= np.exp(-2.0),
            recognition_threshold=threshold)
    config = scenario_config(dims, n_images)
    return manifest, teacher_bank, student_bank, config


def uniform_population(n_images: int = 10, dims: tuple[int, int] = (100, 100),
                       threshold: float = 0.2):
    """Pairs wander independently with no shared spatial structure.

    Students recognize on overall coverage (full-image mask), so rounds
    end after a similar amount of revealing but maps share no hotspots.
    """
    manifest = synthetic_manifest(n_images)
    height, width = dims
    teacher = TeacherPolicy(strategy=UNIFORM_WALK)
    student = StudentPolicy(diagnostic_mask=np.ones((height, width), dtype=bool),
                            recognition_threshold=threshold)
    config = scenario_config(dims, n_images)
    return manifest, teacher, student, config


def mixed_population(n_pairs: int, n_images: int = 10,
                     dims: tuple[int, int] = (100, 100), seed: int = 303,
                     sigma: float = 8.0, hotspot_threshold: float = 0.8,
                     wander_threshold: float = 0.3):
    """Half the pairs share tight hotspots (recognize fast, sharp maps);
    half wander (recognize late, diffuse maps). A per-image median split
    on bubble counts should separate the two kinds."""
    manifest = synthetic_manifest(n_images)
    centers = _hotspot_centers(n_images, dims, seed, margin=int(3 * sigma))
    height, width = dims
    hotspot_teachers: dict[str, TeacherPolicy] = {}
    hotspot_students: dict[str, StudentPolicy] = {}
    for image_id, center in zip(manifest, centers):
        target = gaussian_target(dims, center, sigma)
        hotspot_teachers[image_id] = TeacherPolicy(
            strategy=HOTSPOT_WALK, target_map=target, noise_scale=2.0)
        hotspot_students[image_id] = StudentPolicy(
            diagnostic_mask=target >= np.exp(-2.0),
            recognition_threshold=hotspot_threshold)
    wander_teacher = TeacherPolicy(strategy=UNIFORM_WALK)
    wander_student = StudentPolicy(
        diagnostic_mask=np.ones((height, width), dtype=bool),
        recognition_threshold=wander_threshold)
    n_sharp = n_pairs // 2
    teacher_policies = [hotspot_teachers if i < n_sharp else wander_teacher
                        for i in range(n_pairs)]
    student_policies = [hotspot_students if i < n_sharp else wander_student
                        for i in range(n_pairs)]
    config = scenario_config(dims, n_images)
    return manifest, teacher_policies, student_policies, config
