"""Cooperative image-reveal guessing game: rules engine, lobby, wire
protocol, bots, persistence, and the feature-importance analysis built on
recorded play."""

__version__ = "0.1.0"

from coguess.game import (
    Bubble,
    GameConfig,
    GameSession,
    ImageRecord,
    RoundState,
)
from coguess.lobby import Leaderboard, Lobby
from coguess.maps import (
    BubbleMap,
    ExternalHeatmap,
    ImportanceMap,
    aggregate_importance,
    rasterize_bubbles,
    resample_grid,
)
from coguess.stats import (
    compare_to_external,
    median_split_efficiency,
    permutation_p,
    split_half_consistency,
)
from coguess.storage import EventLog, replay

__all__ = [
    "Bubble",
    "BubbleMap",
    "EventLog",
    "ExternalHeatmap",
    "GameConfig",
    "GameSession",
    "ImageRecord",
    "ImportanceMap",
    "Leaderboard",
    "Lobby",
    "RoundState",
    "aggregate_importance",
    "compare_to_external",
    "median_split_efficiency",
    "permutation_p",
    "rasterize_bubbles",
    "replay",
    "resample_grid",
    "split_half_consistency",
    "__version__",
]
