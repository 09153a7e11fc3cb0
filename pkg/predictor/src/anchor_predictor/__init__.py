"""Recurrent mobility predictor companion to mec-anchor-sim; talks to the
simulator only through the positions and predictions CSV formats."""

from .data import Segment, load_positions, to_segments, window_samples
from .emit import emit_predictions
from .model import (
    Hyperparams,
    InsufficientDataError,
    TrainedPredictor,
    TrainReport,
    load_predictor,
    save_predictor,
    train_predictor,
)

__version__ = "0.1.0"

__all__ = [
    "Hyperparams",
    "InsufficientDataError",
    "Segment",
    "TrainReport",
    "TrainedPredictor",
    "emit_predictions",
    "load_positions",
    "load_predictor",
    "save_predictor",
    "to_segments",
    "train_predictor",
    "window_samples",
    "__version__",
]
