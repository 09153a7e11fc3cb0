"""Stacked-LSTM next-position model: training, evaluation, persistence.

Each input window of (x, y) positions is centered on its last position and
scaled to unit variance, and the network predicts the normalized next-slot
displacement. Centering makes the task translation-invariant (a zero output
reproduces the last-value baseline), which is what lets the small desk-scale
datasets converge within the configured epoch budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data import Segment, split_segments, window_samples


@dataclass(frozen=True)
class Hyperparams:
    window: int = 5
    hidden_units: int = 50
    layers: int = 2
    epochs: int = 10
    batch_size: int = 1000
    train_fraction: float = 0.2
    learning_rate: float = 1e-3


@dataclass(frozen=True)
class TrainReport:
    model_rmse: float
    naive_rmse: float
    train_sequences: int
    held_out_sequences: int
    train_samples: int
    held_out_samples: int

    @property
    def ratio(self) -> float:
        if self.naive_rmse == 0:
            return 1.0 if self.model_rmse == 0 else math.inf
        return self.model_rmse / self.naive_rmse

    def as_text(self) -> str:
        return f"model_rmse={self.model_rmse:.6g} naive_rmse={self.naive_rmse:.6g}"


class TrajectoryLSTM(nn.Module):
    def __init__(self, hidden_units: int = 50, layers: int = 2):
        super().__init__()
        self.lstm = nn.LSTM(input_size=2, hidden_size=hidden_units, num_layers=layers, batch_first=True)
        self.head = nn.Linear(hidden_units, 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.lstm(x)
        return self.head(out[:, -1, :])


@dataclass
class TrainedPredictor:
    model: TrajectoryLSTM
    scale: np.ndarray
    hyperparams: Hyperparams
    report: TrainReport | None = None

    def predict(self, windows: np.ndarray) -> np.ndarray:
        """Next positions for a batch of (n, window, 2) position windows."""
        if len(windows) == 0:
            return np.empty((0, 2))
        last = windows[:, -1:, :]
        normed = (windows - last) / self.scale
        with torch.no_grad():
            out = self.model(torch.as_tensor(normed, dtype=torch.float32))
        return last[:, 0, :] + out.numpy().astype(np.float64) * self.scale


class InsufficientDataError(ValueError):
    pass


def train_predictor(segments: list[Segment], hp: Hyperparams, seed: int = 0) -> TrainedPredictor:
    """Train on a fraction of the segments, report RMSE on the held-out rest.

    Deterministic for a fixed seed up to framework kernel tolerance. The
    naive baseline (last value carried forward) is evaluated on exactly the
    same held-out samples.
    """
    usable = [s for s in segments if len(s) >= 2]
    if len(usable) < 100:
        raise InsufficientDataError(
            f"only {len(usable)} usable vehicle sequences (<100); generate a synthetic "
            "set or dump a longer slot range"
        )
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)

    train_segments, held_out_segments = split_segments(usable, hp.train_fraction, rng)
    x_train, y_train = window_samples(train_segments, hp.window)
    x_test, y_test = window_samples(held_out_segments, hp.window)
    if len(x_train) == 0 or len(x_test) == 0:
        raise InsufficientDataError(
            f"segments too short for window {hp.window}; no training or held-out samples"
        )

    last = x_train[:, -1:, :]
    centered = x_train - last
    scale = np.maximum(centered.reshape(-1, 2).std(axis=0), 1e-6)

    model = TrajectoryLSTM(hp.hidden_units, hp.layers)
    optimizer = torch.optim.Adam(model.parameters(), lr=hp.learning_rate)
    loss_fn = nn.MSELoss()
    inputs = torch.as_tensor(centered / scale, dtype=torch.float32)
    targets = torch.as_tensor((y_train - last[:, 0, :]) / scale, dtype=torch.float32)
    generator = torch.Generator().manual_seed(seed)
    for _ in range(hp.epochs):
        order = torch.randperm(len(inputs), generator=generator)
        for start in range(0, len(inputs), hp.batch_size):
            batch = order[start : start + hp.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(inputs[batch]), targets[batch])
            loss.backward()
            optimizer.step()
    model.eval()

    trained = TrainedPredictor(model, scale, hp)
    predicted = trained.predict(x_test)
    model_rmse = _rmse(predicted, y_test)
    naive_rmse = _rmse(x_test[:, -1, :], y_test)
    trained.report = TrainReport(
        model_rmse=model_rmse,
        naive_rmse=naive_rmse,
        train_sequences=len(train_segments),
        held_out_sequences=len(held_out_segments),
        train_samples=len(x_train),
        held_out_samples=len(x_test),
    )
    return trained


def _rmse(predicted: np.ndarray, actual: np.ndarray) -> float:
    return float(np.sqrt(((predicted - actual) ** 2).sum(axis=1).mean()))


def save_predictor(trained: TrainedPredictor, path) -> None:
    torch.save(
        {
            "state_dict": trained.model.state_dict(),
            "scale": trained.scale,
            "hyperparams": trained.hyperparams.__dict__,
        },
        path,
    )


def load_predictor(path) -> TrainedPredictor:
    payload = torch.load(path, weights_only=False)
    hp = Hyperparams(**payload["hyperparams"])
    model = TrajectoryLSTM(hp.hidden_units, hp.layers)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return TrainedPredictor(model, payload["scale"], hp)
