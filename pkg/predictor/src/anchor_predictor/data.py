"""Position data handling: the `slot,vehicle_id,x,y` CSV, contiguous
trajectory segments, and sliding-window training samples.

A vehicle absent for a slot starts a new segment when it returns, matching
the simulator's treatment of reappearing vehicles as new.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

POSITIONS_HEADER = ["slot", "vehicle_id", "x", "y"]


@dataclass(frozen=True)
class Segment:
    """One contiguous run of a vehicle's positions, one per slot."""

    vehicle_id: str
    start_slot: int
    positions: np.ndarray  # (length, 2)

    def __len__(self) -> int:
        return len(self.positions)


def load_positions(path) -> list[tuple[int, str, float, float]]:
    rows: list[tuple[int, str, float, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(POSITIONS_HEADER).issubset(reader.fieldnames):
            raise ValueError(f"{path}: positions CSV must have header {','.join(POSITIONS_HEADER)}")
        for row in reader:
            rows.append((int(row["slot"]), row["vehicle_id"], float(row["x"]), float(row["y"])))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def to_segments(rows) -> list[Segment]:
    """Split each vehicle's slot-ordered positions at gaps into segments."""
    by_vehicle: dict[str, list[tuple[int, float, float]]] = {}
    for slot, vid, x, y in rows:
        by_vehicle.setdefault(vid, []).append((slot, x, y))
    segments: list[Segment] = []
    for vid in sorted(by_vehicle):
        entries = sorted(by_vehicle[vid])
        run: list[tuple[int, float, float]] = []
        for entry in entries:
            if run and entry[0] != run[-1][0] + 1:
                segments.append(_segment(vid, run))
                run = []
            run.append(entry)
        if run:
            segments.append(_segment(vid, run))
    return segments


def _segment(vid: str, run) -> Segment:
    return Segment(vid, run[0][0], np.array([(x, y) for _, x, y in run], dtype=np.float64))


def window_samples(segments, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding (window -> next position) samples over every segment.

    Returns inputs of shape (n, window, 2) and targets (n, 2). Segments
    shorter than window + 1 contribute nothing.
    """
    xs, ys = [], []
    for seg in segments:
        pos = seg.positions
        for end in range(window, len(pos)):
            xs.append(pos[end - window : end])
            ys.append(pos[end])
    if not xs:
        return np.empty((0, window, 2)), np.empty((0, 2))
    return np.stack(xs), np.stack(ys)


def split_segments(segments, train_fraction: float, rng: np.random.Generator):
    """Deterministic train/held-out split at segment granularity."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    order = rng.permutation(len(segments))
    n_train = max(1, int(round(train_fraction * len(segments))))
    if n_train >= len(segments):
        n_train = len(segments) - 1
    train_idx = set(order[:n_train].tolist())
    train = [segments[i] for i in range(len(segments)) if i in train_idx]
    held_out = [segments[i] for i in range(len(segments)) if i not in train_idx]
    return train, held_out
