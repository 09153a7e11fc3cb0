"""Position predictors feeding the predicted connection matrix X-hat.

Predictions are one slot ahead (the decision instant). The file-backed kind
loads a `slot,vehicle_id,x,y` CSV, the interchange format with external
prediction models.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

from . import mobility
from .mobility import RadioParams, ShadowingField
from .topology import TopologyGraph

Position = tuple[float, float]


class PredictionGapError(KeyError):
    """A file-backed predictor lacks a requested (slot, vehicle) entry."""


class PredictorKind(Enum):
    NAIVE_LAST_VALUE = "naive"
    CONSTANT_VELOCITY = "cv"
    FILE_BACKED = "file"
    ORACLE = "oracle"


@dataclass(frozen=True)
class Predictor:
    kind: PredictorKind
    table: dict[tuple[int, str], Position] | None = None


def make_predictor(spec: str) -> Predictor:
    """Parse a predictor spec: `naive`, `cv`, `oracle`, or `file:PATH`."""
    if spec.startswith("file:"):
        return Predictor(PredictorKind.FILE_BACKED, load_predictions(spec[5:]))
    try:
        return Predictor(PredictorKind(spec))
    except ValueError:
        raise ValueError(f"unknown predictor {spec!r}") from None


def load_predictions(path) -> dict[tuple[int, str], Position]:
    table: dict[tuple[int, str], Position] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"slot", "vehicle_id", "x", "y"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: predictions CSV must have header slot,vehicle_id,x,y")
        for row in reader:
            table[(int(row["slot"]), row["vehicle_id"])] = (float(row["x"]), float(row["y"]))
    return table


def predict_positions(
    history: dict[str, list[Position]],
    slot_index: int,
    predictor: Predictor,
    actual_positions: dict[str, Position] | None = None,
) -> dict[str, Position]:
    """Predict this slot's position for every vehicle in `history`.

    History holds past observed positions, most recent last. Constant-velocity
    extrapolates the last step and falls back to the last value when only one
    observation exists. The oracle returns the true current position.
    """
    out: dict[str, Position] = {}
    for vid, past in history.items():
        if not past:
            raise ValueError(f"empty history for vehicle {vid!r}")
        if predictor.kind is PredictorKind.NAIVE_LAST_VALUE:
            out[vid] = past[-1]
        elif predictor.kind is PredictorKind.CONSTANT_VELOCITY:
            if len(past) < 2:
                out[vid] = past[-1]
            else:
                (x0, y0), (x1, y1) = past[-2], past[-1]
                out[vid] = (2 * x1 - x0, 2 * y1 - y0)
        elif predictor.kind is PredictorKind.ORACLE:
            if actual_positions is None or vid not in actual_positions:
                raise ValueError(f"oracle predictor needs the actual position of {vid!r}")
            out[vid] = actual_positions[vid]
        elif predictor.kind is PredictorKind.FILE_BACKED:
            assert predictor.table is not None
            try:
                out[vid] = predictor.table[(slot_index, vid)]
            except KeyError:
                raise PredictionGapError(
                    f"predictions file has no entry for slot {slot_index}, vehicle {vid!r}"
                ) from None
        else:  # pragma: no cover
            raise AssertionError(predictor.kind)
    return out


def predicted_connections(
    predicted_positions: dict[str, Position],
    prev_real_connections: dict[str, int],
    graph: TopologyGraph,
    params: RadioParams,
    shadowing: ShadowingField,
    slot_index: int,
) -> dict[str, int]:
    """Connection matrix X-hat from predicted positions.

    Same attachment procedure as the real matrix: the hysteresis reference is
    the previous slot's real connections (the controller observes actual
    attachments), and the shadowing samples are shared with the real slot so a
    perfect prediction reproduces X exactly.
    """
    return mobility.attach(
        predicted_positions, prev_real_connections, graph, params, shadowing, slot_index
    )


@dataclass(frozen=True)
class RmseReport:
    rmse: float
    matched: int
    coverage: float


def prediction_rmse(
    predicted: dict[tuple[int, str], Position],
    actual: dict[tuple[int, str], Position],
) -> RmseReport:
    """Root mean squared Euclidean position error over matching (slot, vehicle) keys."""
    keys = predicted.keys() & actual.keys()
    if not keys:
        raise ValueError("no overlapping (slot, vehicle) keys between predicted and actual")
    sq = 0.0
    for k in sorted(keys):
        (px, py), (ax, ay) = predicted[k], actual[k]
        sq += (px - ax) ** 2 + (py - ay) ** 2
    return RmseReport(
        rmse=math.sqrt(sq / len(keys)),
        matched=len(keys),
        coverage=len(keys) / len(actual),
    )
