"""Prediction export: one `slot,vehicle_id,x,y` row per predictable
(slot, vehicle) pair, loadable by the simulator's file-backed predictor.

A pair is predictable when the vehicle was also live in the previous slot of
the same contiguous segment, the same rule the simulator uses to decide which
positions it asks a predictor for. Vehicles with less in-segment history than
the model window fall back to the last observed value and are flagged in the
sidecar report.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import POSITIONS_HEADER, Segment
from .model import TrainedPredictor


@dataclass
class EmitReport:
    rows: int = 0
    model_rows: int = 0
    fallback_rows: int = 0
    fallbacks: list[tuple[int, str, int]] = field(default_factory=list)

    def as_text(self) -> str:
        lines = [
            f"rows={self.rows} model_rows={self.model_rows} fallback_rows={self.fallback_rows}"
        ]
        lines += [
            f"fallback slot={slot} vehicle={vid} history={n}"
            for slot, vid, n in self.fallbacks
        ]
        return "\n".join(lines) + "\n"


def emit_predictions(
    trained: TrainedPredictor | None,
    segments: list[Segment],
    out_fh,
    slot_first: int | None = None,
    slot_last: int | None = None,
    oracle: bool = False,
) -> EmitReport:
    """Write predictions for every predictable (slot, vehicle) in range.

    Oracle mode exports the true positions for every live pair instead (no
    model needed), which makes a file-backed simulator run reproduce its
    oracle-predictor run.
    """
    if trained is None and not oracle:
        raise ValueError("a trained model is required unless oracle mode is set")
    window = trained.hyperparams.window if trained is not None else 0
    report = EmitReport()
    rows: list[tuple[int, str, float, float]] = []
    model_inputs: list[np.ndarray] = []
    model_slots: list[tuple[int, str]] = []

    def in_range(slot: int) -> bool:
        return (slot_first is None or slot >= slot_first) and (
            slot_last is None or slot <= slot_last
        )

    for seg in segments:
        first_offset = 0 if oracle else 1
        for offset in range(first_offset, len(seg)):
            slot = seg.start_slot + offset
            if not in_range(slot):
                continue
            if oracle:
                x, y = seg.positions[offset]
                rows.append((slot, seg.vehicle_id, float(x), float(y)))
            elif offset >= window:
                model_inputs.append(seg.positions[offset - window : offset])
                model_slots.append((slot, seg.vehicle_id))
            else:
                x, y = seg.positions[offset - 1]
                rows.append((slot, seg.vehicle_id, float(x), float(y)))
                report.fallback_rows += 1
                report.fallbacks.append((slot, seg.vehicle_id, offset))

    if model_inputs:
        predicted = trained.predict(np.stack(model_inputs))
        for (slot, vid), (x, y) in zip(model_slots, predicted):
            rows.append((slot, vid, float(x), float(y)))
        report.model_rows = len(model_inputs)

    rows.sort(key=lambda r: (r[0], r[1]))
    writer = csv.writer(out_fh)
    writer.writerow(POSITIONS_HEADER)
    for slot, vid, x, y in rows:
        writer.writerow([slot, vid, x, y])
    report.rows = len(rows)
    return report
