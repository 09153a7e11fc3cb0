"""Synthetic mobility sets for predictor tests."""

from __future__ import annotations

import numpy as np


def synthetic_rows(
    rng: np.random.Generator,
    n_vehicles: int,
    n_slots: int = 20,
    motion: str = "cv",
    noise: float = 5.0,
    area: float = 2000.0,
):
    """Positions CSV rows (slot, vid, x, y) for static or constant-velocity sets."""
    rows = []
    for i in range(n_vehicles):
        pos = rng.uniform(0, area, 2)
        vel = rng.uniform(-15.0, 15.0, 2) * 5.0  # meters per slot
        for s in range(n_slots):
            if motion == "static":
                p = pos
            else:
                p = pos + vel * s + rng.normal(0.0, noise, 2)
            rows.append((s, f"veh{i:04d}", float(p[0]), float(p[1])))
    return rows


def write_positions_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("slot,vehicle_id,x,y\n")
        for slot, vid, x, y in sorted(rows):
            fh.write(f"{slot},{vid},{x},{y}\n")
