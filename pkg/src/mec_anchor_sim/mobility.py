"""Vehicle traces: streaming parse, time-slot bucketing, and radio attachment.

Trace lines are `t vehicle_id x y speed`. Attachment follows an NLOS urban
path-loss model with log-normal shadowing and a handover hysteresis margin.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np

from .topology import TopologyGraph

logger = logging.getLogger(__name__)

_SHADOW_SALT = 0x5AD0


class TraceFormatError(ValueError):
    """Malformed trace line in strict mode."""


class TraceOrderError(ValueError):
    """Trace timestamps are not non-decreasing."""


@dataclass(frozen=True)
class TraceEntry:
    t: float
    vehicle_id: str
    x: float
    y: float
    speed: float


@dataclass(frozen=True)
class RadioParams:
    """NLOS urban path-loss and handover parameters (defaults: 28 GHz fit)."""

    alpha_pl: float = 46.61
    beta_pl: float = 3.63
    sigma_pl: float = 9.83
    epsilon_hys: float = 2.0

    def __post_init__(self):
        if self.beta_pl <= 0:
            raise ValueError("beta_pl must be positive")
        if self.sigma_pl < 0 or self.epsilon_hys < 0:
            raise ValueError("sigma_pl and epsilon_hys must be non-negative")


@dataclass
class SlotFrame:
    """One time slot: positions, real connections X, predicted connections X-hat."""

    slot_index: int
    positions: dict[str, tuple[float, float]]
    connections: dict[str, int]
    predicted_connections: dict[str, int]


@dataclass
class ParseStats:
    lines: int = 0
    parsed: int = 0
    malformed: int = 0


def parse_trace(stream, strict: bool = False, stats: ParseStats | None = None):
    """Yield TraceEntry records from a text stream, skipping malformed lines.

    Memory is constant in the trace length. Malformed lines are counted in
    `stats` and logged; in strict mode the first one raises TraceFormatError.
    """
    own_stats = stats if stats is not None else ParseStats()
    for lineno, line in enumerate(stream, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        own_stats.lines += 1
        parts = text.split()
        entry = None
        if len(parts) == 5:
            try:
                t, x, y, speed = float(parts[0]), float(parts[2]), float(parts[3]), float(parts[4])
                if t >= 0 and math.isfinite(x) and math.isfinite(y):
                    entry = TraceEntry(t, parts[1], x, y, speed)
            except ValueError:
                pass
        if entry is None:
            if strict:
                raise TraceFormatError(f"line {lineno}: malformed trace record: {text!r}")
            own_stats.malformed += 1
            if own_stats.malformed <= 5:
                logger.warning("skipping malformed trace line %d: %r", lineno, text)
            continue
        own_stats.parsed += 1
        yield entry
    if own_stats.malformed:
        logger.warning("skipped %d malformed trace lines total", own_stats.malformed)


def slotify(entries, slot_duration: float):
    """Group entries into (slot_index, {vehicle_id: (x, y)}) mappings.

    Slot k covers [k*slot_duration, (k+1)*slot_duration); the position kept
    per vehicle is its last entry within the slot. Slots between the first and
    last populated ones are emitted even when empty, so downstream state
    carry-over sees a contiguous timeline. Entries must be time-ordered.
    """
    if slot_duration <= 0:
        raise ValueError("slot_duration must be positive")
    current_slot: int | None = None
    current: dict[str, tuple[float, float]] = {}
    last_t = -math.inf
    for e in entries:
        if e.t < last_t:
            raise TraceOrderError(f"timestamp {e.t} after {last_t}: trace is not time-ordered")
        last_t = e.t
        k = int(e.t // slot_duration)
        if current_slot is None:
            current_slot = k
        while k > current_slot:
            yield current_slot, current
            current = {}
            current_slot += 1
        current[e.vehicle_id] = (e.x, e.y)
    if current_slot is not None:
        yield current_slot, current


def path_loss(d: float, params: RadioParams, shadow: float = 0.0) -> float:
    """Path loss in dB at distance d (meters); d below 1 m is clamped to 1 m."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    return params.alpha_pl + 10.0 * params.beta_pl * math.log10(max(d, 1.0)) + shadow


def _vehicle_hash(vehicle_id: str) -> int:
    return int.from_bytes(hashlib.sha256(vehicle_id.encode()).digest()[:8], "big")


@dataclass(frozen=True)
class ShadowingField:
    """Seeded shadowing source: one i.i.d. Gaussian sample per (vehicle, site, slot).

    Samples are a pure function of (seed, slot, vehicle), so the predicted
    connection matrix can reuse exactly the samples drawn for the real one.
    """

    seed: int
    sigma: float

    def samples(self, slot_index: int, vehicle_id: str, n_sites: int) -> np.ndarray:
        if self.sigma == 0.0:
            return np.zeros(n_sites)
        ss = np.random.SeedSequence([self.seed, _SHADOW_SALT, slot_index, _vehicle_hash(vehicle_id)])
        return np.random.default_rng(ss).normal(0.0, self.sigma, n_sites)


def attach(
    positions: dict[str, tuple[float, float]],
    prev_connections: dict[str, int],
    graph: TopologyGraph,
    params: RadioParams,
    shadowing: ShadowingField,
    slot_index: int,
) -> dict[str, int]:
    """Connect each vehicle to a base station (matrix X for one slot).

    New vehicles take the minimum-path-loss site. A previously connected
    vehicle hands over only when the best alternative improves path loss by
    more than `epsilon_hys` dB, else it stays.
    """
    coords = graph.coords
    connections: dict[str, int] = {}
    for vid, (x, y) in positions.items():
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite position for vehicle {vid!r}")
        d = np.maximum(np.hypot(coords[:, 0] - x, coords[:, 1] - y), 1.0)
        pl = params.alpha_pl + 10.0 * params.beta_pl * np.log10(d)
        pl = pl + shadowing.samples(slot_index, vid, graph.n_sites)
        best = int(pl.argmin())
        prev = prev_connections.get(vid)
        if prev is not None and pl[prev] - pl[best] <= params.epsilon_hys:
            best = prev
        connections[vid] = best
    return connections
