"""Time-slotted simulation loop.

Builds per-slot frames (real and predicted connections), runs a strategy,
carries state between slots (y' -> y, Z' -> Z), and evaluates the reported
metrics on the real connection matrix. Everything streams: memory is
independent of trace length.
"""

from __future__ import annotations

import bz2
import gzip
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np
from scipy import stats

from . import mobility, prediction
from .mobility import RadioParams, ShadowingField, SlotFrame
from .objective import (
    CostModel,
    Decision,
    NetworkState,
    deployment_overhead,
    latency_objective,
    reassignment_overhead,
    scalarize,
    validate_decision,
)
from .strategies import Strategy, StrategyKind, make_strategy
from .topology import build_graph, load_sites

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid run configuration."""


class ConstraintViolationError(RuntimeError):
    """A strategy produced an infeasible decision (strict mode)."""


@dataclass(frozen=True)
class SlotMetrics:
    slot_index: int
    f1_p90: float
    f1_mean: float
    f2: float
    f3: float
    scalarized: float
    strategy_runtime_ms: float
    vehicle_count: int
    handover_count: int


@dataclass(frozen=True)
class SlotResult:
    """Everything observable about one simulated slot, for audits and logs."""

    frame: SlotFrame
    metrics: SlotMetrics
    state_before: NetworkState
    state_after: NetworkState

    @property
    def decision(self) -> Decision:
        return Decision(self.state_after.deployed, self.state_after.assignments)


@dataclass
class RunConfig:
    """Inputs of one simulation run; defaults follow the evaluation setup."""

    trace: str
    stations: str
    strategy: str
    n_anchor_points: int
    alpha1: float = 0.5
    alpha2: float = 0.25
    alpha3: float = 0.25
    slot_duration: float = 5.0
    d_threshold: float = 500.0
    sigma: float = 9.83
    hysteresis: float = 2.0
    alpha_pl: float = 46.61
    beta_pl: float = 3.63
    deploy_cost: float = 1.0
    removal_cost: float = 0.1
    predictor: str = "naive"
    seed: int = 0
    slot_first: int | None = None
    slot_last: int | None = None
    core_attach: int | None = None
    core_weight: float = 1.0
    lenient: bool = False
    measure_runtime: bool = True

    def validate(self) -> None:
        try:
            StrategyKind(self.strategy)
        except ValueError:
            raise ConfigError(f"unknown strategy {self.strategy!r}") from None
        if self.n_anchor_points < 1:
            raise ConfigError("n_anchor_points must be at least 1")
        if abs(self.alpha1 + self.alpha2 + self.alpha3 - 1.0) > 1e-9:
            raise ConfigError("alpha1 + alpha2 + alpha3 must equal 1")
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise ConfigError("alpha weights must be non-negative")
        if self.slot_duration <= 0:
            raise ConfigError("slot_duration must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if (
            self.slot_first is not None
            and self.slot_last is not None
            and self.slot_first > self.slot_last
        ):
            raise ConfigError("empty slot range")
        if not self.predictor.startswith("file:"):
            try:
                prediction.PredictorKind(self.predictor)
            except ValueError:
                raise ConfigError(f"unknown predictor {self.predictor!r}") from None


def open_trace(path: str):
    """Open a trace file; .gz and .bz2 are decompressed transparently."""
    name = str(path)
    if name.endswith(".gz"):
        return gzip.open(name, "rt", encoding="utf-8")
    if name.endswith(".bz2"):
        return bz2.open(name, "rt", encoding="utf-8")
    return open(name, "r", encoding="utf-8")


def build_frames(
    slots: Iterable[tuple[int, dict[str, tuple[float, float]]]],
    graph,
    params: RadioParams,
    shadowing: ShadowingField,
    predictor: prediction.Predictor,
    slot_first: int | None = None,
    slot_last: int | None = None,
) -> Iterator[SlotFrame]:
    """Turn slotted positions into frames with real and predicted connections.

    A vehicle's first slot has no history, so its predicted position is the
    observed one (the network sees the attachment happen); from the second
    slot on the configured predictor takes over. History is dropped when a
    vehicle leaves, so a reappearing vehicle counts as new.
    """
    history: dict[str, deque] = {}
    prev_conn: dict[str, int] = {}
    for slot_index, positions in slots:
        if slot_last is not None and slot_index > slot_last:
            break
        if slot_first is not None and slot_index < slot_first:
            continue
        connections = mobility.attach(positions, prev_conn, graph, params, shadowing, slot_index)
        continuing = {vid: list(history[vid]) for vid in positions if vid in history}
        predicted_pos = prediction.predict_positions(
            continuing, slot_index, predictor, actual_positions=positions
        )
        for vid, pos in positions.items():
            predicted_pos.setdefault(vid, pos)
        predicted = prediction.predicted_connections(
            predicted_pos, prev_conn, graph, params, shadowing, slot_index
        )
        yield SlotFrame(slot_index, positions, connections, predicted)

        for vid, pos in positions.items():
            history.setdefault(vid, deque(maxlen=2)).append(pos)
        for vid in [v for v in history if v not in positions]:
            del history[vid]
        prev_conn = connections


def step(
    state: NetworkState,
    frame: SlotFrame,
    strategy: Strategy,
    cost_model: CostModel,
    prev_connections: dict[str, int] | None = None,
    strict: bool = True,
    measure_runtime: bool = True,
) -> tuple[NetworkState, SlotMetrics]:
    """Advance one slot: decide on X-hat, evaluate metrics on the real X.

    Vehicles appearing this slot enter the previous assignment at the core
    and are pinned there for the slot regardless of the strategy's output;
    departed vehicles are pruned from the next state at no cost.
    """
    graph = strategy.graph
    core = graph.core
    new_vids = [vid for vid in frame.connections if vid not in state.assignments]
    z_prev = dict(state.assignments)
    for vid in new_vids:
        z_prev[vid] = core
    state_in = NetworkState(state.deployed, z_prev)

    if measure_runtime:
        t0 = time.perf_counter()
        decision = strategy.decide(state_in, frame.predicted_connections, frame.slot_index)
        runtime_ms = (time.perf_counter() - t0) * 1000.0
    else:
        decision = strategy.decide(state_in, frame.predicted_connections, frame.slot_index)
        runtime_ms = 0.0

    assignments_next = dict(decision.assignments_next)
    for vid in new_vids:
        assignments_next[vid] = core
    decision = Decision(decision.deployed_next, assignments_next)

    violations = validate_decision(
        decision,
        frame.connections.keys(),
        cost_model,
        core,
        exempt_cardinality=strategy.kind is StrategyKind.CENTRALIZED,
    )
    if violations:
        if strict:
            raise ConstraintViolationError(
                f"slot {frame.slot_index}: " + "; ".join(violations)
            )
        for v in violations:
            logger.warning("slot %d: %s", frame.slot_index, v)

    f1_p90 = latency_objective(frame.connections, assignments_next, graph.latency, "p90")
    f1_mean = latency_objective(frame.connections, assignments_next, graph.latency, "mean")
    f2 = deployment_overhead(state.deployed, decision.deployed_next, cost_model.a, cost_model.b)
    f3 = reassignment_overhead(z_prev, assignments_next, cost_model.o)
    handovers = 0
    if prev_connections:
        handovers = sum(
            1
            for vid, site in frame.connections.items()
            if vid in prev_connections and prev_connections[vid] != site
        )
    metrics = SlotMetrics(
        slot_index=frame.slot_index,
        f1_p90=f1_p90,
        f1_mean=f1_mean,
        f2=f2,
        f3=f3,
        scalarized=scalarize(f1_p90, f2, f3, cost_model),
        strategy_runtime_ms=runtime_ms,
        vehicle_count=len(frame.connections),
        handover_count=handovers,
    )
    return NetworkState(decision.deployed_next, assignments_next), metrics


def simulate(
    frames: Iterable[SlotFrame],
    strategy: Strategy,
    base_cost_model: CostModel,
    strict: bool = True,
    measure_runtime: bool = True,
) -> Iterator[SlotResult]:
    """Run the slot loop from a cold start (no deployments, everything at core)."""
    state = NetworkState(frozenset(), {})
    prev_conn: dict[str, int] | None = None
    for frame in frames:
        cost_model = base_cost_model.with_vehicle_count(len(frame.connections))
        next_state, metrics = step(
            state,
            frame,
            strategy,
            cost_model,
            prev_connections=prev_conn,
            strict=strict,
            measure_runtime=measure_runtime,
        )
        yield SlotResult(frame, metrics, state, next_state)
        state = next_state
        prev_conn = frame.connections


_SUMMARY_FIELDS = (
    "f1_p90",
    "f1_mean",
    "f2",
    "f3",
    "scalarized",
    "strategy_runtime_ms",
    "vehicle_count",
    "handover_count",
)


def summarize(metrics: list[SlotMetrics]) -> dict[str, tuple[float, float]] | None:
    """Mean and 95% confidence half-width per metric across slots; None if no slots."""
    if not metrics:
        return None
    out: dict[str, tuple[float, float]] = {}
    for name in _SUMMARY_FIELDS:
        vals = np.array([getattr(m, name) for m in metrics], dtype=np.float64)
        mean = float(vals.mean())
        if len(vals) >= 2 and vals.std(ddof=1) > 0:
            half = float(stats.t.ppf(0.975, len(vals) - 1) * vals.std(ddof=1) / np.sqrt(len(vals)))
        else:
            half = 0.0
        out[name] = (mean, half)
    return out


@dataclass
class RunResult:
    config: RunConfig
    metrics: list[SlotMetrics] = field(default_factory=list)
    summary: dict[str, tuple[float, float]] | None = None


def run_simulation(config: RunConfig, on_slot: Callable[[SlotResult], None] | None = None) -> RunResult:
    """Execute a full run from files per `config`; deterministic given the seed."""
    config.validate()
    sites = load_sites(config.stations)
    graph = build_graph(
        sites,
        config.d_threshold,
        core_attach=config.core_attach,
        core_link_weight=config.core_weight,
    )
    cost_model = CostModel.build(
        graph,
        config.n_anchor_points,
        alphas=(config.alpha1, config.alpha2, config.alpha3),
        a=config.deploy_cost,
        b=config.removal_cost,
    )
    params = RadioParams(
        alpha_pl=config.alpha_pl,
        beta_pl=config.beta_pl,
        sigma_pl=config.sigma,
        epsilon_hys=config.hysteresis,
    )
    shadowing = ShadowingField(config.seed, config.sigma)
    predictor = prediction.make_predictor(config.predictor)
    strategy = make_strategy(config.strategy, graph, cost_model, config.seed)

    result = RunResult(config)
    with open_trace(config.trace) as stream:
        entries = mobility.parse_trace(stream, strict=not config.lenient)
        slots = mobility.slotify(entries, config.slot_duration)
        frames = build_frames(
            slots, graph, params, shadowing, predictor, config.slot_first, config.slot_last
        )
        for slot_result in simulate(
            frames,
            strategy,
            cost_model,
            strict=not config.lenient,
            measure_runtime=config.measure_runtime,
        ):
            result.metrics.append(slot_result.metrics)
            if on_slot is not None:
                on_slot(slot_result)
    result.summary = summarize(result.metrics)
    if result.summary is None:
        logger.warning("trace produced no slots; summary undefined")
    return result


def sweep(configs: list[RunConfig], jobs: int | None = None):
    """Run several configs (independently, optionally in parallel) and join
    their summaries. Returns (rows, errors); a failed config contributes to
    `errors` and the remaining rows are kept."""
    rows: list[dict] = []
    errors: list[tuple[int, str]] = []
    if jobs is None or jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {i: pool.submit(_sweep_worker, c) for i, c in enumerate(configs)}
            for i in sorted(futures):
                try:
                    rows.append(futures[i].result())
                except Exception as exc:  # noqa: BLE001 - per-config isolation
                    errors.append((i, str(exc)))
    else:
        for i, config in enumerate(configs):
            try:
                rows.append(_sweep_worker(config))
            except Exception as exc:  # noqa: BLE001
                errors.append((i, str(exc)))
    rows.sort(key=lambda r: (r["strategy"], r["n_anchor_points"], r["alpha1"], r["seed"]))
    return rows, errors


def _sweep_worker(config: RunConfig) -> dict:
    result = run_simulation(config)
    row = {
        "strategy": config.strategy,
        "n_anchor_points": config.n_anchor_points,
        "alpha1": config.alpha1,
        "alpha2": config.alpha2,
        "alpha3": config.alpha3,
        "seed": config.seed,
        "slots": len(result.metrics),
        "summary": result.summary,
    }
    return row
