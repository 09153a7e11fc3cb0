"""Trace-driven simulator for anchor-point deployment and vehicle assignment
at edge sites, minimizing latency against reconfiguration overheads."""

from .mobility import RadioParams, ShadowingField, SlotFrame, TraceEntry
from .objective import CostModel, Decision, NetworkState
from .prediction import Predictor, PredictorKind, make_predictor
from .simulator import RunConfig, SlotMetrics, run_simulation, simulate, step, sweep
from .strategies import StrategyKind, make_strategy
from .topology import Site, TopologyGraph, build_graph, load_sites

__version__ = "0.1.0"

__all__ = [
    "CostModel",
    "Decision",
    "NetworkState",
    "Predictor",
    "PredictorKind",
    "RadioParams",
    "RunConfig",
    "ShadowingField",
    "Site",
    "SlotFrame",
    "SlotMetrics",
    "StrategyKind",
    "TopologyGraph",
    "TraceEntry",
    "build_graph",
    "load_sites",
    "make_predictor",
    "make_strategy",
    "run_simulation",
    "simulate",
    "step",
    "sweep",
    "__version__",
]
