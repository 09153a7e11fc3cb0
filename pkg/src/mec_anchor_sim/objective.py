"""Cost model and objective evaluators: latency, deployment and reassignment
overheads, weighted scalarization, and decision constraint checks.

Evaluators iterate their inputs in canonical order (ascending site id,
sorted vehicle id) so results are bit-reproducible across runs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .topology import TopologyGraph


@dataclass(frozen=True)
class CostModel:
    """Costs, weights, and the normalizers mapping each objective into [0, 1].

    `o` is the relocation-cost matrix over all anchors including the core.
    norm_f1 is the graph diameter, norm_f2 is N*max(a, b) over all N nodes,
    norm_f3 is V*max(o) for the current vehicle count V.
    """

    a: float
    b: float
    o: np.ndarray
    alpha1: float
    alpha2: float
    alpha3: float
    n_anchor_points: int
    norm_f1: float
    norm_f2: float
    norm_f3: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("costs a and b must be non-negative")
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise ValueError("alpha weights must be non-negative")
        if abs(self.alpha1 + self.alpha2 + self.alpha3 - 1.0) > 1e-9:
            raise ValueError("alpha weights must sum to 1")
        if min(self.norm_f1, self.norm_f2, self.norm_f3) <= 0:
            raise ValueError("normalizers must be positive")

    @property
    def max_o(self) -> float:
        return float(self.o.max())

    @classmethod
    def build(
        cls,
        graph: TopologyGraph,
        n_anchor_points: int,
        alphas: tuple[float, float, float] = (0.5, 0.25, 0.25),
        a: float = 1.0,
        b: float = 0.1,
        n_vehicles: int = 1,
    ) -> "CostModel":
        if not 1 <= n_anchor_points <= graph.n_sites:
            raise ValueError(f"n_anchor_points must be in [1, {graph.n_sites}]")
        o = graph.relocation
        return cls(
            a=a,
            b=b,
            o=o,
            alpha1=alphas[0],
            alpha2=alphas[1],
            alpha3=alphas[2],
            n_anchor_points=n_anchor_points,
            norm_f1=graph.diameter,
            norm_f2=graph.n_nodes * max(a, b),
            norm_f3=max(n_vehicles, 1) * float(o.max()),
        )

    def with_vehicle_count(self, n_vehicles: int) -> "CostModel":
        return dataclasses.replace(self, norm_f3=max(n_vehicles, 1) * self.max_o)


@dataclass(frozen=True)
class NetworkState:
    """Carried between slots: deployed edge anchors y and vehicle assignments Z."""

    deployed: frozenset[int]
    assignments: dict[str, int]


@dataclass(frozen=True)
class Decision:
    """A strategy's output: scheduled deployments y' and assignments Z'."""

    deployed_next: frozenset[int]
    assignments_next: dict[str, int]


def nearest_rank_p90(values) -> float:
    """Nearest-rank 90th percentile: the ceil(0.9*n)-th smallest value."""
    vals = sorted(values)
    if not vals:
        raise ValueError("p90 of an empty sample")
    rank = (9 * len(vals) + 9) // 10  # ceil(0.9*n) without float error
    return vals[rank - 1]


def latency_objective(
    connections: dict[str, int],
    assignments: dict[str, int],
    latency: np.ndarray,
    mode: str = "p90",
) -> float:
    """Per-vehicle latency between attachment site and serving anchor, aggregated.

    `p90` is the reported metric; `mean` backs strategy-internal scoring.
    Returns 0 for an empty vehicle set.
    """
    if mode not in ("p90", "mean"):
        raise ValueError(f"unknown latency mode {mode!r}")
    vals = []
    for vid in sorted(connections):
        if vid not in assignments:
            raise ValueError(f"vehicle {vid!r} has a connection but no assignment")
        vals.append(float(latency[connections[vid], assignments[vid]]))
    for vid in assignments:
        if vid not in connections:
            raise ValueError(f"vehicle {vid!r} has an assignment but no connection")
    if not vals:
        return 0.0
    if mode == "p90":
        return nearest_rank_p90(vals)
    return sum(vals) / len(vals)


def deployment_overhead(deployed: frozenset[int], deployed_next: frozenset[int], a: float, b: float) -> float:
    """Deploy/remove cost between consecutive deployments, summed per site."""
    cost = 0.0
    for site in sorted(deployed | deployed_next):
        if site in deployed_next and site not in deployed:
            cost += a
        elif site in deployed and site not in deployed_next:
            cost += b
    return cost


def reassignment_overhead(assignments: dict[str, int], assignments_next: dict[str, int], o: np.ndarray) -> float:
    """Control-plane relocation cost summed over vehicles present in the new assignment."""
    cost = 0.0
    for vid in sorted(assignments_next):
        if vid not in assignments:
            raise ValueError(f"vehicle {vid!r} missing from previous assignments")
        cost += float(o[assignments[vid], assignments_next[vid]])
    return cost


def scalarize(f1: float, f2: float, f3: float, cost_model: CostModel) -> float:
    """Normalized linear weighted scalarization of the three objectives."""
    cm = cost_model
    return cm.alpha1 * f1 / cm.norm_f1 + cm.alpha2 * f2 / cm.norm_f2 + cm.alpha3 * f3 / cm.norm_f3


def validate_decision(
    decision: Decision,
    vehicles,
    cost_model: CostModel,
    core: int,
    exempt_cardinality: bool = False,
) -> list[str]:
    """Check assignment unicity, deployment coverage, and deployment cardinality.

    Returns one message per violation; empty means the decision is feasible.
    The centralized strategy is exempt from the cardinality constraint.
    """
    violations: list[str] = []
    vehicles = set(vehicles)
    for vid in sorted(vehicles):
        if vid not in decision.assignments_next:
            violations.append(f"unicity: vehicle {vid!r} has no anchor assignment")
    for vid in sorted(decision.assignments_next):
        if vid not in vehicles:
            violations.append(f"unicity: assignment for unknown vehicle {vid!r}")
            continue
        anchor = decision.assignments_next[vid]
        if anchor != core and anchor not in decision.deployed_next:
            violations.append(f"coverage: vehicle {vid!r} assigned to undeployed site {anchor}")
    if not exempt_cardinality and len(decision.deployed_next) != cost_model.n_anchor_points:
        violations.append(
            f"cardinality: {len(decision.deployed_next)} deployments scheduled,"
            f" expected {cost_model.n_anchor_points}"
        )
    return violations
