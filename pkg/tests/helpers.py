"""Shared test fixtures: independent oracles and instance generators.

The oracles here intentionally re-derive results from first principles
(plain loops, no reuse of library internals) so library code is checked
against a second route.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from mec_anchor_sim.mobility import TraceEntry
from mec_anchor_sim.objective import CostModel, NetworkState
from mec_anchor_sim.topology import Site, TopologyGraph, build_graph


def dijkstra_oracle(n_nodes: int, links, source: int) -> list[float]:
    """Independent single-source shortest-path weights (plain heap Dijkstra)."""
    adj = {u: [] for u in range(n_nodes)}
    for i, j, w in links:
        adj[i].append((j, w))
        adj[j].append((i, w))
    dist = [math.inf] * n_nodes
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return dist


def bfs_hops_oracle(n_nodes: int, links, source: int) -> list[float]:
    """Independent hop counts for unit-weight reachability."""
    adj = {u: [] for u in range(n_nodes)}
    for i, j, _ in links:
        adj[i].append(j)
        adj[j].append(i)
    hops = [math.inf] * n_nodes
    hops[source] = 0
    queue = [source]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if hops[v] == math.inf:
                    hops[v] = hops[u] + 1
                    nxt.append(v)
        queue = nxt
    return hops


def naive_f1_p90(x_matrix, z_matrix, latency) -> float:
    """Literal 90th-percentile latency over binary connection/assignment matrices."""
    v_count, e_count = x_matrix.shape
    per_vehicle = []
    for i in range(v_count):
        lat = 0.0
        for j in range(e_count):
            for k in range(z_matrix.shape[1]):
                lat += x_matrix[i][j] * z_matrix[i][k] * latency[j][k]
        per_vehicle.append(lat)
    per_vehicle.sort()
    rank = math.ceil(9 * v_count / 10)
    return per_vehicle[rank - 1]


def naive_f2(y_vec, y_next_vec, a: float, b: float) -> float:
    cost = 0.0
    for i in range(len(y_vec)):
        cost += max(y_next_vec[i] - y_vec[i], 0) * a + max(y_vec[i] - y_next_vec[i], 0) * b
    return cost


def naive_f3(z_matrix, z_next_matrix, o) -> float:
    cost = 0.0
    for i in range(z_matrix.shape[0]):
        for j in range(z_matrix.shape[1]):
            for k in range(z_next_matrix.shape[1]):
                cost += z_matrix[i][j] * z_next_matrix[i][k] * o[j][k]
    return cost


def naive_scalarized(f1, f2, f3, alpha1, alpha2, alpha3, norm1, norm2, norm3) -> float:
    return alpha1 * f1 / norm1 + alpha2 * f2 / norm2 + alpha3 * f3 / norm3


def random_sites(rng: np.random.Generator, n: int, span: float = 2000.0) -> list[Site]:
    coords = rng.uniform(0.0, span, size=(n, 2))
    return [Site(i, float(x), float(y)) for i, (x, y) in enumerate(coords)]


def random_graph(rng: np.random.Generator, n_sites: int, span: float = 2000.0) -> TopologyGraph:
    """A connected random graph: sparse neighborhoods plus forced merges."""
    sites = random_sites(rng, n_sites, span)
    threshold = span / max(n_sites ** 0.5, 1.5)
    return build_graph(sites, d_threshold=threshold)


def random_instance(
    rng: np.random.Generator,
    n_sites: int,
    n_vehicles: int,
    k: int,
    alphas=(0.5, 0.25, 0.25),
    cold_start: bool = False,
):
    """A feasible (graph, cost_model, state, x_hat) tuple for strategy tests.

    The previous state deploys a random k-subset; vehicles sit either on a
    deployed anchor or the core, so the state satisfies the coverage rule.
    """
    graph = random_graph(rng, n_sites)
    cost_model = CostModel.build(graph, k, alphas=alphas, n_vehicles=n_vehicles)
    x_hat = {f"v{i}": int(rng.integers(graph.n_sites)) for i in range(n_vehicles)}
    if cold_start:
        state = NetworkState(frozenset(), {vid: graph.core for vid in x_hat})
    else:
        deployed = frozenset(int(s) for s in rng.choice(graph.n_sites, size=k, replace=False))
        anchors = sorted(deployed) + [graph.core]
        state = NetworkState(
            deployed, {vid: int(anchors[rng.integers(len(anchors))]) for vid in x_hat}
        )
    return graph, cost_model.with_vehicle_count(n_vehicles), state, x_hat


def grid_sites(side: int = 5, pitch: float = 400.0) -> list[Site]:
    return [
        Site(r * side + c, c * pitch, r * pitch) for r in range(side) for c in range(side)
    ]


def linear_motion_trace(
    rng: np.random.Generator,
    n_vehicles: int = 200,
    n_slots: int = 20,
    slot_duration: float = 5.0,
    area: float = 1600.0,
    speed_range=(8.0, 15.0),
) -> list[TraceEntry]:
    """Vehicles moving in straight lines, bouncing off the area borders.

    One entry per vehicle per slot, timestamps ordered.
    """
    pos = rng.uniform(0.0, area, size=(n_vehicles, 2))
    angle = rng.uniform(0.0, 2 * math.pi, size=n_vehicles)
    speed = rng.uniform(*speed_range, size=n_vehicles)
    vel = np.stack([np.cos(angle), np.sin(angle)], axis=1) * speed[:, None]
    entries: list[TraceEntry] = []
    for slot in range(n_slots):
        t = slot * slot_duration
        for i in range(n_vehicles):
            entries.append(
                TraceEntry(t, f"veh{i:03d}", float(pos[i, 0]), float(pos[i, 1]), float(speed[i]))
            )
        pos = pos + vel * slot_duration
        for axis in (0, 1):
            over = pos[:, axis] > area
            under = pos[:, axis] < 0.0
            pos[over, axis] = 2 * area - pos[over, axis]
            vel[over, axis] *= -1
            pos[under, axis] = -pos[under, axis]
            vel[under, axis] *= -1
    return entries


def write_trace(path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.t} {e.vehicle_id} {e.x} {e.y} {e.speed}\n")


def write_stations(path, sites) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sites:
            fh.write(f"{s.id} {s.x} {s.y}\n")
