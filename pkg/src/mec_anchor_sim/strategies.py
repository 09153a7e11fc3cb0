"""Deployment and assignment strategies.

Every strategy maps (previous state, predicted connections, slot) to a
Decision with exactly `n_anchor_points` deployed sites (the centralized
baseline deploys none and serves everything from the core). All tie-breaks
are by lowest site id / lexicographic subset so runs are reproducible.
"""

from __future__ import annotations

import itertools
from enum import Enum

import numpy as np

from .objective import CostModel, Decision, NetworkState, deployment_overhead
from .topology import TopologyGraph

_SALT_STATIC = 0x57A7
_SALT_RANDOM = 0xAD0
_SALT_CLUSTER = 0xC1
ORACLE_MAX_SITES = 12
ORACLE_MAX_ANCHORS = 4


class StrategyKind(str, Enum):
    CENTRALIZED = "centralized"
    STATIC_KMEANS = "static_kmeans"
    RANDOM = "random"
    GREEDY_PERCENTILE = "greedy_percentile"
    GREEDY_AVERAGE = "greedy_average"
    KMEANS = "kmeans"
    KMEANS_GREEDY_AVERAGE = "kmeans_greedy_average"
    MODULARITY_GREEDY_AVERAGE = "modularity_greedy_average"
    OVERHEAD_AWARE = "overhead_aware_greedy_average"
    EXACT_ORACLE = "exact_oracle"


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def assign_closest(deployed, x_hat: dict[str, int], latency: np.ndarray) -> dict[str, int]:
    """Assign each vehicle to the deployed edge anchor closest to its site.

    The core is never a candidate here; latency-minimization strategies serve
    every vehicle from a deployed edge anchor. Ties take the lowest site id.
    """
    anchors = sorted(deployed)
    if not anchors:
        if x_hat:
            raise ValueError("no deployed anchors to assign vehicles to")
        return {}
    by_site = {s: anchors[int(np.argmin(latency[s, anchors]))] for s in sorted(set(x_hat.values()))}
    return {vid: by_site[site] for vid, site in x_hat.items()}


def kmeans_cluster(points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100):
    """Lloyd iteration with k-means++ seeding.

    Stops after `max_iter` rounds or once the largest centroid shift drops
    below 1e-6. An empty cluster is repaired by reseeding its centroid to the
    point farthest from its assigned centroid. Returns (labels, centroids).
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < k:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    centroids = np.empty((k, 2))
    centroids[0] = points[int(rng.integers(n))]
    for c in range(1, k):
        d2 = ((points[:, None, :] - centroids[None, :c, :]) ** 2).sum(axis=2).min(axis=1)
        total = d2.sum()
        probs = d2 / total if total > 0 else None
        centroids[c] = points[int(rng.choice(n, p=probs))]

    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dist = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = dist.argmin(axis=1)
        for c in range(k):
            if not (labels == c).any():
                far = int(dist[np.arange(n), labels].argmax())
                labels[far] = c
                centroids[c] = points[far]
        new_centroids = np.array([points[labels == c].mean(axis=0) for c in range(k)])
        shift = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        if shift < 1e-6:
            break
    return labels, centroids


def louvain_communities(nodes, edges) -> list[list[int]]:
    """Two-phase modularity maximization (resolution 1) over an undirected graph.

    `edges` are (u, v, w) with both endpoints in `nodes`. Nodes are visited in
    ascending id order, so the result is deterministic. A graph with no edges
    yields singleton communities. Communities are returned sorted by their
    smallest member.
    """
    nodes = sorted(nodes)
    if not edges:
        return [[u] for u in nodes]

    weight: dict[int, dict[int, float]] = {u: {} for u in nodes}
    loops: dict[int, float] = {u: 0.0 for u in nodes}
    for u, v, w in edges:
        if u == v:
            loops[u] += w
        else:
            weight[u][v] = weight[u].get(v, 0.0) + w
            weight[v][u] = weight[v].get(u, 0.0) + w
    members: dict[int, list[int]] = {u: [u] for u in nodes}

    while True:
        m = sum(sum(nb.values()) for nb in weight.values()) / 2 + sum(loops.values())
        if m == 0:
            break
        degree = {u: sum(weight[u].values()) + 2 * loops[u] for u in weight}
        comm = {u: u for u in weight}
        comm_degree = dict(degree)

        improved = False
        while True:
            moved = False
            for u in sorted(weight):
                cu = comm[u]
                comm_degree[cu] -= degree[u]
                link_to: dict[int, float] = {}
                for v, w in weight[u].items():
                    link_to[comm[v]] = link_to.get(comm[v], 0.0) + w
                best_c, best_gain = cu, link_to.get(cu, 0.0) / m - comm_degree[cu] * degree[u] / (2 * m * m)
                for c in sorted(link_to):
                    if c == cu:
                        continue
                    gain = link_to[c] / m - comm_degree[c] * degree[u] / (2 * m * m)
                    if gain > best_gain + 1e-12:
                        best_c, best_gain = c, gain
                comm[u] = best_c
                comm_degree[best_c] += degree[u]
                if best_c != cu:
                    moved = improved = True
            if not moved:
                break
        if not improved:
            break

        # aggregate communities into supernodes, keyed by smallest member
        groups: dict[int, list[int]] = {}
        for u in sorted(weight):
            groups.setdefault(comm[u], []).append(u)
        rep = {c: min(min(members[u]) for u in us) for c, us in groups.items()}
        new_members = {rep[c]: [x for u in us for x in members[u]] for c, us in groups.items()}
        new_weight: dict[int, dict[int, float]] = {r: {} for r in new_members}
        new_loops: dict[int, float] = {r: 0.0 for r in new_members}
        node_rep = {u: rep[c] for c, us in groups.items() for u in us}
        for u in weight:
            ru = node_rep[u]
            new_loops[ru] += loops[u]
            for v, w in weight[u].items():
                rv = node_rep[v]
                if ru == rv:
                    new_loops[ru] += w / 2
                else:
                    new_weight[ru][rv] = new_weight[ru].get(rv, 0.0) + w
        weight, loops, members = new_weight, new_loops, new_members

    return sorted((sorted(ms) for ms in members.values()), key=lambda ms: ms[0])


def _site_counts(x_hat: dict[str, int]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for site in x_hat.values():
        counts[site] = counts.get(site, 0) + 1
    return counts


def _weighted_p90(values: np.ndarray, counts: np.ndarray, total: int) -> float:
    rank = (9 * total + 9) // 10
    order = np.argsort(values, kind="stable")
    seen = 0
    for idx in order:
        seen += counts[idx]
        if seen >= rank:
            return float(values[idx])
    raise AssertionError("rank beyond total count")


def _pad_deployment(chosen: list[int], k: int, graph: TopologyGraph, ref: np.ndarray | None) -> list[int]:
    """Top deployment up to k sites with unused ones nearest `ref`, then lowest id."""
    taken = set(chosen)
    rest = [s for s in range(graph.n_sites) if s not in taken]
    if ref is not None:
        d = np.hypot(graph.coords[rest, 0] - ref[0], graph.coords[rest, 1] - ref[1])
        rest = [s for _, s in sorted(zip(d, rest))]
    return chosen + rest[: k - len(chosen)]


class Strategy:
    """Base class; subclasses implement decide()."""

    kind: StrategyKind

    def __init__(self, graph: TopologyGraph, cost_model: CostModel, seed: int = 0):
        self.graph = graph
        self.cost_model = cost_model
        self.seed = seed

    @property
    def k(self) -> int:
        return self.cost_model.n_anchor_points

    def decide(self, state: NetworkState, x_hat: dict[str, int], slot_index: int) -> Decision:
        raise NotImplementedError


class Centralized(Strategy):
    """Single static anchor at the core; no deployments, no reassignments."""

    kind = StrategyKind.CENTRALIZED

    def decide(self, state, x_hat, slot_index):
        core = self.graph.core
        return Decision(frozenset(), {vid: core for vid in x_hat})


class StaticKMeans(Strategy):
    """Fixed deployment from clustering all site coordinates once at startup."""

    kind = StrategyKind.STATIC_KMEANS

    def __init__(self, graph, cost_model, seed=0):
        super().__init__(graph, cost_model, seed)
        rng = _rng(seed, _SALT_STATIC)
        _, centroids = kmeans_cluster(graph.coords, self.k, rng)
        self.deployment = frozenset(_sites_nearest_centroids(centroids, range(graph.n_sites), graph.coords))

    def decide(self, state, x_hat, slot_index):
        return Decision(self.deployment, assign_closest(self.deployment, x_hat, self.graph.latency))


class RandomDeploy(Strategy):
    """Uniform random k-subset of edge sites each slot."""

    kind = StrategyKind.RANDOM

    def decide(self, state, x_hat, slot_index):
        rng = _rng(self.seed, _SALT_RANDOM, slot_index)
        sites = frozenset(int(s) for s in rng.choice(self.graph.n_sites, size=self.k, replace=False))
        return Decision(sites, assign_closest(sites, x_hat, self.graph.latency))


class GreedyLatency(Strategy):
    """Iterative greedy site selection by 90th-percentile or average latency.

    Percentile ties fall back to the lowest average latency, then the lowest
    site id.
    """

    def __init__(self, graph, cost_model, seed=0, metric: str = "average"):
        super().__init__(graph, cost_model, seed)
        if metric not in ("average", "percentile"):
            raise ValueError(f"unknown greedy metric {metric!r}")
        self.metric = metric
        self.kind = (
            StrategyKind.GREEDY_AVERAGE if metric == "average" else StrategyKind.GREEDY_PERCENTILE
        )

    def decide(self, state, x_hat, slot_index):
        chosen = self.select_sites(x_hat)
        return Decision(frozenset(chosen), assign_closest(chosen, x_hat, self.graph.latency))

    def select_sites(self, x_hat: dict[str, int]) -> list[int]:
        counts = _site_counts(x_hat)
        if not counts:
            return list(range(self.k))
        active = sorted(counts)
        n = np.array([counts[s] for s in active], dtype=np.float64)
        total = int(n.sum())
        lat = self.graph.latency[np.ix_(active, range(self.graph.n_sites))]
        cur = np.full(len(active), np.inf)
        chosen: list[int] = []
        available = np.ones(self.graph.n_sites, dtype=bool)
        for _ in range(self.k):
            new = np.minimum(cur[:, None], lat)
            sums = n @ new
            if self.metric == "average":
                masked = np.where(available, sums, np.inf)
                e = int(masked.argmin())
            else:
                best = None
                for cand in range(self.graph.n_sites):
                    if not available[cand]:
                        continue
                    key = (_weighted_p90(new[:, cand], n, total), sums[cand])
                    if best is None or key < best[0]:
                        best = (key, cand)
                e = best[1]
            chosen.append(e)
            available[e] = False
            cur = new[:, e]
        return chosen


def _sites_nearest_centroids(centroids: np.ndarray, candidates, coords: np.ndarray) -> list[int]:
    """Nearest candidate site per centroid; a site already taken by an earlier
    centroid falls through to the next-nearest."""
    candidates = sorted(candidates)
    chosen: list[int] = []
    for c in centroids:
        d = np.hypot(coords[candidates, 0] - c[0], coords[candidates, 1] - c[1])
        for idx in np.argsort(d, kind="stable"):
            site = candidates[int(idx)]
            if site not in chosen:
                chosen.append(site)
                break
    return chosen


class KMeansDeploy(Strategy):
    """Cluster the active sites each slot; deploy at the site nearest each centroid."""

    kind = StrategyKind.KMEANS

    def decide(self, state, x_hat, slot_index):
        active = sorted(set(x_hat.values()))
        if not active:
            sites = list(range(self.k))
            return Decision(frozenset(sites), {})
        rng = _rng(self.seed, _SALT_CLUSTER, slot_index)
        k_eff = min(self.k, len(active))
        _, centroids = kmeans_cluster(self.graph.coords[active], k_eff, rng)
        chosen = _sites_nearest_centroids(centroids, active, self.graph.coords)
        chosen = _pad_deployment(chosen, self.k, self.graph, centroids[-1])
        return Decision(frozenset(chosen), assign_closest(chosen, x_hat, self.graph.latency))


class ClusteredGreedy(Strategy):
    """Cluster active sites, then place one anchor per cluster minimizing the
    average latency of the vehicles attached within that cluster.

    Clustering is K-means on coordinates or Louvain on the active-site induced
    subgraph; Louvain's community count is reconciled to k by keeping the k
    largest communities (merging the rest into the graph-nearest kept one) or
    splitting the largest by K-means until k remain.
    """

    def __init__(self, graph, cost_model, seed=0, clustering: str = "kmeans"):
        super().__init__(graph, cost_model, seed)
        if clustering not in ("kmeans", "louvain"):
            raise ValueError(f"unknown clustering {clustering!r}")
        self.clustering = clustering
        self.kind = (
            StrategyKind.KMEANS_GREEDY_AVERAGE
            if clustering == "kmeans"
            else StrategyKind.MODULARITY_GREEDY_AVERAGE
        )

    def decide(self, state, x_hat, slot_index):
        counts = _site_counts(x_hat)
        active = sorted(counts)
        if not active:
            sites = list(range(self.k))
            return Decision(frozenset(sites), {})
        rng = _rng(self.seed, _SALT_CLUSTER, slot_index)
        if self.clustering == "kmeans":
            clusters = self._kmeans_clusters(active, rng)
        else:
            clusters = self._louvain_clusters(active, rng)
        chosen = [self._cluster_anchor(cluster, counts) for cluster in clusters]
        ref = self.graph.coords[clusters[-1]].mean(axis=0)
        chosen = _pad_deployment(chosen, self.k, self.graph, ref)
        return Decision(frozenset(chosen), assign_closest(chosen, x_hat, self.graph.latency))

    def _kmeans_clusters(self, active: list[int], rng) -> list[list[int]]:
        k_eff = min(self.k, len(active))
        labels, _ = kmeans_cluster(self.graph.coords[active], k_eff, rng)
        clusters = [[active[i] for i in range(len(active)) if labels[i] == c] for c in range(k_eff)]
        return [c for c in clusters if c]

    def _louvain_clusters(self, active: list[int], rng) -> list[list[int]]:
        active_set = set(active)
        edges = [(i, j, w) for i, j, w in self.graph.links if i in active_set and j in active_set]
        clusters = louvain_communities(active, edges)
        lat = self.graph.latency
        while len(clusters) > self.k:
            clusters.sort(key=lambda c: (-len(c), c[0]))
            kept, extra = clusters[: self.k], clusters[self.k :]
            for comm in extra:
                best = min(
                    range(len(kept)),
                    key=lambda i: (min(float(lat[u, v]) for u in comm for v in kept[i]), kept[i][0]),
                )
                kept[best] = sorted(kept[best] + comm)
            clusters = kept
        while len(clusters) < self.k:
            splittable = [c for c in clusters if len(c) >= 2]
            if not splittable:
                break  # all singletons; padding fills the shortfall
            target = max(splittable, key=lambda c: (len(c), -c[0]))
            clusters.remove(target)
            labels, _ = kmeans_cluster(self.graph.coords[target], 2, rng)
            parts = [
                [target[i] for i in range(len(target)) if labels[i] == side] for side in (0, 1)
            ]
            clusters.extend(p for p in parts if p)
        return sorted(clusters, key=lambda c: c[0])

    def _cluster_anchor(self, cluster: list[int], counts: dict[int, int]) -> int:
        lat = self.graph.latency
        best = None
        for cand in cluster:
            cost = sum(counts.get(s, 0) * float(lat[s, cand]) for s in cluster)
            if best is None or cost < best[0]:
                best = (cost, cand)
        return best[1]


class _Groups:
    """Vehicles sharing (predicted site, previous anchor) behave identically,
    so the per-candidate evaluation works on groups instead of vehicles.

    `assignments(anchor_per_group)` expands a per-group anchor choice back to
    the per-vehicle mapping.
    """

    def __init__(self, state: NetworkState, x_hat: dict[str, int], n_anchors: int):
        self.x_hat = x_hat
        v = len(x_hat)
        sites = np.fromiter(x_hat.values(), dtype=np.int64, count=v)
        prev = np.fromiter((state.assignments[vid] for vid in x_hat), dtype=np.int64, count=v)
        codes = sites * n_anchors + prev
        uniq, self._inverse, counts = np.unique(codes, return_inverse=True, return_counts=True)
        self.site = uniq // n_anchors
        self.prev = uniq % n_anchors
        self.count = counts.astype(np.float64)

    def __len__(self) -> int:
        return len(self.site)

    def assignments(self, anchor_per_group: np.ndarray) -> dict[str, int]:
        per_vehicle = anchor_per_group[self._inverse].tolist()
        return dict(zip(self.x_hat.keys(), per_vehicle))


def _per_vehicle_weights(cost_model: CostModel, n_vehicles: int) -> tuple[float, float, float]:
    v = max(n_vehicles, 1)
    w1 = cost_model.alpha1 / (cost_model.norm_f1 * v)
    w2 = cost_model.alpha2 / cost_model.norm_f2
    w3 = cost_model.alpha3 / (cost_model.max_o * v)
    return w1, w2, w3


class OverheadAwareGreedy(Strategy):
    """Greedy average-latency selection that also scores deployment and
    relocation overheads (the normalized weighted objective).

    Each of the k iterations tentatively deploys every remaining site, letting
    each vehicle group either keep its current anchor or relocate to the
    candidate, and commits the candidate (and its keep/relocate choices) with
    the lowest score. Groups still on an anchor that did not make it into the
    deployment, other than the core, are reassigned in a final pass.
    """

    kind = StrategyKind.OVERHEAD_AWARE

    def decide(self, state, x_hat, slot_index):
        graph, cm = self.graph, self.cost_model
        n_sites, core = graph.n_sites, graph.core
        w1, w2, w3 = _per_vehicle_weights(cm, len(x_hat))
        groups = _Groups(state, x_hat, graph.n_nodes)
        edge_ids = np.arange(n_sites)

        relocate = np.zeros((len(groups), n_sites))
        keep = np.zeros(len(groups))
        if len(groups):
            relocate = (
                w1 * graph.latency[np.ix_(groups.site, edge_ids)]
                + w3 * cm.o[np.ix_(groups.prev, edge_ids)]
            )
            keep = w1 * graph.latency[groups.site, groups.prev] + w3 * cm.o[groups.prev, groups.prev]
        current = groups.prev.copy()
        weighted_relocate = groups.count[:, None] * relocate

        in_prev = np.array([s in state.deployed for s in range(n_sites)])
        delta_f2 = np.where(in_prev, -cm.b, cm.a)
        base_f2 = cm.b * len(state.deployed)

        selected: list[int] = []
        available = np.ones(n_sites, dtype=bool)
        for _ in range(self.k):
            score = w2 * (base_f2 + delta_f2)
            if len(groups):
                score = score + np.minimum(
                    (groups.count * keep)[:, None], weighted_relocate
                ).sum(axis=0)
            score = np.where(available, score, np.inf)
            e = int(score.argmin())
            selected.append(e)
            available[e] = False
            base_f2 += delta_f2[e]
            if len(groups):
                moved = relocate[:, e] < keep
                current[moved] = e
                keep[moved] = relocate[moved, e]

        deployed = frozenset(selected)
        if len(groups):
            candidates = np.array(sorted(selected) + [core])
            stranded = (current != core) & ~np.isin(current, list(selected))
            for g in np.flatnonzero(stranded):
                costs = (
                    w1 * graph.latency[groups.site[g], candidates]
                    + w3 * cm.o[groups.prev[g], candidates]
                )
                current[g] = int(candidates[int(costs.argmin())])

        return Decision(deployed, groups.assignments(current))


class ExactOracle(Strategy):
    """Enumerates every k-subset of edge sites and optimally assigns each
    vehicle group over the deployed anchors plus the core, under the same
    mean-latency scalarization the overhead-aware greedy optimizes.

    Guarded to small instances; intended as a test oracle.
    """

    kind = StrategyKind.EXACT_ORACLE

    def decide(self, state, x_hat, slot_index):
        graph, cm = self.graph, self.cost_model
        if graph.n_sites > ORACLE_MAX_SITES or self.k > ORACLE_MAX_ANCHORS:
            raise ValueError(
                f"exact oracle limited to {ORACLE_MAX_SITES} sites and {ORACLE_MAX_ANCHORS} anchors"
            )
        w1, w2, w3 = _per_vehicle_weights(cm, len(x_hat))
        groups = _Groups(state, x_hat, graph.n_nodes)

        best: tuple[float, tuple[int, ...]] | None = None
        for subset in itertools.combinations(range(graph.n_sites), self.k):
            f2 = deployment_overhead(state.deployed, frozenset(subset), cm.a, cm.b)
            score = w2 * f2
            if len(groups):
                candidates = np.array(list(subset) + [graph.core])
                costs = (
                    w1 * graph.latency[np.ix_(groups.site, candidates)]
                    + w3 * cm.o[np.ix_(groups.prev, candidates)]
                )
                score += float((groups.count * costs.min(axis=1)).sum())
            if best is None or score < best[0]:
                best = (score, subset)

        subset = best[1]
        candidates = np.array(list(subset) + [graph.core])
        anchors = np.zeros(len(groups), dtype=np.int64)
        for g in range(len(groups)):
            costs = (
                w1 * graph.latency[groups.site[g], candidates]
                + w3 * cm.o[groups.prev[g], candidates]
            )
            anchors[g] = candidates[int(costs.argmin())]
        return Decision(frozenset(subset), groups.assignments(anchors))


def mean_scalarized_objective(
    graph: TopologyGraph,
    cost_model: CostModel,
    state: NetworkState,
    x_hat: dict[str, int],
    decision: Decision,
) -> float:
    """The mean-latency scalarized objective of a decision, the quantity the
    overhead-aware greedy and the exact oracle both minimize."""
    w1, w2, w3 = _per_vehicle_weights(cost_model, len(x_hat))
    total = w2 * deployment_overhead(state.deployed, decision.deployed_next, cost_model.a, cost_model.b)
    for vid in sorted(x_hat):
        anchor = decision.assignments_next[vid]
        total += w1 * float(graph.latency[x_hat[vid], anchor])
        total += w3 * float(cost_model.o[state.assignments[vid], anchor])
    return total


def make_strategy(kind: StrategyKind | str, graph: TopologyGraph, cost_model: CostModel, seed: int = 0) -> Strategy:
    kind = StrategyKind(kind)
    if kind is StrategyKind.CENTRALIZED:
        return Centralized(graph, cost_model, seed)
    if kind is StrategyKind.STATIC_KMEANS:
        return StaticKMeans(graph, cost_model, seed)
    if kind is StrategyKind.RANDOM:
        return RandomDeploy(graph, cost_model, seed)
    if kind is StrategyKind.GREEDY_PERCENTILE:
        return GreedyLatency(graph, cost_model, seed, metric="percentile")
    if kind is StrategyKind.GREEDY_AVERAGE:
        return GreedyLatency(graph, cost_model, seed, metric="average")
    if kind is StrategyKind.KMEANS:
        return KMeansDeploy(graph, cost_model, seed)
    if kind is StrategyKind.KMEANS_GREEDY_AVERAGE:
        return ClusteredGreedy(graph, cost_model, seed, clustering="kmeans")
    if kind is StrategyKind.MODULARITY_GREEDY_AVERAGE:
        return ClusteredGreedy(graph, cost_model, seed, clustering="louvain")
    if kind is StrategyKind.OVERHEAD_AWARE:
        return OverheadAwareGreedy(graph, cost_model, seed)
    if kind is StrategyKind.EXACT_ORACLE:
        return ExactOracle(graph, cost_model, seed)
    raise ValueError(f"unknown strategy kind {kind!r}")  # pragma: no cover
