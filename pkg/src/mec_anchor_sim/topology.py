"""Backhaul topology: neighborhood graph construction and shortest-path matrices.

Node ids are dense: edge sites occupy 0..E-1 in input order, the core node is
appended as id E. All matrices are (E+1) x (E+1) and cover the core.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class DisconnectedGraphError(RuntimeError):
    """Raised when a shortest-path query hits an unreachable node pair."""


@dataclass(frozen=True)
class Site:
    """A base station location able to host an anchor point."""

    id: int
    x: float
    y: float


@dataclass(frozen=True)
class TopologyGraph:
    """Immutable backhaul graph over edge sites plus the core node.

    `latency[i, j]` is the weight sum along a shortest path; `relocation[i, j]`
    is the number of links on that path (equal to `latency` under unit
    weights). Safe to share read-only across workers.
    """

    sites: tuple[Site, ...]
    core: int
    core_attach: int
    links: tuple[tuple[int, int, float], ...]
    coords: np.ndarray
    latency: np.ndarray
    relocation: np.ndarray
    diameter: float

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_nodes(self) -> int:
        return len(self.sites) + 1


def load_sites(path) -> list[Site]:
    """Read base stations from a text file with `id x y` records.

    Fields may be whitespace- or comma-separated; lines starting with `#` are
    ignored. Sites are reindexed 0..n-1 in ascending order of their file ids.
    """
    raw: list[tuple[int, float, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.replace(",", " ").split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected `id x y`, got {len(parts)} fields")
            raw.append((int(float(parts[0])), float(parts[1]), float(parts[2])))
    if not raw:
        raise ValueError(f"{path}: no station records")
    ids = [r[0] for r in raw]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate station ids")
    raw.sort(key=lambda r: r[0])
    return [Site(i, x, y) for i, (_, x, y) in enumerate(raw)]


def build_graph(
    sites,
    d_threshold: float,
    core_attach: int | None = None,
    core_link_weight: float = 1.0,
    link_weight: float = 1.0,
) -> TopologyGraph:
    """Build the connected backhaul graph from site coordinates.

    Phase 1 links every site pair closer than `d_threshold` (strict `<`).
    Phase 2 repeatedly joins the largest and second-largest connected
    components through their closest cross pair until one component remains.
    The core node is then attached to `core_attach` (default: the graph
    center, the site of minimum eccentricity) with weight `core_link_weight`.
    """
    sites = tuple(sites)
    if not sites:
        raise ValueError("need at least one site")
    n = len(sites)
    coords = np.array([[s.x, s.y] for s in sites], dtype=np.float64)
    if not np.isfinite(coords).all():
        raise ValueError("non-finite site coordinate")
    if d_threshold <= 0:
        raise ValueError("d_threshold must be positive")
    if len(np.unique(coords, axis=0)) != n:
        logger.warning("duplicate site coordinates present")

    links: list[tuple[int, int, float]] = []
    dist = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] < d_threshold:
                links.append((i, j, link_weight))

    links.extend((i, j, link_weight) for i, j in _merge_components(n, links, dist))

    if core_attach is None:
        core_attach = _graph_center(n, links)
    elif not 0 <= core_attach < n:
        raise ValueError(f"core_attach {core_attach} out of range")
    if core_link_weight <= 0:
        raise ValueError("core_link_weight must be positive")
    core = n
    links.append((core_attach, core, core_link_weight))

    latency, relocation = _shortest_path_matrices(n + 1, links)
    return TopologyGraph(
        sites=sites,
        core=core,
        core_attach=core_attach,
        links=tuple(links),
        coords=coords,
        latency=latency,
        relocation=relocation,
        diameter=float(latency.max()),
    )


def _merge_components(n: int, links, dist: np.ndarray) -> list[tuple[int, int]]:
    """Links joining largest/second-largest components at minimum distance.

    Component size ties break on the smallest contained site id; distance ties
    on the lexicographically lowest (i, j) pair.
    """
    comp = list(range(n))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for i, j, _ in links:
        comp[find(i)] = find(j)

    added: list[tuple[int, int]] = []
    while True:
        groups: dict[int, list[int]] = {}
        for v in range(n):
            groups.setdefault(find(v), []).append(v)
        if len(groups) == 1:
            return added
        ordered = sorted(groups.values(), key=lambda g: (-len(g), min(g)))
        a, b = ordered[0], ordered[1]
        best = None
        for i in a:
            for j in b:
                pair = (min(i, j), max(i, j))
                key = (dist[i, j], pair)
                if best is None or key < best:
                    best = key
        _, (i, j) = best
        added.append((i, j))
        comp[find(i)] = find(j)


def _graph_center(n: int, links) -> int:
    """Site minimizing eccentricity on the site-only graph; ties take the lowest id."""
    latency, _ = _shortest_path_matrices(n, links)
    ecc = latency.max(axis=1)
    return int(ecc.argmin())


def _shortest_path_matrices(n_nodes: int, links) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs (weight-sum, link-count) via Dijkstra with (dist, hops) keys.

    Among equal-weight paths the one with fewest links wins, so the relocation
    matrix is well defined for non-unit weights too.
    """
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n_nodes)]
    for i, j, w in links:
        if w <= 0:
            raise ValueError(f"non-positive link weight on ({i}, {j})")
        adj[i].append((j, w))
        adj[j].append((i, w))

    latency = np.full((n_nodes, n_nodes), np.inf)
    hops = np.full((n_nodes, n_nodes), np.inf)
    for src in range(n_nodes):
        d = [math.inf] * n_nodes
        h = [math.inf] * n_nodes
        d[src], h[src] = 0.0, 0
        heap = [(0.0, 0, src)]
        while heap:
            du, hu, u = heapq.heappop(heap)
            if (du, hu) > (d[u], h[u]):
                continue
            for v, w in adj[u]:
                cand = (du + w, hu + 1)
                if cand < (d[v], h[v]):
                    d[v], h[v] = cand
                    heapq.heappush(heap, (cand[0], cand[1], v))
        latency[src] = d
        hops[src] = h

    if not np.isfinite(latency).all():
        raise DisconnectedGraphError("graph is not connected")
    return latency, hops


def all_pairs_latency(graph: TopologyGraph) -> tuple[np.ndarray, float]:
    """Latency matrix (weight sums along shortest paths) and graph diameter."""
    latency, _ = _shortest_path_matrices(graph.n_nodes, graph.links)
    return latency, float(latency.max())


def relocation_cost_matrix(graph: TopologyGraph) -> np.ndarray:
    """Per-pair relocation cost: number of links on a shortest path."""
    _, hops = _shortest_path_matrices(graph.n_nodes, graph.links)
    return hops


def export_edges_csv(graph: TopologyGraph, fh) -> None:
    fh.write("i,j,w\n")
    for i, j, w in graph.links:
        fh.write(f"{i},{j},{w!r}\n")


def export_sites_csv(graph: TopologyGraph, fh) -> None:
    fh.write("id,x,y,is_core\n")
    for s in graph.sites:
        fh.write(f"{s.id},{s.x!r},{s.y!r},0\n")
    core_site = graph.sites[graph.core_attach]
    fh.write(f"{graph.core},{core_site.x!r},{core_site.y!r},1\n")
