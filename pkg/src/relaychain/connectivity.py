"""Communication graph, hop-by-hop route learning and chain detection.

Node numbering inside a graph of ``n`` robots: robots are ``0..n-1``, HOME is
``n`` and SINK is ``n + 1``. A route is a tuple of node ids that starts at an
endpoint and ends at the robot owning it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

Route = tuple[int, ...]


@dataclass
class CommGraph:
    n_robots: int
    dist: np.ndarray  # (n + 2, n + 2) Euclidean distances
    adj: list[list[bool]]
    neighbors: list[list[int]]

    @property
    def home(self) -> int:
        return self.n_robots

    @property
    def sink(self) -> int:
        return self.n_robots + 1


@dataclass
class ChainStatus:
    lhr: Route = ()
    member_flags: list[bool] = field(default_factory=list)
    in_optimal_range_flags: list[bool] = field(default_factory=list)

    @property
    def hop_count(self) -> int:
        return max(len(self.lhr) - 1, 0)


def build_graph(points: np.ndarray, comm_range: float) -> CommGraph:
    """Closed-ball unit-disk graph over ``points`` whose last two rows are
    HOME and SINK."""
    points = np.asarray(points, dtype=float)
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    within = dist <= comm_range
    np.fill_diagonal(within, False)
    adj = within.tolist()
    neighbors = [[j for j, linked in enumerate(row) if linked] for row in adj]
    return CommGraph(len(points) - 2, dist, adj, neighbors)


def rebuild_graph(world) -> CommGraph:
    return build_graph(world.node_positions(), world.cfg.comm_range)


def is_valid_route(route: Optional[Route], graph: CommGraph) -> bool:
    if not route:
        return False
    adj = graph.adj
    return all(adj[a][b] for a, b in zip(route, route[1:]))


def propagate_routes(graph: CommGraph, routes: list[Optional[Route]], endpoint: int) -> list[Optional[Route]]:
    """One synchronous relaxation round of the distance-vector style route
    learning towards ``endpoint``.

    Stale routes (any consecutive pair no longer adjacent) are dropped first.
    Then every robot next to the endpoint takes the one-hop route; the others
    extend the shortest route a neighbor held at the start of the round when
    it is strictly shorter than their own. Equal offers keep the lowest
    neighbor id.
    """
    n = graph.n_robots
    adj = graph.adj
    valid = [r if r is not None and is_valid_route(r, graph) else None for r in routes]
    updated = list(valid)
    for i in range(n):
        if adj[i][endpoint]:
            updated[i] = (endpoint, i)
            continue
        best = valid[i]
        for j in graph.neighbors[i]:
            if j >= n:
                continue
            offer = valid[j]
            if offer is None or i in offer:
                continue
            if best is None or len(offer) + 1 < len(best):
                best = offer + (i,)
        updated[i] = best
    return updated


def longest_home_route(graph: CommGraph, home_routes: list[Optional[Route]],
                       r_min: float, r_max: float) -> ChainStatus:
    """Pick the longest valid home route (ties: smallest id sequence) and flag
    its members and each robot's optimal-range condition."""
    n = graph.n_robots
    lhr: Route = ()
    for route in home_routes:
        if route is None or not is_valid_route(route, graph):
            continue
        if len(route) > len(lhr) or (len(route) == len(lhr) and route < lhr):
            lhr = route
    members = [False] * n
    for node in lhr[1:]:
        members[node] = True
    dist = graph.dist
    in_range = []
    for i in range(n):
        ok = True
        for j in graph.neighbors[i]:
            if j < n and members[j] and not (r_min <= dist[i, j] <= r_max):
                ok = False
                break
        in_range.append(ok)
    return ChainStatus(lhr, members, in_range)


def connected_component(graph: CommGraph, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in graph.neighbors[node]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def full_connection(graph: CommGraph) -> bool:
    """HOME and SINK share a connected component."""
    return graph.sink in connected_component(graph, graph.home)


def hop_distances(graph: CommGraph, source: int) -> dict[int, int]:
    """Breadth-first hop counts from ``source`` to every reachable node."""
    hops = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nxt in graph.neighbors[node]:
            if nxt not in hops:
                hops[nxt] = hops[node] + 1
                queue.append(nxt)
    return hops


class ConnectivityTracker:
    """Per-world route tables plus the derived chain status of the latest step."""

    def __init__(self, n_robots: int, r_min: float, r_max: float):
        self.n = n_robots
        self.r_min = r_min
        self.r_max = r_max
        self.home_routes: list[Optional[Route]] = [None] * n_robots
        self.sink_routes: list[Optional[Route]] = [None] * n_robots
        self.graph: Optional[CommGraph] = None
        self.chain = ChainStatus((), [False] * n_robots, [True] * n_robots)
        self.connected = False

    def update(self, world) -> None:
        graph = rebuild_graph(world)
        self.graph = graph
        self.home_routes = propagate_routes(graph, self.home_routes, graph.home)
        self.sink_routes = propagate_routes(graph, self.sink_routes, graph.sink)
        self.chain = longest_home_route(graph, self.home_routes, self.r_min, self.r_max)
        self.connected = full_connection(graph)

    def trace_record(self, step: int) -> dict:
        n = self.n
        lhr = ["home" if v == n else "sink" if v == n + 1 else v for v in self.chain.lhr]
        return {"step": step, "lhr": lhr, "full_connection": self.connected}
