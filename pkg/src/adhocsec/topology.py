"""Radio graph, minimum spanning tree overlay, neighbor tables and tree paths.

Everything here is a pure function over immutable values. Node ids are plain
non-negative ints; edges are stored as ``(low_id, high_id)`` tuples.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

__all__ = [
    "TopologyError",
    "InvalidPositionError",
    "DuplicateNodeError",
    "UnknownNodeError",
    "PartitionError",
    "Position",
    "RadioGraph",
    "SpanningTree",
    "NeighborTable",
    "UnionFind",
    "euclidean_distance",
    "edge_key",
    "build_radio_graph",
    "build_mst",
    "tree_path",
    "neighbor_table",
    "adjacency_table",
    "connected_components",
]


class TopologyError(ValueError):
    pass


class InvalidPositionError(TopologyError):
    pass


class DuplicateNodeError(TopologyError):
    pass


class UnknownNodeError(TopologyError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class PartitionError(TopologyError):
    """Raised when the radio graph does not connect every node."""

    def __init__(self, components):
        self.components = [sorted(c) for c in sorted(components, key=min)]
        listing = "; ".join("{" + ", ".join(map(str, c)) + "}" for c in self.components)
        super().__init__(f"network is partitioned into {len(self.components)} components: {listing}")


class Position(NamedTuple):
    x: float
    y: float


def _check_position(p) -> Position:
    x, y = p
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidPositionError(f"non-finite position {p!r}")
    return Position(float(x), float(y))


def euclidean_distance(a, b) -> float:
    a = _check_position(a)
    b = _check_position(b)
    dx = b.x - a.x
    dy = b.y - a.y
    return math.sqrt(dx * dx + dy * dy)


def edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class RadioGraph:
    """Geometric graph: an edge joins every pair within ``range`` (inclusive)."""

    positions: Mapping[int, Position]
    range: float
    edges: Mapping[tuple[int, int], float]

    @property
    def nodes(self) -> list[int]:
        return sorted(self.positions)

    def neighbors(self, node: int) -> set[int]:
        if node not in self.positions:
            raise UnknownNodeError(f"unknown node {node}")
        out = set()
        for i, j in self.edges:
            if i == node:
                out.add(j)
            elif j == node:
                out.add(i)
        return out


@dataclass(frozen=True)
class SpanningTree:
    nodes: frozenset
    edges: frozenset
    weights: Mapping[tuple[int, int], float] = field(default_factory=dict, compare=False)

    @property
    def root(self) -> int:
        return min(self.nodes)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights[e] for e in self.edges)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> dict[int, set[int]]:
        adj = {n: set() for n in self.nodes}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj


@dataclass(frozen=True)
class NeighborTable:
    owner: int
    neighbors: frozenset


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, items: Iterable[int] = ()):
        self.parent = {}
        self.size = {}
        for it in items:
            self.add(it)

    def add(self, item):
        if item not in self.parent:
            self.parent[item] = item
            self.size[item] = 1

    def find(self, item):
        parent = self.parent
        while parent[item] != item:
            parent[item] = parent[parent[item]]
            item = parent[item]
        return item

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def groups(self) -> list[set]:
        out = {}
        for item in self.parent:
            out.setdefault(self.find(item), set()).add(item)
        return list(out.values())


def build_radio_graph(nodes, range: float) -> RadioGraph:
    """Build the radio graph from ``(id, position)`` pairs or an id->position mapping."""
    if not range > 0 or not math.isfinite(range):
        raise TopologyError(f"radio range must be a positive finite number, got {range!r}")
    items = nodes.items() if isinstance(nodes, Mapping) else nodes
    positions = {}
    for node_id, pos in items:
        if node_id in positions:
            raise DuplicateNodeError(f"duplicate node id {node_id}")
        if int(node_id) != node_id or node_id < 0:
            raise TopologyError(f"node id must be a non-negative integer, got {node_id!r}")
        positions[node_id] = _check_position(pos)

    ids = sorted(positions)
    edges = {}
    for a_idx, i in enumerate(ids):
        for j in ids[a_idx + 1:]:
            d = euclidean_distance(positions[i], positions[j])
            if d <= range:
                edges[(i, j)] = d
    return RadioGraph(positions=positions, range=float(range), edges=edges)


def connected_components(graph: RadioGraph) -> list[set[int]]:
    uf = UnionFind(graph.positions)
    for i, j in graph.edges:
        uf.union(i, j)
    return sorted(uf.groups(), key=min)


def build_mst(graph: RadioGraph) -> SpanningTree:
    """Kruskal over edges ordered by (weight, low id, high id).

    Raises PartitionError when the graph is not connected.
    """
    uf = UnionFind(graph.positions)
    chosen = {}
    target = len(graph.positions) - 1
    for (i, j), w in sorted(graph.edges.items(), key=lambda kv: (kv[1], kv[0][0], kv[0][1])):
        if len(chosen) == target:
            break
        if uf.union(i, j):
            chosen[(i, j)] = w
    if len(chosen) != max(target, 0):
        raise PartitionError(uf.groups())
    return SpanningTree(nodes=frozenset(graph.positions), edges=frozenset(chosen), weights=chosen)


def tree_path(tree: SpanningTree, src: int, dst: int) -> list[int]:
    for n in (src, dst):
        if n not in tree.nodes:
            raise UnknownNodeError(f"unknown node {n}")
    if src == dst:
        return [src]
    adj = tree.adjacency()
    parent = {src: None}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        if cur == dst:
            break
        for nxt in sorted(adj[cur]):
            if nxt not in parent:
                parent[nxt] = cur
                queue.append(nxt)
    if dst not in parent:
        # only reachable with a hand-built, disconnected "tree"
        raise PartitionError([{src}, {dst}])
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def neighbor_table(tree: SpanningTree, node: int) -> NeighborTable:
    if node not in tree.nodes:
        raise UnknownNodeError(f"unknown node {node}")
    nbrs = {j if i == node else i for i, j in tree.edges if node in (i, j)}
    return NeighborTable(owner=node, neighbors=frozenset(nbrs))


def adjacency_table(graph: RadioGraph, node: int) -> NeighborTable:
    """Radio-range neighbors of ``node``: everyone it can exchange frames with."""
    return NeighborTable(owner=node, neighbors=frozenset(graph.neighbors(node)))
