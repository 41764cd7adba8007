"""Group-level BFMN construction and structural features."""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import EmptyGraph, NodeNotFound
from .valence import NEUTRAL, ValenceLabel

log = logging.getLogger(__name__)

FULL_NETWORK_HUB_FRACTION = 0.01
FRAME_HUB_FRACTION = 0.05
_DISTANCE_CHUNK = 256


class Bfmn:
    """Simple undirected unweighted graph of words with a valence label per node.

    Treat instances as immutable; derived quantities are cached.
    """

    def __init__(self, adjacency: Mapping[str, Iterable[str]],
                 valence: Mapping[str, str] | None = None, group_tag: str = ""):
        adj: dict[str, set[str]] = {}
        for u, nbrs in adjacency.items():
            adj.setdefault(u, set())
            for v in nbrs:
                if u == v:
                    raise ValueError(f"self-loop on {u!r}")
                adj[u].add(v)
                adj.setdefault(v, set()).add(u)
        self._adj: dict[str, frozenset[str]] = {u: frozenset(vs) for u, vs in sorted(adj.items())}
        valence = valence or {}
        self.valence: dict[str, str] = {u: valence.get(u, NEUTRAL) for u in self._adj}
        self.group_tag = group_tag

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]], valence: Mapping[str, str] | None = None,
                   group_tag: str = "", nodes: Iterable[str] = ()) -> "Bfmn":
        adj: dict[str, set[str]] = {n: set() for n in nodes}
        for u, v in edges:
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set())
        return cls(adj, valence, group_tag)

    def __contains__(self, node) -> bool:
        return node in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    @property
    def nodes(self) -> list[str]:
        return list(self._adj)

    @cached_property
    def edges(self) -> list[tuple[str, str]]:
        return sorted((u, v) for u, nbrs in self._adj.items() for v in nbrs if u < v)

    @property
    def n_nodes(self) -> int:
        return len(self._adj)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, node: str) -> frozenset[str]:
        try:
            return self._adj[node]
        except KeyError:
            raise NodeNotFound(node) from None

    def degree(self, node: str) -> int:
        return len(self.neighbors(node))

    def subgraph(self, nodes: Iterable[str]) -> "Bfmn":
        keep = set(nodes)
        missing = keep - self._adj.keys()
        if missing:
            raise NodeNotFound(sorted(missing)[0])
        adj = {u: self._adj[u] & keep for u in keep}
        return Bfmn(adj, {u: self.valence[u] for u in keep}, self.group_tag)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self._adj)}

    @cached_property
    def _csr(self) -> csr_matrix:
        idx = self._index
        rows, cols = [], []
        for u, nbrs in self._adj.items():
            for v in nbrs:
                rows.append(idx[u])
                cols.append(idx[v])
        n = len(idx)
        return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    @cached_property
    def largest_component(self) -> list[str]:
        """Nodes of the largest connected component; ties broken by the
        lexicographically smallest member."""
        if not self._adj:
            return []
        _, labels = connected_components(self._csr, directed=False)
        comps: dict[int, list[str]] = {}
        for node, lab in zip(self._adj, labels):
            comps.setdefault(int(lab), []).append(node)
        return min(comps.values(), key=lambda c: (-len(c), c[0]))

    @cached_property
    def _component_distances(self) -> tuple[int, int, int]:
        """(sum of ordered-pair distances, max distance, size) on the largest component."""
        comp = self.largest_component
        if len(comp) < 2:
            return 0, 0, len(comp)
        sub = self.subgraph(comp) if len(comp) < self.n_nodes else self
        graph = sub._csr
        n = sub.n_nodes
        total = 0
        longest = 0
        for start in range(0, n, _DISTANCE_CHUNK):
            rows = np.arange(start, min(start + _DISTANCE_CHUNK, n))
            dist = shortest_path(graph, method="D", directed=False, unweighted=True, indices=rows)
            total += int(dist.sum())
            longest = max(longest, int(dist.max()))
        return total, longest, n


def build_bfmn(records: Iterable, labels: Mapping[str, ValenceLabel | str] | None = None,
               group_tag: str = "") -> Bfmn:
    """Aggregate cue-response pairs of all records into one deduplicated
    simple graph. Pairs with response == cue are dropped; cues without any
    valid response contribute no node."""
    adj: dict[str, set[str]] = {}
    for rec in records:
        for resp in rec.responses:
            if resp == rec.cue:
                continue
            adj.setdefault(rec.cue, set()).add(resp)
            adj.setdefault(resp, set()).add(rec.cue)
    labels = labels or {}
    valence = {}
    unlabelled = 0
    for word in adj:
        lab = labels.get(word)
        if lab is None:
            unlabelled += 1
            valence[word] = NEUTRAL
        else:
            valence[word] = lab if isinstance(lab, str) else lab.label
    if unlabelled and labels:
        log.warning("%d node(s) without a valence label set to neutral", unlabelled)
    return Bfmn(adj, valence, group_tag)


def triangles(g: Bfmn, node: str) -> int:
    nbrs = g.neighbors(node)
    return sum(len(g.neighbors(v) & nbrs) for v in nbrs) // 2


def clustering_coefficient(g: Bfmn, node: str) -> float:
    """2 T(u) / (deg(u) (deg(u) - 1)); 0 when deg(u) < 2."""
    k = g.degree(node)
    if k < 2:
        return 0.0
    return 2.0 * triangles(g, node) / (k * (k - 1))


def mean_clustering(g: Bfmn) -> float:
    if g.n_nodes == 0:
        raise EmptyGraph("graph has no nodes")
    return sum(clustering_coefficient(g, u) for u in g.nodes) / g.n_nodes


def avg_shortest_path(g: Bfmn) -> float:
    """Mean geodesic distance over ordered node pairs of the largest component."""
    if g.n_nodes == 0:
        raise EmptyGraph("graph has no nodes")
    total, _, n = g._component_distances
    return total / (n * (n - 1)) if n > 1 else 0.0


def diameter(g: Bfmn) -> int:
    if g.n_nodes == 0:
        raise EmptyGraph("graph has no nodes")
    return g._component_distances[1]


def hubs(g: Bfmn, top_fraction: float) -> list[tuple[str, int]]:
    """Nodes whose degree reaches that of the node ranked ceil(top_fraction * N)
    in descending degree order. Ties at the cutoff are all included."""
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must lie in (0, 1]")
    if g.n_nodes == 0:
        return []
    ranked = sorted(((u, g.degree(u)) for u in g.nodes), key=lambda t: (-t[1], t[0]))
    rank = max(1, math.ceil(round(top_fraction * len(ranked), 9)))
    cutoff = ranked[min(rank, len(ranked)) - 1][1]
    return [(u, k) for u, k in ranked if k >= cutoff]


def bfs_distances(g: Bfmn, source: str) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def closeness_centrality(g: Bfmn, node: str) -> float:
    """(r - 1) / sum(d) scaled by (r - 1) / (n - 1), r = nodes reachable from
    ``node`` including itself. Isolated nodes score 0."""
    dist = bfs_distances(g, node)
    reach = len(dist)
    total = sum(dist.values())
    if reach < 2 or total == 0:
        return 0.0
    return (reach - 1) / total * (reach - 1) / (g.n_nodes - 1)


@dataclass
class NetworkFeatures:
    n_nodes: int
    n_edges: int
    avg_shortest_path: float
    diameter: int
    clustering: float
    hubs: list[tuple[str, int]] = field(default_factory=list)
    component_size: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hubs"] = [[w, k] for w, k in self.hubs]
        return d


def network_features(g: Bfmn, top_fraction: float = FULL_NETWORK_HUB_FRACTION) -> NetworkFeatures:
    if g.n_nodes == 0:
        raise EmptyGraph("graph has no nodes")
    comp = len(g.largest_component)
    if comp < g.n_nodes:
        log.info("%s: distances on largest component (%d of %d nodes)", g.group_tag or "graph", comp, g.n_nodes)
    return NetworkFeatures(
        n_nodes=g.n_nodes,
        n_edges=g.n_edges,
        avg_shortest_path=avg_shortest_path(g),
        diameter=diameter(g),
        clustering=mean_clustering(g),
        hubs=hubs(g, top_fraction),
        component_size=comp,
    )


def write_graph(g: Bfmn, edges_path: Path | str, nodes_path: Path | str,
                display: Mapping[str, str] | None = None) -> None:
    display = display or {}
    with open(edges_path, "w", encoding="utf-8") as fh:
        fh.write("word_a\tword_b\n")
        for u, v in g.edges:
            fh.write(f"{u}\t{v}\n")
    with open(nodes_path, "w", encoding="utf-8") as fh:
        fh.write("word\tvalence\tdisplay\n")
        for u in g.nodes:
            fh.write(f"{u}\t{g.valence[u]}\t{display.get(u, u)}\n")


def read_graph(edges_path: Path | str, nodes_path: Path | str, group_tag: str = "") -> Bfmn:
    valence: dict[str, str] = {}
    with open(nodes_path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            valence[parts[0]] = parts[1]
    edges: list[tuple[str, str]] = []
    with open(edges_path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            u, v = line.rstrip("\n").split("\t")
            edges.append((u, v))
    return Bfmn.from_edges(edges, valence, group_tag, nodes=valence)


def features_json(features: Mapping[str, NetworkFeatures] | NetworkFeatures) -> str:
    if isinstance(features, NetworkFeatures):
        payload = features.to_dict()
    else:
        payload = {k: v.to_dict() for k, v in features.items()}
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
