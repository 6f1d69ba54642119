"""Influence graphs, structural kinds and generators for the analysed families."""
from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class GraphKind(enum.Enum):
    GENERAL = "general"
    IN_ARBORESCENCE = "in_arborescence"
    OUT_ARBORESCENCE = "out_arborescence"
    BIPARTITE = "bipartite"
    LINE = "line"


class GraphError(ValueError):
    pass


Edge = tuple[int, int, float]


@dataclass(frozen=True)
class InfluenceGraph:
    """Directed graph with an activation probability on every edge.

    Nodes are the dense integers ``0 .. node_count - 1``. Edge order is
    significant: edge ``e`` is bit ``e`` of every live-edge mask.
    """

    node_count: int
    edges: tuple[Edge, ...] = ()
    kind: GraphKind = GraphKind.GENERAL

    def __post_init__(self) -> None:
        n = self.node_count
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise GraphError(f"node_count must be a positive integer, got {n!r}")
        clean = []
        seen = set()
        for raw in self.edges:
            s, d, p = raw
            s, d, p = int(s), int(d), float(p)
            if not (0 <= s < n and 0 <= d < n):
                raise GraphError(f"edge ({s}, {d}) has a node outside [0, {n})")
            if s == d:
                raise GraphError(f"self-loop at node {s}")
            if (s, d) in seen:
                raise GraphError(f"duplicate edge ({s}, {d})")
            if not 0.0 <= p <= 1.0:
                raise GraphError(f"edge ({s}, {d}) probability {p} outside [0, 1]")
            seen.add((s, d))
            clean.append((s, d, p))
        object.__setattr__(self, "node_count", int(n))
        object.__setattr__(self, "edges", tuple(clean))
        kind = GraphKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is not GraphKind.GENERAL and kind not in structural_kinds(self):
            raise GraphError(f"graph does not satisfy the {kind.value} predicate")

    @property
    def n(self) -> int:
        return self.node_count

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def probs(self) -> np.ndarray:
        return np.array([p for _, _, p in self.edges], dtype=np.float64)

    @cached_property
    def srcs(self) -> np.ndarray:
        return np.array([s for s, _, _ in self.edges], dtype=np.int64)

    @cached_property
    def dsts(self) -> np.ndarray:
        return np.array([d for _, d, _ in self.edges], dtype=np.int64)

    @cached_property
    def out_edges(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        for e, (s, _, _) in enumerate(self.edges):
            out[s].append(e)
        return tuple(tuple(x) for x in out)

    @cached_property
    def in_edges(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.node_count)]
        for e, (_, d, _) in enumerate(self.edges):
            inc[d].append(e)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def out_edge_masks(self) -> tuple[int, ...]:
        """Bitmask over edge indices of each node's out-edges."""
        return tuple(sum(1 << e for e in es) for es in self.out_edges)

    def with_kind(self, kind: GraphKind) -> "InfluenceGraph":
        return InfluenceGraph(self.node_count, self.edges, kind)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": self.kind.value,
            "nodes": self.node_count,
            "edges": [{"src": s, "dst": d, "p": p} for s, d, p in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InfluenceGraph":
        if data.get("version") != 1:
            raise GraphError(f"unsupported graph format version {data.get('version')!r}")
        edges = [(e["src"], e["dst"], e["p"]) for e in data["edges"]]
        return cls(int(data["nodes"]), tuple(edges), GraphKind(data["kind"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "InfluenceGraph":
        return cls.from_dict(json.loads(text))


def save_graph(graph: InfluenceGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(graph.to_json())
        fh.write("\n")


def load_graph(path) -> InfluenceGraph:
    with open(path) as fh:
        return InfluenceGraph.from_json(fh.read())


# -- structural predicates ----------------------------------------------


def _is_tree(graph: InfluenceGraph) -> bool:
    n = graph.node_count
    if graph.edge_count != n - 1:
        return False
    if n == 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for s, d, _ in graph.edges:
        adj[s].append(d)
        adj[d].append(s)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == n


def is_in_arborescence(graph: InfluenceGraph) -> bool:
    # a tree where every node but the root has exactly one out-edge
    if not _is_tree(graph):
        return False
    outdeg = [len(es) for es in graph.out_edges]
    return sum(1 for d in outdeg if d == 0) == 1 and all(d <= 1 for d in outdeg)


def is_out_arborescence(graph: InfluenceGraph) -> bool:
    if not _is_tree(graph):
        return False
    indeg = [len(es) for es in graph.in_edges]
    return sum(1 for d in indeg if d == 0) == 1 and all(d <= 1 for d in indeg)


def bipartition(graph: InfluenceGraph) -> tuple[frozenset[int], frozenset[int]] | None:
    """Return (left, right) with every edge left -> right, or None.

    Isolated nodes are put on the left.
    """
    left, right = set(), set()
    for v in range(graph.node_count):
        has_out = bool(graph.out_edges[v])
        has_in = bool(graph.in_edges[v])
        if has_out and has_in:
            return None
        (right if has_in else left).add(v)
    return frozenset(left), frozenset(right)


def structural_kinds(graph: InfluenceGraph) -> set[GraphKind]:
    """All kinds whose structural predicate holds (General always does)."""
    kinds = {GraphKind.GENERAL}
    if bipartition(graph) is not None:
        kinds.add(GraphKind.BIPARTITE)
    inn = is_in_arborescence(graph)
    out = is_out_arborescence(graph)
    if inn:
        kinds.add(GraphKind.IN_ARBORESCENCE)
    if out:
        kinds.add(GraphKind.OUT_ARBORESCENCE)
    if inn and out:
        kinds.add(GraphKind.LINE)
    return kinds


_SPECIFICITY = (
    GraphKind.LINE,
    GraphKind.IN_ARBORESCENCE,
    GraphKind.OUT_ARBORESCENCE,
    GraphKind.BIPARTITE,
    GraphKind.GENERAL,
)


def validate_kind(graph: InfluenceGraph) -> GraphKind:
    """Most specific kind satisfied by the graph's structure."""
    kinds = structural_kinds(graph)
    for kind in _SPECIFICITY:
        if kind in kinds:
            return kind
    return GraphKind.GENERAL


def line_order(graph: InfluenceGraph) -> tuple[int, ...]:
    """Nodes of a directed path listed from its origin to its end."""
    if not (is_in_arborescence(graph) and is_out_arborescence(graph)):
        raise GraphError("graph is not a directed line")
    start = next(v for v in range(graph.node_count) if not graph.in_edges[v])
    order = [start]
    while graph.out_edges[order[-1]]:
        (e,) = graph.out_edges[order[-1]]
        order.append(graph.edges[e][1])
    return tuple(order)


def reach_prob_path(graph: InfluenceGraph, src: int, dst: int) -> float:
    """Product of edge probabilities along the unique directed path src -> dst.

    Defined for graphs in which directed paths are unique (arborescences,
    lines and one-directional bipartite graphs). Returns 0 when no directed
    path exists and 1 when ``src == dst``.
    """
    kinds = structural_kinds(graph)
    if kinds == {GraphKind.GENERAL}:
        raise GraphError("reach_prob_path needs a graph with unique directed paths")
    if src == dst:
        return 1.0
    parent_edge = {src: None}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for e in graph.out_edges[v]:
            w = graph.edges[e][1]
            if w not in parent_edge:
                parent_edge[w] = e
                queue.append(w)
    if dst not in parent_edge:
        return 0.0
    prob = 1.0
    v = dst
    while v != src:
        e = parent_edge[v]
        prob *= graph.edges[e][2]
        v = graph.edges[e][0]
    return prob


# -- generators ------------------------------------------------------------


def make_line_instance(k: int, t: int) -> InfluenceGraph:
    """Directed path on ``k * t`` nodes with every edge live w.p. ``1 - 1/t``.

    Block ``j`` (0-based) occupies nodes ``j*t .. j*t + t - 1``; node ``j*t``
    is the head of block ``j``.
    """
    if k < 1 or t < 1:
        raise GraphError(f"line instance needs k >= 1 and t >= 1, got k={k}, t={t}")
    n = k * t
    p = 1.0 - 1.0 / t
    return InfluenceGraph(n, tuple((i, i + 1, p) for i in range(n - 1)), GraphKind.LINE)


def _draw_probs(rng: np.random.Generator, count: int, p_range, p_values) -> list[float]:
    if p_values is not None:
        vals = np.asarray(list(p_values), dtype=np.float64)
        if vals.size == 0:
            raise GraphError("p_values must not be empty")
        return [float(v) for v in vals[rng.integers(0, vals.size, size=count)]]
    lo, hi = p_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise GraphError(f"invalid probability range {p_range!r}")
    return [float(v) for v in rng.uniform(lo, hi, size=count)]


def random_family(
    kind: GraphKind | str,
    rng: np.random.Generator | int,
    *,
    n: int | None = None,
    m: int | None = None,
    left: int | None = None,
    right: int | None = None,
    density: float = 0.5,
    p_range: tuple[float, float] = (0.0, 1.0),
    p_values: Sequence[float] | None = None,
    shuffle: bool = True,
) -> InfluenceGraph:
    """Random member of one of the analysed graph families.

    Arborescences are random recursive trees (node ``i`` attaches to a
    uniformly chosen earlier node) with labels optionally permuted.
    Bipartite graphs flip an independent coin of bias ``density`` for every
    left/right pair. General graphs get ``m`` distinct ordered pairs chosen
    uniformly; they exist only to feed property checks on small instances.
    Directed lines come from :func:`make_line_instance`, not from here.

    ``p_values`` (a finite set sampled uniformly) overrides ``p_range``.
    """
    kind = GraphKind(kind)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    if kind is GraphKind.LINE:
        raise GraphError("use make_line_instance for directed lines")

    if kind in (GraphKind.IN_ARBORESCENCE, GraphKind.OUT_ARBORESCENCE):
        if n is None or n < 1:
            raise GraphError("arborescence needs n >= 1")
        parents = [int(rng.integers(0, i)) for i in range(1, n)]
        perm = rng.permutation(n) if shuffle else np.arange(n)
        probs = _draw_probs(rng, n - 1, p_range, p_values)
        edges = []
        for i, par in enumerate(parents, start=1):
            child, anc = int(perm[i]), int(perm[par])
            pair = (child, anc) if kind is GraphKind.IN_ARBORESCENCE else (anc, child)
            edges.append((pair[0], pair[1], probs[i - 1]))
        return InfluenceGraph(n, tuple(edges), kind)

    if kind is GraphKind.BIPARTITE:
        if left is None or right is None or left < 1 or right < 0:
            raise GraphError("bipartite needs left >= 1 and right >= 0")
        if not 0.0 <= density <= 1.0:
            raise GraphError(f"density {density} outside [0, 1]")
        coins = rng.random((left, right)) < density
        pairs = [(i, left + j) for i in range(left) for j in range(right) if coins[i, j]]
        probs = _draw_probs(rng, len(pairs), p_range, p_values)
        edges = tuple((s, d, p) for (s, d), p in zip(pairs, probs))
        return InfluenceGraph(left + right, edges, GraphKind.BIPARTITE)

    # general
    if n is None or n < 1 or m is None or m < 0:
        raise GraphError("general graph needs n >= 1 and m >= 0")
    all_pairs = [(s, d) for s in range(n) for d in range(n) if s != d]
    if m > len(all_pairs):
        raise GraphError(f"cannot place {m} edges on {n} nodes")
    picks = sorted(rng.choice(len(all_pairs), size=m, replace=False).tolist())
    probs = _draw_probs(rng, m, p_range, p_values)
    edges = tuple((*all_pairs[i], p) for i, p in zip(picks, probs))
    return InfluenceGraph(n, edges, GraphKind.GENERAL)


def node_mask(nodes: Iterable[int]) -> int:
    mask = 0
    for v in nodes:
        mask |= 1 << int(v)
    return mask


def mask_nodes(mask: int) -> frozenset[int]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return frozenset(out)
