"""Live-edge graphs, reachability and influence spread (exact and Monte Carlo)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .graph_model import GraphError, InfluenceGraph, line_order, mask_nodes, node_mask
from .runtime import (
    DEFAULT_CHUNK,
    CapExceeded,
    MomentAccumulator,
    check_cap,
    run_chunks,
)

MAX_EXACT_NODES = 64  # node sets are packed into uint64 words


@dataclass(frozen=True)
class LiveEdgeGraph:
    """One realization of edge liveness; bit ``e`` of ``live_mask`` is edge ``e``."""

    live_mask: int
    weight: float | None = None

    def is_live(self, e: int) -> bool:
        return bool((self.live_mask >> e) & 1)


@dataclass(frozen=True)
class SpreadEstimate:
    value: float
    stderr: float = 0.0
    method: str = "exact"
    samples: int | None = None

    def __float__(self) -> float:
        return float(self.value)


def _mask_from_bools(bits: np.ndarray) -> int:
    packed = np.packbits(np.asarray(bits, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def sample_live_edges(graph: InfluenceGraph, rng: np.random.Generator) -> LiveEdgeGraph:
    live = rng.random(graph.edge_count) < graph.probs
    return LiveEdgeGraph(_mask_from_bools(live))


def live_weight(graph: InfluenceGraph, live_mask: int) -> float:
    w = 1.0
    for e, (_, _, p) in enumerate(graph.edges):
        w *= p if (live_mask >> e) & 1 else 1.0 - p
    return w


def enumerate_live_edges(graph: InfluenceGraph, cap: int | None = None) -> Iterator[LiveEdgeGraph]:
    """All ``2**m`` live-edge graphs with their prior probabilities."""
    check_cap(graph.edge_count, cap)
    for mask in range(1 << graph.edge_count):
        yield LiveEdgeGraph(mask, live_weight(graph, mask))


def reach_mask(graph: InfluenceGraph, live_mask: int, seed_mask: int) -> int:
    """Forward closure of ``seed_mask`` over live edges, as a node bitmask."""
    reached = seed_mask
    frontier = seed_mask
    out_masks = graph.out_edge_masks
    edges = graph.edges
    while frontier:
        nxt = 0
        v = 0
        f = frontier
        while f:
            if f & 1:
                live_out = out_masks[v] & live_mask
                while live_out:
                    low = live_out & -live_out
                    nxt |= 1 << edges[low.bit_length() - 1][1]
                    live_out ^= low
            f >>= 1
            v += 1
        frontier = nxt & ~reached
        reached |= frontier
    return reached


def reachable(graph: InfluenceGraph, live: LiveEdgeGraph, seeds: Iterable[int]) -> frozenset[int]:
    return mask_nodes(reach_mask(graph, live.live_mask, node_mask(seeds)))


# -- vectorised exact tables -------------------------------------------------


@dataclass(frozen=True)
class LiveTable:
    """Every live-edge graph of a small instance, evaluated at once.

    ``weights[i]`` is the prior probability of live mask ``i`` and
    ``reach[v, i]`` the set of nodes reachable from ``v`` under it (uint64
    bitmask).
    """

    weights: np.ndarray
    reach: np.ndarray


def _live_bits(m: int) -> np.ndarray:
    masks = np.arange(1 << m, dtype=np.int64)
    return ((masks[None, :] >> np.arange(m, dtype=np.int64)[:, None]) & 1).astype(bool)


def _table_weights(graph: InfluenceGraph, bits: np.ndarray) -> np.ndarray:
    w = np.ones(bits.shape[1], dtype=np.float64)
    for e, p in enumerate(graph.probs):
        w *= np.where(bits[e], p, 1.0 - p)
    return w


@lru_cache(maxsize=64)
def _live_table_cached(graph: InfluenceGraph) -> LiveTable:
    n, m = graph.node_count, graph.edge_count
    bits = _live_bits(m)
    weights = _table_weights(graph, bits)
    reach = np.zeros((n, 1 << m), dtype=np.uint64)
    for v in range(n):
        reach[v] = np.uint64(1) << np.uint64(v)
    zero = np.uint64(0)
    changed = True
    while changed:
        changed = False
        for e, (s, d, _) in enumerate(graph.edges):
            upd = reach[s] | np.where(bits[e], reach[d], zero)
            if not np.array_equal(upd, reach[s]):
                reach[s] = upd
                changed = True
    weights.flags.writeable = False
    reach.flags.writeable = False
    return LiveTable(weights, reach)


def live_table(graph: InfluenceGraph, cap: int | None = None) -> LiveTable:
    check_cap(graph.edge_count, cap)
    if graph.node_count > MAX_EXACT_NODES:
        raise CapExceeded(f"exact evaluation supports at most {MAX_EXACT_NODES} nodes")
    return _live_table_cached(graph)


def _covered(table: LiveTable, seeds: Iterable[int]) -> np.ndarray:
    cov = np.zeros(table.weights.shape[0], dtype=np.uint64)
    for v in seeds:
        cov |= table.reach[int(v)]
    return cov


def spread_exact(graph: InfluenceGraph, seeds: Iterable[int], cap: int | None = None) -> SpreadEstimate:
    seeds = sorted(set(int(v) for v in seeds))
    if not seeds:
        return SpreadEstimate(0.0)
    table = live_table(graph, cap)
    counts = np.bitwise_count(_covered(table, seeds)).astype(np.float64)
    return SpreadEstimate(float(np.dot(table.weights, counts)))


def _propagate_batch(graph: InfluenceGraph, live: np.ndarray, active: np.ndarray) -> np.ndarray:
    """In-place forward closure; ``live`` is (m, B), ``active`` is (n, B)."""
    edges = graph.edges
    while True:
        before = active.sum()
        for e, (s, d, _) in enumerate(edges):
            active[d] |= active[s] & live[e]
        if active.sum() == before:
            return active


def _mc_chunk(graph: InfluenceGraph, seeds: list[int]):
    n, m = graph.node_count, graph.edge_count
    probs = graph.probs[:, None]

    def chunk(rng: np.random.Generator, count: int) -> np.ndarray:
        live = rng.random((m, count)) < probs
        active = np.zeros((n, count), dtype=bool)
        active[seeds] = True
        return _propagate_batch(graph, live, active)

    return chunk


def spread_mc(
    graph: InfluenceGraph,
    seeds: Iterable[int],
    samples: int,
    seed: int = 0,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> SpreadEstimate:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    seeds = sorted(set(int(v) for v in seeds))
    if not seeds:
        return SpreadEstimate(0.0, 0.0, "mc", samples)
    acc = MomentAccumulator()
    for active in run_chunks(_mc_chunk(graph, seeds), samples, seed, chunk_size, threads):
        acc.add_array(active.sum(axis=0))
    return SpreadEstimate(acc.mean, acc.stderr, "mc", samples)


def per_node_activation(
    graph: InfluenceGraph,
    seeds: Iterable[int],
    method: str = "exact",
    samples: int = 10_000,
    seed: int = 0,
    threads: int = 1,
    cap: int | None = None,
) -> np.ndarray:
    """Probability that each node ends up active when ``seeds`` are seeded."""
    seeds = sorted(set(int(v) for v in seeds))
    n = graph.node_count
    if not seeds:
        return np.zeros(n)
    if method == "exact":
        table = live_table(graph, cap)
        cov = _covered(table, seeds)
        out = np.empty(n)
        for u in range(n):
            hit = ((cov >> np.uint64(u)) & np.uint64(1)).astype(np.float64)
            out[u] = float(np.dot(table.weights, hit))
        return out
    if method == "mc":
        total = np.zeros(n)
        for active in run_chunks(_mc_chunk(graph, seeds), samples, seed, DEFAULT_CHUNK, threads):
            total += active.sum(axis=1)
        return total / samples
    raise ValueError(f"unknown method {method!r}")


def uniform_line_prob(graph: InfluenceGraph) -> float:
    if graph.edge_count == 0:
        return 0.0
    probs = graph.probs
    if not np.all(probs == probs[0]):
        raise GraphError("line has non-uniform edge probabilities")
    return float(probs[0])


def line_spread_closed_form(graph: InfluenceGraph, seeds: Iterable[int]) -> float:
    """Spread on a uniform directed line: sum over nodes of q**(distance to nearest seed upstream)."""
    order = line_order(graph)
    q = uniform_line_prob(graph)
    seeds = set(int(v) for v in seeds)
    total = 0.0
    dist = None
    for v in order:
        if v in seeds:
            dist = 0
        elif dist is not None:
            dist += 1
        if dist is not None:
            total += q**dist
    return total
