"""Full-adoption feedback: partial realizations, active sets, boundaries and
conditional marginal gains.

A partial realization is stored as two edge bitmasks (which edges have been
observed, and which of those are live) plus the seeds chosen so far. Under
full-adoption feedback that pair is a sufficient statistic for everything the
observer knows.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterator

import numpy as np

from .cascade_engine import LiveEdgeGraph, reach_mask, sample_live_edges
from .graph_model import InfluenceGraph, mask_nodes, node_mask
from .runtime import check_cap, chunk_rng


class EdgeState(enum.Enum):
    LIVE = "live"
    BLOCKED = "blocked"
    UNOBSERVED = "unobserved"


class FeedbackError(ValueError):
    pass


@dataclass(frozen=True)
class PartialRealization:
    graph: InfluenceGraph = field(compare=False, repr=False)
    observed: int = 0
    live: int = 0
    dom: frozenset[int] = frozenset()
    seeds: tuple[int, ...] = field(default=(), compare=False)

    @classmethod
    def empty(cls, graph: InfluenceGraph) -> "PartialRealization":
        return cls(graph)

    @cached_property
    def active_mask(self) -> int:
        # live bits are only ever set on observed edges
        return reach_mask(self.graph, self.live, node_mask(self.dom))

    @property
    def edge_states(self) -> tuple[EdgeState, ...]:
        out = []
        for e in range(self.graph.edge_count):
            if not (self.observed >> e) & 1:
                out.append(EdgeState.UNOBSERVED)
            elif (self.live >> e) & 1:
                out.append(EdgeState.LIVE)
            else:
                out.append(EdgeState.BLOCKED)
        return tuple(out)

    @property
    def value(self) -> int:
        """f(psi): the number of active nodes."""
        return self.active_mask.bit_count()

    def is_subrealization_of(self, other: "PartialRealization") -> bool:
        return (
            self.dom <= other.dom
            and self.observed & ~other.observed == 0
            and (self.live ^ other.live) & self.observed == 0
        )

    def consistent_with(self, live: LiveEdgeGraph) -> bool:
        return (live.live_mask ^ self.live) & self.observed == 0

    def unobserved_edges(self) -> list[int]:
        return [e for e in range(self.graph.edge_count) if not (self.observed >> e) & 1]


def _observed_for(graph: InfluenceGraph, active: int) -> int:
    obs = 0
    masks = graph.out_edge_masks
    v = 0
    while active:
        if active & 1:
            obs |= masks[v]
        active >>= 1
        v += 1
    return obs


def observe(
    graph: InfluenceGraph,
    live: LiveEdgeGraph,
    psi: PartialRealization,
    u: int,
) -> PartialRealization:
    """Seed ``u`` and reveal the out-edges of everything its cascade reaches."""
    if u in psi.dom:
        raise FeedbackError(f"node {u} is already a seed")
    if not psi.consistent_with(live):
        raise FeedbackError("live-edge graph is inconsistent with the partial realization")
    dom = psi.dom | {u}
    active = reach_mask(graph, live.live_mask, node_mask(dom))
    observed = _observed_for(graph, active)
    return PartialRealization(
        graph, observed, live.live_mask & observed, frozenset(dom), psi.seeds + (u,)
    )


def realize(graph: InfluenceGraph, live: LiveEdgeGraph, seeds) -> PartialRealization:
    """Partial realization obtained by seeding ``seeds`` (in order) under ``live``."""
    psi = PartialRealization.empty(graph)
    for u in seeds:
        psi = observe(graph, live, psi, int(u))
    return psi


def active_set(psi: PartialRealization) -> frozenset[int]:
    return mask_nodes(psi.active_mask)


def boundary_mask(graph: InfluenceGraph, psi: PartialRealization) -> int:
    active = psi.active_mask
    out = 0
    for v in mask_nodes(active):
        for e in graph.out_edges[v]:
            if not (active >> graph.edges[e][1]) & 1:
                out |= 1 << v
                break
    return out


def boundary(graph: InfluenceGraph, psi: PartialRealization) -> frozenset[int]:
    """Active nodes that have an edge leaving the active set.

    Every such node must belong to any set separating the active set from
    the rest of the graph, so this is the unique smallest separating set.
    """
    return mask_nodes(boundary_mask(graph, psi))


def boundary_brute_force(graph: InfluenceGraph, psi: PartialRealization) -> list[frozenset[int]]:
    """All minimum-cardinality separating subsets of the active set (tiny graphs only)."""
    active = sorted(active_set(psi))
    outside = set(range(graph.node_count)) - set(active)
    for size in range(len(active) + 1):
        found = []
        for cand in combinations(active, size):
            rest = set(active) - set(cand)
            if not any(s in rest and d in outside for s, d, _ in graph.edges):
                found.append(frozenset(cand))
        if found:
            return found
    return []


def consistent_extensions(
    graph: InfluenceGraph, psi: PartialRealization, cap: int | None = None
) -> Iterator[LiveEdgeGraph]:
    """Complete the unobserved edges in every way, weighted by their priors."""
    free = psi.unobserved_edges()
    check_cap(len(free), cap, "unobserved edges")
    probs = [graph.edges[e][2] for e in free]
    base = psi.live & psi.observed
    for combo in range(1 << len(free)):
        mask = base
        w = 1.0
        for j, e in enumerate(free):
            if (combo >> j) & 1:
                mask |= 1 << e
                w *= probs[j]
            else:
                w *= 1.0 - probs[j]
        yield LiveEdgeGraph(mask, w)


def _sample_extension(graph: InfluenceGraph, psi: PartialRealization, rng) -> LiveEdgeGraph:
    draw = sample_live_edges(graph, rng).live_mask
    return LiveEdgeGraph((draw & ~psi.observed) | (psi.live & psi.observed))


def conditional_marginal_gain(
    graph: InfluenceGraph,
    psi: PartialRealization,
    u: int,
    method: str = "exact",
    samples: int = 2000,
    seed: int = 0,
    cap: int | None = None,
) -> float:
    """Expected number of newly activated nodes when ``u`` is seeded after ``psi``."""
    active = psi.active_mask
    if (active >> u) & 1:
        return 0.0
    base = active.bit_count()
    seeds = node_mask(psi.dom) | (1 << u)
    if method == "exact":
        total = 0.0
        for ext in consistent_extensions(graph, psi, cap):
            gain = reach_mask(graph, ext.live_mask, seeds).bit_count() - base
            total += ext.weight * gain
        return total
    if method == "mc":
        rng = chunk_rng(seed, u)
        gains = [
            reach_mask(graph, _sample_extension(graph, psi, rng).live_mask, seeds).bit_count() - base
            for _ in range(samples)
        ]
        return float(np.mean(gains))
    raise ValueError(f"unknown method {method!r}")
