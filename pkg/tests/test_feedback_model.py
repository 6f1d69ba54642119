from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adgap.cascade_engine import LiveEdgeGraph, enumerate_live_edges, sample_live_edges, spread_exact
from adgap.feedback_model import (
    EdgeState,
    FeedbackError,
    PartialRealization,
    active_set,
    boundary,
    boundary_brute_force,
    conditional_marginal_gain,
    consistent_extensions,
    observe,
    realize,
)
from adgap.graph_model import GraphKind, InfluenceGraph, random_family
from adgap.policy_suite import poisson_rate

from .strategies import small_graphs

L, B, U = EdgeState.LIVE, EdgeState.BLOCKED, EdgeState.UNOBSERVED


def nodes(mask):
    return [v for v in range(mask.bit_length()) if (mask >> v) & 1]


class TestObserve:
    def test_live_edge(self, single_edge):
        g = single_edge(0.5)
        psi = observe(g, LiveEdgeGraph(1), PartialRealization.empty(g), 0)
        assert active_set(psi) == {0, 1}
        assert psi.edge_states == (L,)

    def test_blocked_edge(self, single_edge):
        g = single_edge(0.5)
        psi = observe(g, LiveEdgeGraph(0), PartialRealization.empty(g), 0)
        assert active_set(psi) == {0}
        assert psi.edge_states == (B,)

    def test_hand_trace(self, line22):
        psi = observe(line22, LiveEdgeGraph(0b001), PartialRealization.empty(line22), 0)
        assert active_set(psi) == {0, 1}
        assert psi.edge_states == (L, B, U)
        assert psi.dom == {0} and psi.seeds == (0,)

    def test_reseeding_rejected(self, line22):
        live = LiveEdgeGraph(0b001)
        psi = realize(line22, live, [0])
        with pytest.raises(FeedbackError):
            observe(line22, live, psi, 0)

    def test_inconsistent_live_graph_rejected(self, line22):
        psi = realize(line22, LiveEdgeGraph(0b001), [0])
        with pytest.raises(FeedbackError):
            observe(line22, LiveEdgeGraph(0b011), psi, 2)

    def test_seed_order_does_not_change_state(self, line22):
        live = LiveEdgeGraph(0b101)
        assert realize(line22, live, [0, 2]) == realize(line22, live, [2, 0])

    @settings(max_examples=40)
    @given(small_graphs(max_nodes=6, max_edges=9), st.integers(0, 2**32))
    def test_observation_closure_and_consistency(self, g, seed):
        rng = np.random.default_rng(seed)
        live = sample_live_edges(g, rng)
        order = rng.permutation(g.node_count)[: int(rng.integers(1, g.node_count + 1))]
        psi = realize(g, live, order)
        gamma = active_set(psi)
        for e, (s, d, _) in enumerate(g.edges):
            assert (psi.edge_states[e] is not U) == (s in gamma)
            if s in gamma and d not in gamma:
                assert psi.edge_states[e] is B
        # every active node is reached from a seed over observed live edges
        reached = set(psi.dom)
        frontier = list(psi.dom)
        while frontier:
            v = frontier.pop()
            for e in g.out_edges[v]:
                d = g.edges[e][1]
                if psi.edge_states[e] is L and d not in reached:
                    reached.add(d)
                    frontier.append(d)
        assert reached == gamma

    def test_subrealization(self, line22):
        live = LiveEdgeGraph(0b001)
        small = realize(line22, live, [0])
        big = realize(line22, live, [0, 2])
        assert small.is_subrealization_of(big)
        assert not big.is_subrealization_of(small)


class TestBoundary:
    def test_everything_active(self, line22):
        psi = realize(line22, LiveEdgeGraph(0b111), [0])
        assert boundary(line22, psi) == frozenset()

    def test_blocked_single_edge(self, single_edge):
        g = single_edge(0.5)
        assert boundary(g, realize(g, LiveEdgeGraph(0), [0])) == {0}

    def test_in_star(self):
        g = InfluenceGraph(3, ((1, 0, 0.5), (2, 0, 0.5)))
        psi = realize(g, LiveEdgeGraph(0b01), [1])
        assert active_set(psi) == {0, 1}
        assert boundary(g, psi) == frozenset()

    def test_unique_minimum_by_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(150):
            n = int(rng.integers(1, 7))
            g = random_family(GraphKind.GENERAL, rng, n=n, m=int(rng.integers(0, min(10, n * (n - 1)) + 1)))
            live = sample_live_edges(g, rng)
            psi = realize(g, live, rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
            assert boundary_brute_force(g, psi) == [boundary(g, psi)]

    def test_in_arborescence_boundary_size(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            n = int(rng.integers(1, 13))
            g = random_family(GraphKind.IN_ARBORESCENCE, rng, n=n)
            live = sample_live_edges(g, rng)
            psi = realize(g, live, rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
            assert len(boundary(g, psi)) <= len(psi.dom)

    def test_two_hop_bound(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            g = random_family(GraphKind.GENERAL, rng, n=n, m=int(rng.integers(0, min(12, n * (n - 1)) + 1)))
            psi = realize(g, sample_live_edges(g, rng), rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
            gamma = active_set(psi)
            lhs = spread_exact(g, gamma).value
            assert lhs <= len(gamma) + spread_exact(g, boundary(g, psi)).value + 1e-9


class TestExtensions:
    def test_fully_observed(self, single_edge):
        g = single_edge(0.3)
        psi = realize(g, LiveEdgeGraph(1), [0])
        exts = list(consistent_extensions(g, psi))
        assert len(exts) == 1 and exts[0].weight == 1.0

    def test_one_unobserved(self, single_edge):
        g = single_edge(0.3)
        exts = list(consistent_extensions(g, PartialRealization.empty(g)))
        assert [e.weight for e in exts] == pytest.approx([0.7, 0.3])

    def test_line_example(self, line22):
        psi = realize(line22, LiveEdgeGraph(0b001), [0])
        exts = list(consistent_extensions(line22, psi))
        assert [e.weight for e in exts] == [0.5, 0.5]
        assert all(psi.consistent_with(e) for e in exts)


class TestMarginalGain:
    def test_active_node_has_no_gain(self, line22):
        psi = realize(line22, LiveEdgeGraph(0b001), [0])
        assert conditional_marginal_gain(line22, psi, 1) == 0.0

    @settings(max_examples=30)
    @given(small_graphs(max_nodes=5, max_edges=6))
    def test_empty_realization_is_spread(self, g):
        psi = PartialRealization.empty(g)
        for u in range(g.node_count):
            assert conditional_marginal_gain(g, psi, u) == pytest.approx(spread_exact(g, [u]).value, abs=1e-12)

    def test_line_example(self, line22):
        psi = realize(line22, LiveEdgeGraph(0b001), [0])
        assert conditional_marginal_gain(line22, psi, 2) == pytest.approx(1.5)

    def test_mc(self, line22):
        psi = realize(line22, LiveEdgeGraph(0b001), [0])
        assert conditional_marginal_gain(line22, psi, 2, "mc", samples=20_000, seed=1) == pytest.approx(1.5, abs=0.03)

    def test_rate_identity(self, line22):
        psi = realize(line22, LiveEdgeGraph(0b001), [0])
        x = [0, 0, 0.5, 0.5]
        direct = sum(x[i] * conditional_marginal_gain(line22, psi, i) for i in range(4) if i not in active_set(psi))
        assert poisson_rate(line22, psi, x) == pytest.approx(direct) == pytest.approx(1.25)

    @settings(max_examples=25, deadline=None)
    @given(small_graphs(max_nodes=5, max_edges=6))
    def test_adaptive_monotone_and_submodular(self, g):
        n = g.node_count
        for live in enumerate_live_edges(g):
            psis = [realize(g, live, nodes(d)) for d in range(1 << n)]
            gains = {}
            for d, psi in enumerate(psis):
                for u in range(n):
                    gains[d, u] = conditional_marginal_gain(g, psi, u)
                    assert gains[d, u] >= -1e-12
            for big in range(1 << n):
                for small in range(1 << n):
                    if small & ~big:
                        continue
                    for u in range(n):
                        if not (big >> u) & 1:
                            assert gains[small, u] >= gains[big, u] - 1e-9
