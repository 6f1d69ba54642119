from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings

from adgap.cascade_engine import (
    LiveEdgeGraph,
    enumerate_live_edges,
    line_spread_closed_form,
    per_node_activation,
    reachable,
    sample_live_edges,
    spread_exact,
    spread_mc,
)
from adgap.graph_model import GraphKind, InfluenceGraph, make_line_instance, random_family, reach_prob_path
from adgap.runtime import CapExceeded

from .strategies import small_graphs


def brute_spread(graph, seeds):
    """Independent oracle: explicit DFS per live graph, probabilities multiplied edge by edge."""
    total = 0.0
    m = graph.edge_count
    for mask in range(1 << m):
        w = 1.0
        adj = {v: [] for v in range(graph.node_count)}
        for e, (s, d, p) in enumerate(graph.edges):
            if (mask >> e) & 1:
                w *= p
                adj[s].append(d)
            else:
                w *= 1 - p
        seen = set(seeds)
        stack = list(seeds)
        while stack:
            v = stack.pop()
            for d in adj[v]:
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        total += w * len(seen)
    return total


class TestLiveEdges:
    def test_all_live(self):
        g = make_line_instance(2, 2).with_kind(GraphKind.GENERAL)
        g = InfluenceGraph(4, tuple((s, d, 1.0) for s, d, _ in g.edges))
        rng = np.random.default_rng(0)
        assert all(sample_live_edges(g, rng).live_mask == 0b111 for _ in range(50))

    def test_all_blocked(self):
        g = InfluenceGraph(3, ((0, 1, 0.0), (1, 2, 0.0)))
        rng = np.random.default_rng(0)
        assert all(sample_live_edges(g, rng).live_mask == 0 for _ in range(50))

    def test_bernoulli_frequency(self, single_edge):
        g = single_edge(0.5)
        rng = np.random.default_rng(1)
        n = 100_000
        hits = sum(sample_live_edges(g, rng).live_mask for _ in range(n))
        se = np.sqrt(0.25 / n)
        assert abs(hits / n - 0.5) <= 3 * se

    def test_enumerate_no_edges(self):
        out = list(enumerate_live_edges(InfluenceGraph(3)))
        assert out == [LiveEdgeGraph(0, 1.0)]

    def test_enumerate_one_edge(self, single_edge):
        assert [x.weight for x in enumerate_live_edges(single_edge(0.3))] == pytest.approx([0.7, 0.3])

    def test_enumerate_uniform(self):
        g = make_line_instance(1, 4).with_kind(GraphKind.GENERAL)
        g = InfluenceGraph(4, tuple((s, d, 0.5) for s, d, _ in g.edges))
        ws = [x.weight for x in enumerate_live_edges(g)]
        assert len(ws) == 8 and all(w == 0.125 for w in ws)

    def test_cap(self, monkeypatch):
        g = random_family(GraphKind.GENERAL, 0, n=6, m=12)
        with pytest.raises(CapExceeded):
            next(enumerate_live_edges(g, cap=10))
        monkeypatch.setenv("ADGAP_EDGE_CAP", "11")
        with pytest.raises(CapExceeded):
            spread_exact(g, [0])

    @given(small_graphs(max_nodes=4, max_edges=5))
    def test_weights_sum_to_one(self, g):
        assert sum(x.weight for x in enumerate_live_edges(g)) == pytest.approx(1.0, abs=1e-12)


class TestReachable:
    def test_no_seeds(self, line22):
        assert reachable(line22, LiveEdgeGraph(0b111), []) == frozenset()

    def test_live_edge(self):
        assert reachable(make_line_instance(1, 2), LiveEdgeGraph(1), [0]) == {0, 1}

    def test_hand_trace(self, line22):
        # only edge 1->2 live
        assert reachable(line22, LiveEdgeGraph(0b010), [0]) == {0}


class TestSpread:
    def test_empty(self, line22):
        assert spread_exact(line22, []).value == 0.0
        assert spread_mc(line22, [], 10).value == 0.0

    def test_single_edge(self, single_edge):
        assert spread_exact(single_edge(0.3), [0]).value == pytest.approx(1.3, abs=1e-12)

    def test_line_k1_t2(self):
        assert spread_exact(make_line_instance(1, 2), [0]).value == pytest.approx(1.5, abs=1e-12)

    def test_mc_forced(self):
        g = InfluenceGraph(4, ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)), GraphKind.LINE)
        est = spread_mc(g, [0], 500)
        assert est.value == 4.0 and est.stderr == 0.0

    def test_mc_single_edge(self, single_edge):
        est = spread_mc(single_edge(0.3), [0], 100_000, seed=3)
        assert abs(est.value - 1.3) <= 3 * est.stderr

    def test_mc_consistency_many_instances(self):
        rng = np.random.default_rng(11)
        bad = 0
        for _ in range(100):
            n = int(rng.integers(2, 7))
            g = random_family(GraphKind.GENERAL, rng, n=n, m=int(rng.integers(0, min(8, n * (n - 1)) + 1)))
            seeds = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
            est = spread_mc(g, seeds, 4000, seed=int(rng.integers(1 << 30)))
            bad += abs(est.value - spread_exact(g, seeds).value) > 4 * est.stderr + 1e-12
        assert bad == 0

    def test_mc_thread_count_irrelevant(self):
        g = random_family(GraphKind.GENERAL, 4, n=8, m=14)
        a = spread_mc(g, [0, 3], 20_000, seed=5, threads=1, chunk_size=1000)
        b = spread_mc(g, [0, 3], 20_000, seed=5, threads=8, chunk_size=1000)
        assert a == b

    @settings(max_examples=40)
    @given(small_graphs(max_nodes=5, max_edges=6))
    def test_matches_brute_force(self, g):
        for seeds in ([0], list(range(g.node_count))[::2]):
            assert spread_exact(g, seeds).value == pytest.approx(brute_spread(g, seeds), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(small_graphs(max_nodes=5, max_edges=6))
    def test_monotone_submodular(self, g):
        n = g.node_count
        sig = [spread_exact(g, [v for v in range(n) if (s >> v) & 1]).value for s in range(1 << n)]
        for big in range(1 << n):
            for small in range(1 << n):
                if small & ~big:
                    continue
                assert sig[small] <= sig[big] + 1e-9
                for u in range(n):
                    if (big >> u) & 1:
                        continue
                    gain_small = sig[small | 1 << u] - sig[small]
                    gain_big = sig[big | 1 << u] - sig[big]
                    assert gain_small >= gain_big - 1e-9


class TestPerNode:
    def test_seed_is_certain(self, line22):
        assert per_node_activation(line22, [2])[2] == 1.0

    def test_single_edge(self, single_edge):
        assert per_node_activation(single_edge(0.3), [0]) == pytest.approx([1.0, 0.3])

    def test_line_path_products(self, line22):
        act = per_node_activation(line22, [0])
        assert act == pytest.approx([1, 0.5, 0.25, 0.125], abs=1e-15)
        assert act == pytest.approx([reach_prob_path(line22, 0, v) for v in range(4)])

    @settings(max_examples=30)
    @given(small_graphs(max_nodes=5, max_edges=7))
    def test_sums_to_spread(self, g):
        seeds = [0]
        assert per_node_activation(g, seeds).sum() == pytest.approx(spread_exact(g, seeds).value, abs=1e-12)

    def test_mc_close_to_exact(self, line22):
        act = per_node_activation(line22, [0], "mc", samples=50_000, seed=2)
        assert act == pytest.approx([1, 0.5, 0.25, 0.125], abs=0.01)


class TestLineClosedForm:
    def test_front_value(self, line22):
        assert line_spread_closed_form(line22, [0, 2]) == pytest.approx(3.0)

    def test_empty(self, line22):
        assert line_spread_closed_form(line22, []) == 0.0

    def test_geometric(self):
        assert line_spread_closed_form(make_line_instance(1, 3), [0]) == pytest.approx(19 / 9, abs=1e-12)

    @pytest.mark.parametrize("k,t", [(2, 3), (3, 2), (1, 6)])
    def test_matches_exact(self, k, t):
        g = make_line_instance(k, t)
        rng = np.random.default_rng(k * 10 + t)
        for _ in range(5):
            seeds = rng.choice(k * t, size=int(rng.integers(1, k * t + 1)), replace=False)
            assert line_spread_closed_form(g, seeds) == pytest.approx(spread_exact(g, seeds).value, abs=1e-12)
