from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import stats

from adgap.cascade_engine import LiveEdgeGraph
from adgap.exact_oracles import E_RATIO
from adgap.gap_lab import (
    line_epsilon,
    front_line_convolution,
    front_line_mc,
    invariant_suite,
    line_active,
    lower_bound_experiment,
    measure_gap,
    multilinear_ratio_experiment,
    random_walk_ratio_experiment,
)
from adgap.cascade_engine import reachable
from adgap.graph_model import GraphKind, make_line_instance, random_family


def nbinom_expectation(k, t):
    """E[min(S, kt)] with S a sum of k geometrics on {1, 2, ...}: S - k is negative binomial."""
    n = k * t
    s = np.arange(k, n)
    pmf = stats.nbinom.pmf(s - k, k, 1 / t)
    return float(np.dot(s, pmf) + n * (1 - pmf.sum()))


class TestConvolution:
    def test_hand_value(self):
        assert front_line_convolution(2, 2) == pytest.approx(2 * 0.25 + 3 * 0.25 + 4 * 0.5, abs=1e-12)

    def test_degenerate(self):
        assert front_line_convolution(1, 1) == 1.0
        assert front_line_convolution(5, 1) == 5.0

    @pytest.mark.parametrize("k,t", [(2, 3), (3, 3), (7, 4), (20, 20), (50, 50), (100, 60)])
    def test_negative_binomial(self, k, t):
        assert front_line_convolution(k, t) == pytest.approx(nbinom_expectation(k, t), rel=1e-9)

    def test_fft_path(self):
        # kt > 4096 routes through FFT convolution
        assert front_line_convolution(70, 70) == pytest.approx(nbinom_expectation(70, 70), rel=1e-9)

    def test_mc_agrees(self):
        est = front_line_mc(10, 10, 50_000, seed=2)
        assert abs(est.value - front_line_convolution(10, 10)) <= 4 * est.stderr


class TestLineActive:
    def test_matches_reachability(self):
        rng = np.random.default_rng(0)
        g = make_line_instance(3, 3)
        seeded = rng.random((200, 9)) < 0.2
        live = rng.random((200, 8)) < 0.6
        act = line_active(seeded, live)
        for b in range(200):
            mask = sum(1 << e for e in range(8) if live[b, e])
            expect = reachable(g, LiveEdgeGraph(mask), np.flatnonzero(seeded[b]))
            assert set(np.flatnonzero(act[b])) == expect


class TestMeasureGap:
    def test_full_budget_ratio_one(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            g = random_family(GraphKind.GENERAL, rng, n=5, m=6)
            rep = measure_gap(g, 5)
            assert 1 - 1e-9 <= rep.ratio <= 1 + 1e-9

    def test_line22(self, line22):
        rep = measure_gap(line22, 2)
        assert rep.opt_n == pytest.approx(3.0)
        assert rep.opt_a == pytest.approx(3.25)
        assert 1 <= rep.ratio <= 2
        assert rep.applicable_bound == 2.0 and rep.bound_satisfied
        assert rep.opt_a_method == "exact_dp"

    def test_bipartite(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g = random_family(GraphKind.BIPARTITE, rng, left=3, right=4, density=0.5)
            rep = measure_gap(g, 2)
            assert rep.ratio <= E_RATIO + 1e-9 and rep.bound_satisfied

    def test_mc_is_labelled_lower_bound(self, line22):
        rep = measure_gap(line22, 2, "mc", samples=5000)
        assert rep.opt_a_method.startswith("lower_bound")
        assert abs(rep.opt_a - 3.25) <= 4 * rep.opt_a_stderr

    def test_mc_large_line_uses_closed_form(self):
        g = make_line_instance(5, 5)
        rep = measure_gap(g, 5, "mc", samples=500)
        assert rep.opt_n_method == "closed_form"

    def test_mc_general_graph(self):
        g = random_family(GraphKind.OUT_ARBORESCENCE, 3, n=6)
        rep = measure_gap(g, 2, "mc", samples=300)
        assert rep.opt_a_method == "lower_bound:adaptive_greedy_mc"

    def test_report(self, line22):
        rep = measure_gap(line22, 2).to_report(0)
        d = json.loads(rep.to_json())
        assert [r["name"] for r in d["rows"]] == ["opt_a", "opt_n", "ratio"]


class TestLowerBound:
    def test_single_node(self):
        rep = lower_bound_experiment(1, 1, 10)
        assert rep.value("ratio") == 1.0

    def test_line22(self):
        rep = lower_bound_experiment(2, 2, 20_000, seed=1)
        assert rep.value("front_spread_convolution") == pytest.approx(3.25)
        assert rep.value("opt_n_closed_form") == pytest.approx(3.0)
        assert rep.value("ratio_convolution") == pytest.approx(3.25 / 3)
        assert rep.row("mc_vs_convolution_abs_diff").passed

    def test_epsilon_column(self):
        rep = lower_bound_experiment(8, 3, 100)
        assert rep.value("epsilon") == pytest.approx(1.0)
        assert line_epsilon(64) == pytest.approx(0.5)

    def test_samples_checked(self):
        with pytest.raises(ValueError):
            lower_bound_experiment(2, 2, 0)


class TestLineRatios:
    def test_multilinear_no_diffusion(self):
        rep = multilinear_ratio_experiment(6, 1, 50)
        assert rep.value("F_hat") == 6 and rep.value("ratio") == 1.0

    def test_random_walk_no_diffusion(self):
        assert random_walk_ratio_experiment(6, 1, 50).value("ratio") == 1.0

    def test_multilinear_small_line_matches_exact(self):
        from adgap.exact_oracles import multilinear_exact

        g = make_line_instance(2, 4)
        x = [1.0] + [0.25] * 7
        rep = multilinear_ratio_experiment(2, 4, 40_000, seed=3)
        row = rep.row("F_hat")
        assert abs(row.value - multilinear_exact(g, x)) <= 4 * row.stderr
        assert rep.row("front_full_activation_fraction").value == 1.0

    def test_random_walk_equals_multilinear_on_lines(self):
        # the transform's seed set has exactly the rounding law, so both estimate the same F
        a = multilinear_ratio_experiment(10, 10, 20_000, seed=1).row("F_hat")
        b = random_walk_ratio_experiment(10, 10, 20_000, seed=2).row("sigma_W_hat")
        assert abs(a.value - b.value) <= 4 * math.hypot(a.stderr, b.stderr)

    def test_interior_rows(self):
        rep = multilinear_ratio_experiment(20, 5, 5000, seed=0)
        row = rep.row("interior_activation_mean")
        assert row.bound == pytest.approx(5 / 9) and row.passed


class TestSuiteEntryPoint:
    def test_zero_trials(self):
        rep = invariant_suite(0, trials=0)
        assert rep.rows == [] and rep.ok

    def test_injected_bug(self):
        rep = invariant_suite(0, trials={"boundary": 20}, suites="boundary", inject_bug="boundary")
        assert rep.row("boundary_size").value > 0 and not rep.ok
