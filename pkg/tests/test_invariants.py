from __future__ import annotations

import pytest

from adgap.invariants import CHECKS, DEFAULT_TRIALS, invariant_suite, violation_count


def test_every_check_runs_clean_at_small_scale():
    rep = invariant_suite(seed=11, trials=3)
    assert rep.ok and violation_count(rep) == 0
    names = {r.name for r in rep.rows}
    assert {"adaptive_submodularity", "boundary_size", "two_hop", "telescoping", "gap_bipartite"} <= names
    for row in rep.rows:
        assert row.extra["trials"] > 0
        assert "lemma" not in row.extra["anchor"].lower()


def test_rows_are_reproducible():
    a = invariant_suite(seed=5, trials=2, suites=["boundary", "telescoping"])
    b = invariant_suite(seed=5, trials=2, suites=["telescoping", "boundary"])
    assert {r.name: r.extra["max_residual"] for r in a.rows} == {r.name: r.extra["max_residual"] for r in b.rows}


def test_unknown_suite():
    with pytest.raises(KeyError):
        invariant_suite(suites="nope")


def test_zero_trials_table_is_empty():
    rep = invariant_suite(trials=0)
    assert rep.rows == [] and rep.ok


def test_injected_boundary_bug_is_reported():
    rep = invariant_suite(trials={"boundary": 50}, suites="boundary", inject_bug="boundary")
    row = rep.row("boundary_size")
    assert row.value == 50 and row.passed is False
    assert violation_count(rep) == 50


def test_informational_rows_never_fail():
    rep = invariant_suite(trials=2, suites="greedy_approximation")
    info = rep.row("pipage_upper_reported")
    assert info.passed is None


def test_defaults_cover_all_checks():
    assert set(DEFAULT_TRIALS) == set(CHECKS)
