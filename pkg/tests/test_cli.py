from __future__ import annotations

import json

import pytest

from adgap.cli import main
from adgap.graph_model import load_graph, make_line_instance


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def line_file(tmp_path, capsys):
    path = tmp_path / "g.json"
    code, _, _ = run(capsys, "gen", "line", "--k", "2", "--t", "2", "-o", str(path))
    assert code == 0
    return path


def test_gen_round_trip(line_file):
    assert load_graph(line_file) == make_line_instance(2, 2)


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "in_arborescence", "--n", "7"],
        ["gen", "out_arborescence", "--n", "7"],
        ["gen", "bipartite", "--left", "3", "--right", "4", "--density", "0.5"],
        ["gen", "general", "--n", "5", "--m", "8"],
    ],
)
def test_gen_families(tmp_path, capsys, argv):
    path = tmp_path / "g.json"
    code, _, _ = run(capsys, *argv, "--seed", "4", "-o", str(path))
    assert code == 0
    g = load_graph(path)
    assert g.kind.value == argv[1]
    code, _, _ = run(capsys, *argv, "--seed", "4", "-o", str(tmp_path / "h.json"))
    assert load_graph(tmp_path / "h.json") == g


def test_gap(capsys, line_file):
    code, out, _ = run(capsys, "gap", str(line_file), "--budget", "2", "--method", "exact", "--deterministic")
    assert code == 0
    d = json.loads(out)
    rows = {r["name"]: r for r in d["rows"]}
    assert rows["opt_n"]["value"] == 3.0
    assert rows["opt_a"]["value"] == 3.25
    assert rows["ratio"]["pass"] is True


def test_opt_modes(capsys, line_file):
    _, out, _ = run(capsys, "opt", str(line_file), "--budget", "2", "--mode", "nonadaptive", "--deterministic")
    d = json.loads(out)
    assert d["params"]["witness"] == [0, 2] and d["rows"][0]["value"] == 3.0
    _, out, _ = run(capsys, "--csv", "opt", str(line_file), "--budget", "2", "--mode", "adaptive")
    assert out.splitlines()[1].startswith("opt_a,3.25")


def test_spread_csv(capsys, line_file):
    code, out, _ = run(capsys, "spread", str(line_file), "--seeds", "0", "--csv")
    assert code == 0
    assert out.splitlines()[1] == "spread,1.875,0.0,,"


def test_poisson(capsys, line_file):
    code, out, _ = run(capsys, "poisson", str(line_file), "--x", "1,0.5,0.5,0.5", "--samples", "3000", "--deterministic")
    rows = {r["name"]: r for r in json.loads(out)["rows"]}
    assert code == 0 and rows["multilinear_at_1_minus_exp"]["pass"] and rows["mc_vs_exact_abs_diff"]["pass"]


@pytest.mark.parametrize("cmd", ["lowerbound", "mlratio", "rwratio"])
def test_line_experiments_deterministic_across_threads(capsys, cmd):
    base = [cmd, "--k", "6", "--t", "5", "--samples", "30000", "--seed", "99", "--deterministic"]
    _, one, _ = run(capsys, *base, "--threads", "1")
    _, eight, _ = run(capsys, *base, "--threads", "8")
    assert one == eight
    assert json.loads(one)["seed"] == 99


def test_verify_ok(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "telescoping", "--trials", "5", "--seed", "7")
    assert code == 0
    assert json.loads(out)["rows"][0]["pass"] is True


def test_verify_zero_trials(capsys):
    code, out, _ = run(capsys, "verify", "--trials", "0", "--deterministic")
    assert code == 0 and json.loads(out)["rows"] == []


def test_verify_violation_exit_code(capsys, monkeypatch):
    import adgap.gap_lab as gap_lab

    real = gap_lab.invariant_suite
    monkeypatch.setattr(gap_lab, "invariant_suite", lambda seed, trials, caps, suites: real(seed, 5, caps, "boundary", "boundary"))
    code, _, err = run(capsys, "verify", "--suite", "boundary")
    assert code == 3 and "violation" in err


def test_usage_errors(capsys, line_file):
    assert run(capsys)[0] == 1
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "lowerbound", "--k", "2")[0] == 1
    assert run(capsys, "lowerbound", "--k", "2", "--t", "2", "--samples", "0")[0] == 1
    assert run(capsys, "--seed", "-1", "verify")[0] == 1
    assert run(capsys, "gen", "line", "--k", "2", "-o", "x.json")[0] == 1
    assert run(capsys, "spread", str(line_file), "--seeds", "9")[0] == 1
    assert run(capsys, "poisson", str(line_file), "--x", "1,2")[0] == 1
    assert run(capsys, "spread", "missing.json", "--seeds", "0")[0] == 1


def test_cap_exceeded(tmp_path, capsys, monkeypatch):
    path = tmp_path / "g.json"
    run(capsys, "gen", "general", "--n", "8", "--m", "25", "-o", str(path))
    monkeypatch.setenv("ADGAP_EDGE_CAP", "10")
    code, _, err = run(capsys, "spread", str(path), "--seeds", "0")
    assert code == 2 and "cap" in err
    code, _, _ = run(capsys, "--edge-cap", "30", "spread", str(path), "--seeds", "0", "--method", "mc", "--samples", "100")
    assert code == 0


def test_global_flags_after_subcommand(capsys, line_file):
    a = run(capsys, "--seed", "3", "--deterministic", "spread", str(line_file), "--seeds", "0", "--method", "mc", "--samples", "500")
    b = run(capsys, "spread", str(line_file), "--seeds", "0", "--method", "mc", "--samples", "500", "--seed", "3", "--deterministic")
    assert a[1] == b[1]
