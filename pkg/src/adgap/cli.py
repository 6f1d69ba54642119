"""``adgap`` command-line entry point.

Reports go to stdout as JSON (or CSV with ``--csv``); diagnostics go to
stderr. Exit codes: 0 success, 1 usage error, 2 enumeration cap exceeded,
3 invariant violation.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import gap_lab
from .cascade_engine import per_node_activation, spread_exact, spread_mc
from .exact_oracles import multilinear_exact, opt_a_exact, opt_n_exact
from .graph_model import GraphError, GraphKind, load_graph, make_line_instance, random_family, save_graph
from .invariants import CHECKS, violation_count
from .policy_suite import (
    adaptive_greedy_policy,
    nonadaptive_greedy,
    poisson_expected_value_exact,
    poisson_spread_mc,
    policy_spread,
)
from .reports import Report
from .runtime import CapExceeded, edge_cap

EXIT_OK, EXIT_USAGE, EXIT_CAP, EXIT_VIOLATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated node ids: {exc}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}") from None


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    # attached to the top-level parser and every subcommand, so the flags may
    # appear on either side of the subcommand name
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=_u64, default=d(0), help="master seed (default 0)")
    p.add_argument("--csv", action="store_true", default=d(False), help="emit CSV instead of JSON")
    p.add_argument("--deterministic", action="store_true", default=d(False), help="omit the wall-clock timestamp")
    p.add_argument("--threads", type=_positive, default=d(1), help="worker threads for Monte Carlo")
    p.add_argument("--edge-cap", type=_positive, default=d(None), help="edge-enumeration cap (overrides ADGAP_EDGE_CAP)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = _Parser(prog="adgap", description="Adaptivity-gap experiments for influence maximization.",
                     parents=[_global_options(suppress=False)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", parents=[common], help="generate a graph file")
    gen.add_argument("family", choices=[k.value for k in GraphKind])
    gen.add_argument("--k", type=_positive, help="line: number of blocks")
    gen.add_argument("--t", type=_positive, help="line: block length")
    gen.add_argument("--n", type=_positive, help="nodes (arborescence, general)")
    gen.add_argument("--m", type=_non_negative, help="edges (general)")
    gen.add_argument("--left", type=_positive, help="bipartite: left side size")
    gen.add_argument("--right", type=_non_negative, help="bipartite: right side size")
    gen.add_argument("--density", type=float, default=0.5, help="bipartite: edge density")
    gen.add_argument("--p-min", type=float, default=0.0)
    gen.add_argument("--p-max", type=float, default=1.0)
    gen.add_argument("-o", "--output", required=True, help="graph JSON file to write")

    spread = sub.add_parser("spread", parents=[common], help="influence spread of a seed set")
    spread.add_argument("graph")
    spread.add_argument("--seeds", type=_int_list, required=True, help="comma-separated node ids")
    spread.add_argument("--method", choices=("exact", "mc"), default="exact")
    spread.add_argument("--samples", type=_positive, default=10_000)

    opt = sub.add_parser("opt", parents=[common], help="optimal adaptive or non-adaptive spread")
    opt.add_argument("graph")
    opt.add_argument("--budget", type=_non_negative, required=True)
    opt.add_argument("--mode", choices=("adaptive", "nonadaptive"), default="nonadaptive")
    opt.add_argument("--method", choices=("exact", "mc"), default="exact")
    opt.add_argument("--samples", type=_positive, default=10_000)

    gap = sub.add_parser("gap", parents=[common], help="adaptivity gap of one instance")
    gap.add_argument("graph")
    gap.add_argument("--budget", type=_non_negative, required=True)
    gap.add_argument("--method", choices=("exact", "mc"), default="exact")
    gap.add_argument("--samples", type=_positive, default=10_000)

    for name, text in (
        ("lowerbound", "front policy against OPT_N on line(k, t)"),
        ("mlratio", "kt against F(1, 1/t, ..., 1/t) on line(k, t)"),
        ("rwratio", "kt against the random-walk transform's spread on line(k, t)"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--k", type=_positive, required=True)
        p.add_argument("--t", type=_positive, required=True)
        p.add_argument("--samples", type=_positive, default=10_000)

    poisson = sub.add_parser("poisson", parents=[common], help="Poisson-clock seeding process")
    poisson.add_argument("graph")
    poisson.add_argument("--x", type=_float_list, required=True, help="comma-separated clock rates")
    poisson.add_argument("--samples", type=_positive, default=10_000)

    verify = sub.add_parser("verify", parents=[common], help="run the property-verification suite")
    verify.add_argument("--suite", default="all", choices=["all", *CHECKS])
    verify.add_argument("--trials", type=_non_negative, help="trial count for every selected check")
    return parser


# -- subcommands -----------------------------------------------------------------


def _cmd_gen(args) -> Report | None:
    fam = GraphKind(args.family)
    rng = np.random.default_rng(args.seed)
    if fam is GraphKind.LINE:
        if args.k is None or args.t is None:
            raise UsageError("gen line needs --k and --t")
        graph = make_line_instance(args.k, args.t)
    elif fam is GraphKind.BIPARTITE:
        if args.left is None or args.right is None:
            raise UsageError("gen bipartite needs --left and --right")
        graph = random_family(fam, rng, left=args.left, right=args.right, density=args.density,
                              p_range=(args.p_min, args.p_max))
    elif fam is GraphKind.GENERAL:
        if args.n is None or args.m is None:
            raise UsageError("gen general needs --n and --m")
        graph = random_family(fam, rng, n=args.n, m=args.m, p_range=(args.p_min, args.p_max))
    else:
        if args.n is None:
            raise UsageError(f"gen {fam.value} needs --n")
        graph = random_family(fam, rng, n=args.n, p_range=(args.p_min, args.p_max))
    save_graph(graph, args.output)
    print(f"wrote {graph.kind.value} graph with {graph.node_count} nodes and "
          f"{graph.edge_count} edges to {args.output}", file=sys.stderr)
    return None


def _cmd_spread(args) -> Report:
    graph = load_graph(args.graph)
    bad = [v for v in args.seeds if not 0 <= v < graph.node_count]
    if bad:
        raise UsageError(f"seed ids out of range: {bad}")
    params = {"graph": args.graph, "seeds": sorted(set(args.seeds)), "method": args.method}
    rep = Report("spread", params, args.seed)
    if args.method == "exact":
        est = spread_exact(graph, args.seeds, args.edge_cap)
    else:
        params["samples"] = args.samples
        est = spread_mc(graph, args.seeds, args.samples, args.seed, args.threads)
    rep.add("spread", est.value, est.stderr)
    act = per_node_activation(graph, args.seeds, args.method, args.samples, args.seed, args.threads, args.edge_cap)
    for v, a in enumerate(act):
        rep.add(f"activation[{v}]", float(a))
    return rep


def _cmd_opt(args) -> Report:
    graph = load_graph(args.graph)
    k = args.budget
    params = {"graph": args.graph, "budget": k, "mode": args.mode, "method": args.method}
    rep = Report("opt", params, args.seed)
    if args.method == "exact":
        if args.mode == "adaptive":
            res = opt_a_exact(graph, k, args.edge_cap)
            params["first_seed"] = res.witness.dp.solve(0, min(k, graph.node_count))[1]
        else:
            res = opt_n_exact(graph, k, args.edge_cap)
            params["witness"] = sorted(res.witness)
        params["provenance"] = res.method
        rep.add(f"opt_{'a' if args.mode == 'adaptive' else 'n'}", res.value, 0.0)
        return rep
    params["samples"] = args.samples
    if args.mode == "adaptive":
        pol = adaptive_greedy_policy("mc", samples=max(200, args.samples // 50), seed=args.seed)
        est = policy_spread(graph, pol, k, "mc", args.samples, args.seed)
        params["provenance"] = "lower_bound:adaptive_greedy_mc"
        rep.add("opt_a_lower_bound", est.value, est.stderr)
    else:
        seeds = nonadaptive_greedy(graph, k, "mc", args.samples, args.seed)
        est = spread_mc(graph, seeds, args.samples, args.seed, args.threads)
        params["witness"] = sorted(seeds)
        params["provenance"] = "lower_bound:greedy_mc"
        rep.add("opt_n_lower_bound", est.value, est.stderr)
    return rep


def _cmd_gap(args) -> Report:
    graph = load_graph(args.graph)
    res = gap_lab.measure_gap(graph, args.budget, args.method, args.samples, args.seed, args.edge_cap)
    rep = res.to_report(args.seed)
    rep.params["graph"] = args.graph
    rep.params["method"] = args.method
    if args.method == "mc":
        rep.params["samples"] = args.samples
    return rep


def _cmd_line(fn):
    def run(args) -> Report:
        return fn(args.k, args.t, args.samples, args.seed, args.threads)

    return run


def _cmd_poisson(args) -> Report:
    graph = load_graph(args.graph)
    if len(args.x) != graph.node_count:
        raise UsageError(f"--x has {len(args.x)} entries, graph has {graph.node_count} nodes")
    if any(v < 0 or not math.isfinite(v) for v in args.x):
        raise UsageError("clock rates must be finite and non-negative")
    x = np.asarray(args.x)
    rep = Report("poisson", {"graph": args.graph, "x": list(args.x), "samples": args.samples}, args.seed)
    est = poisson_spread_mc(graph, x, args.samples, args.seed, args.threads)
    rep.add("poisson_spread_mc", est.value, est.stderr)
    try:
        exact = poisson_expected_value_exact(graph, x, args.edge_cap)
        ml = multilinear_exact(graph, 1.0 - np.exp(-x), args.edge_cap)
    except CapExceeded as exc:
        print(f"exact cross-check skipped: {exc}", file=sys.stderr)
    else:
        rep.add("poisson_expected_exact", exact, 0.0)
        rep.add("multilinear_at_1_minus_exp", ml, 0.0, exact, abs(ml - exact) <= 1e-9)
        rep.add("mc_vs_exact_abs_diff", abs(est.value - exact), est.stderr, 4.0 * est.stderr,
                abs(est.value - exact) <= 4.0 * est.stderr + 1e-12)
    rep.add("expected_firings", float(np.sum(1.0 - np.exp(-x))), 0.0, float(x.sum()))
    return rep


def _cmd_verify(args) -> Report:
    return gap_lab.invariant_suite(args.seed, args.trials, None, args.suite)


COMMANDS = {
    "gen": _cmd_gen,
    "spread": _cmd_spread,
    "opt": _cmd_opt,
    "gap": _cmd_gap,
    "lowerbound": _cmd_line(gap_lab.lower_bound_experiment),
    "mlratio": _cmd_line(gap_lab.multilinear_ratio_experiment),
    "rwratio": _cmd_line(gap_lab.random_walk_ratio_experiment),
    "poisson": _cmd_poisson,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.edge_cap is None:
            args.edge_cap = edge_cap()
        report = COMMANDS[args.command](args)
    except CapExceeded as exc:
        print(f"adgap: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, GraphError, OSError, ValueError, KeyError) as exc:
        print(f"adgap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if report is None:
        return EXIT_OK
    sys.stdout.write(report.to_csv() if args.csv else report.to_json(args.deterministic) + "\n")
    if args.command == "verify":
        bad = violation_count(report)
        if bad:
            print(f"adgap: {bad} invariant violation(s)", file=sys.stderr)
            return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
