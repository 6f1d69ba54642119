"""Brute-force ground truth for small instances.

Optimal non-adaptive and adaptive spreads, exact multilinear extensions, the
closed forms known for lines and bipartite graphs, and direct evaluators for
the inequalities the adaptivity-gap bounds are assembled from.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .cascade_engine import live_table, spread_exact, uniform_line_prob
from .feedback_model import PartialRealization, consistent_extensions, observe
from .graph_model import (
    GraphError,
    GraphKind,
    InfluenceGraph,
    bipartition,
    line_order,
    reach_prob_path,
    structural_kinds,
)
from .policy_suite import Policy
from .runtime import CapExceeded, check_cap

E_RATIO = math.e / (math.e - 1.0)

MAX_NODES_N = 16
MAX_NODES_A = 12
NAIVE_EDGE_CAP = 8
SUBSET_WORK_CAP = 1 << 27  # 2**n subsets x 2**m live graphs
COMBO_WORK_CAP = 1 << 31


@dataclass(frozen=True)
class OptResult:
    value: float
    witness: object
    method: str


# -- subset tables ----------------------------------------------------------------


def _subset_work(graph: InfluenceGraph) -> int:
    return (1 << graph.node_count) * (1 << graph.edge_count)


@lru_cache(maxsize=32)
def _subset_activation_cached(graph: InfluenceGraph) -> np.ndarray:
    table = live_table(graph)
    n = graph.node_count
    n_sub = 1 << n
    n_live = table.weights.shape[0]
    act = np.zeros((n_sub, n))
    step = max(1, (1 << 22) // n_sub)
    one = np.uint64(1)
    for start in range(0, n_live, step):
        reach = table.reach[:, start : start + step]
        w = table.weights[start : start + step]
        cov = np.zeros((n_sub, reach.shape[1]), dtype=np.uint64)
        for v in range(n):
            half = 1 << v
            cov[half : 2 * half] = cov[:half] | reach[v]
        for u in range(n):
            hit = ((cov >> np.uint64(u)) & one).astype(np.float64)
            act[:, u] += hit @ w
    act.flags.writeable = False
    return act


def subset_activation(graph: InfluenceGraph, cap: int | None = None) -> np.ndarray:
    """``A[S, u]`` = P(u active | seed set S) for every subset S (bit v of S = node v)."""
    check_cap(graph.edge_count, cap)
    if graph.node_count > MAX_NODES_N:
        raise CapExceeded(f"{graph.node_count} nodes exceeds subset cap {MAX_NODES_N}")
    if _subset_work(graph) > SUBSET_WORK_CAP:
        raise CapExceeded("2**n * 2**m exceeds the subset-table work cap")
    return _subset_activation_cached(graph)


def subset_weights(x: Sequence[float]) -> np.ndarray:
    """Independent-rounding probability of every subset, indexed as in subset_activation."""
    w = np.ones(1)
    for xv in np.asarray(x, dtype=np.float64):
        w = np.concatenate([w * (1.0 - xv), w * xv])
    return w


def _check_config(graph: InfluenceGraph, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (graph.node_count,):
        raise ValueError(f"configuration must have {graph.node_count} entries")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("configuration entries must lie in [0, 1]")
    return x


def multilinear_exact(graph: InfluenceGraph, x, cap: int | None = None) -> float:
    """F(x): expected spread when node i is seeded independently with probability x_i."""
    x = _check_config(graph, x)
    act = subset_activation(graph, cap)
    return float(subset_weights(x) @ act.sum(axis=1))


def multilinear_node_exact(graph: InfluenceGraph, x, u: int, cap: int | None = None) -> float:
    x = _check_config(graph, x)
    act = subset_activation(graph, cap)
    return float(subset_weights(x) @ act[:, u])


# -- optimal non-adaptive --------------------------------------------------------


def _lexi_argmax(candidates: list[tuple[tuple[int, ...], float]], tol: float = 1e-12):
    best = max(v for _, v in candidates)
    winners = [s for s, v in candidates if v >= best - tol]
    return best, min(winners)


def opt_n_exact(graph: InfluenceGraph, k: int, cap: int | None = None) -> OptResult:
    """Best seed set of size at most k; the witness is the lexicographically smallest maximiser."""
    if k < 0:
        raise ValueError("budget must be non-negative")
    n = graph.node_count
    if n > MAX_NODES_N:
        raise CapExceeded(f"{n} nodes exceeds cap {MAX_NODES_N}")
    check_cap(graph.edge_count, cap)
    k = min(k, n)
    if k == 0:
        return OptResult(0.0, frozenset(), "exact")
    candidates = []
    if _subset_work(graph) <= SUBSET_WORK_CAP:
        sigma = subset_activation(graph, cap).sum(axis=1)
        for size in range(k + 1):
            for combo in combinations(range(n), size):
                idx = sum(1 << v for v in combo)
                candidates.append((combo, float(sigma[idx])))
    else:
        n_sets = sum(math.comb(n, j) for j in range(k + 1))
        if n_sets * (1 << graph.edge_count) > COMBO_WORK_CAP:
            raise CapExceeded("C(n, <=k) * 2**m exceeds the enumeration work cap")
        for size in range(k + 1):
            for combo in combinations(range(n), size):
                candidates.append((combo, spread_exact(graph, combo, cap).value))
    value, witness = _lexi_argmax(candidates)
    return OptResult(value, frozenset(witness), "exact")


def line_opt_n_closed_form(graph: InfluenceGraph, k: int) -> OptResult:
    """Optimal non-adaptive spread on a directed line with a common edge probability.

    The first seed goes to the origin and the line is cut into k segments
    whose lengths differ by at most one; a segment of length L contributes
    1 + q + ... + q**(L-1), which is concave in L, so balanced cuts are optimal.
    """
    order = line_order(graph)
    q = uniform_line_prob(graph)
    n = len(order)
    k = min(k, n)
    if k <= 0:
        return OptResult(0.0, frozenset(), "closed_form")

    def segment(length: int) -> float:
        if q == 1.0:
            return float(length)
        return (1.0 - q**length) / (1.0 - q)

    short, extra = divmod(n, k)
    value = extra * segment(short + 1) + (k - extra) * segment(short)
    heads, pos = [], 0
    for j in range(k):
        heads.append(order[pos])
        pos += short + (1 if j < extra else 0)
    return OptResult(value, frozenset(heads), "closed_form")


# -- optimal adaptive ---------------------------------------------------------------


def cascade_distribution(graph: InfluenceGraph, active: int, u: int) -> dict[int, float]:
    """Distribution of the set newly activated by seeding ``u`` when ``active`` is already active.

    Only edges whose source gets reached are ever revealed, so the
    enumeration branches on those edges alone. Edges leaving ``active`` are
    known to be blocked and edges inside it are irrelevant, so the untouched
    edges keep their prior probabilities.
    """
    edges = graph.edges
    out_edges = graph.out_edges
    dist: dict[int, float] = defaultdict(float)
    stack = [(1 << u, 0, 1.0)]
    while stack:
        reached, dead, prob = stack.pop()
        pick = -1
        r, v = reached, 0
        while r and pick < 0:
            if r & 1:
                for e in out_edges[v]:
                    d = edges[e][1]
                    if not ((reached | active) >> d) & 1 and not (dead >> e) & 1:
                        pick = e
                        break
            r >>= 1
            v += 1
        if pick < 0:
            dist[reached] += prob
            continue
        p = edges[pick][2]
        if p > 0.0:
            stack.append((reached | (1 << edges[pick][1]), dead, prob * p))
        if p < 1.0:
            stack.append((reached, dead | (1 << pick), prob * (1.0 - p)))
    return dict(dist)


class AdaptiveDP:
    """Backward induction over (active set, remaining budget).

    Under full-adoption feedback the only information that matters for the
    future is which nodes are active: out-edges of active nodes are observed,
    every observed edge leaving the active set is blocked, and the rest keep
    their priors.
    """

    def __init__(self, graph: InfluenceGraph):
        self.graph = graph
        self._trans: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {}
        self._memo: dict[tuple[int, int], tuple[float, int | None]] = {}

    def transitions(self, active: int, u: int):
        key = (active, u)
        if key not in self._trans:
            dist = cascade_distribution(self.graph, active, u)
            self._trans[key] = tuple((active | r, p) for r, p in sorted(dist.items()))
        return self._trans[key]

    def solve(self, active: int, budget: int) -> tuple[float, int | None]:
        key = (active, budget)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        stay = float(active.bit_count())
        best, arg = stay, None
        if budget > 0:
            for u in range(self.graph.node_count):
                if (active >> u) & 1:
                    continue
                val = sum(p * self.solve(nxt, budget - 1)[0] for nxt, p in self.transitions(active, u))
                if val > best + 1e-12:
                    best, arg = val, u
        self._memo[key] = (best, arg)
        return best, arg

    @property
    def states(self) -> int:
        return len(self._memo)


class OptimalAdaptivePolicy(Policy):
    """Plays the argmax recorded by an :class:`AdaptiveDP`."""

    name = "opt_adaptive"

    def __init__(self, dp: AdaptiveDP):
        self.dp = dp

    def next(self, psi, remaining):
        return self.dp.solve(psi.active_mask, remaining)[1]


def opt_a_exact(graph: InfluenceGraph, k: int, cap: int | None = None) -> OptResult:
    if k < 0:
        raise ValueError("budget must be non-negative")
    n = graph.node_count
    if n > MAX_NODES_A:
        raise CapExceeded(f"{n} nodes exceeds adaptive DP cap {MAX_NODES_A}")
    check_cap(graph.edge_count, cap)
    dp = AdaptiveDP(graph)
    value, _ = dp.solve(0, min(k, n))
    return OptResult(value, OptimalAdaptivePolicy(dp), "exact_dp")


def opt_a_naive(graph: InfluenceGraph, k: int, cap: int = NAIVE_EDGE_CAP) -> OptResult:
    """Optimal adaptive spread by backward induction over full partial realizations.

    No state collapsing: the memo key is the complete observation (seed set,
    observed edges and their states), every unseeded node is a candidate and
    outcomes come from enumerating all completions of the unobserved edges.
    """
    check_cap(graph.edge_count, cap)
    n = graph.node_count
    memo: dict = {}

    def value(psi: PartialRealization, budget: int) -> float:
        key = (psi, budget)
        if key in memo:
            return memo[key]
        best = float(psi.value)
        if budget > 0:
            for u in range(n):
                if u in psi.dom:
                    continue
                outcomes: dict[PartialRealization, float] = defaultdict(float)
                for ext in consistent_extensions(graph, psi, cap):
                    outcomes[observe(graph, ext, psi, u)] += ext.weight
                val = sum(w * value(nxt, budget - 1) for nxt, w in outcomes.items())
                best = max(best, val)
        memo[key] = best
        return best

    return OptResult(value(PartialRealization.empty(graph), min(k, n)), None, "exact_naive")


# -- closed forms and bound calculators -------------------------------------------


def bipartite_Fu_closed_form(graph: InfluenceGraph, x, u: int) -> float:
    """Activation probability of node u under independent rounding on a bipartite graph.

    Every node i reaches u with probability p_i (1 for u itself, the edge
    probability for an in-neighbour, 0 otherwise) and these events are
    independent, so P(u active) = 1 - prod_i (1 - p_i x_i).
    """
    if bipartition(graph) is None:
        raise GraphError("graph is not one-directional bipartite")
    x = _check_config(graph, x)
    miss = 1.0 - x[u]
    for e in graph.in_edges[u]:
        s, _, p = graph.edges[e]
        miss *= 1.0 - p * x[s]
    return 1.0 - miss


def lemma41_upper_bound(x: Sequence[float], p: Sequence[float]) -> float:
    """Upper bound on the adaptive activation probability of a node with a line of predecessors.

    ``x[j]`` and ``p[j]`` refer to the node's j-th predecessor (j = 0 is the
    node itself, so ``p[0] == 1``): seeding marginal and probability of
    reaching the node. Returns ``min_i sum_{j<=i} x_j p_j + p_{i+1}``, with
    ``p`` past the end taken as 0.
    """
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if x.shape != p.shape:
        raise ValueError("x and p must have the same length")
    if p.size == 0:
        return 0.0
    prefix = np.cumsum(x * p)
    tail = np.append(p[1:], 0.0)
    return float(np.min(prefix + tail))


def predecessor_chain(graph: InfluenceGraph, target: int) -> list[int]:
    """Target followed by its predecessors, nearest first; requires unique in-edges upstream."""
    chain = [target]
    while True:
        incoming = graph.in_edges[chain[-1]]
        if not incoming:
            return chain
        if len(incoming) > 1:
            raise GraphError(f"node {chain[-1]} has several in-edges; predecessors are not a line")
        chain.append(graph.edges[incoming[0]][0])


def telescoping_identity_check(graph: InfluenceGraph, x, target: int | None = None, cap=None) -> float:
    """Largest violation of the per-predecessor telescoping identity for the target's activation.

    With predecessors ordered nearest first and ``z_i`` the configuration
    with the target and its first i-1 predecessors zeroed out, checks
    ``F_t(z_i) - F_t(z_{i+1}) = x_i p_i (1 - F_i(z_{i+1}))`` for every i.
    """
    x = _check_config(graph, x)
    if target is None:
        target = line_order(graph)[-1]
    chain = predecessor_chain(graph, target)
    probs = [reach_prob_path(graph, v, target) for v in chain]
    act = subset_activation(graph, cap)

    def F(node: int, zeroed: int) -> float:
        z = x.copy()
        z[chain[:zeroed]] = 0.0
        return float(subset_weights(z) @ act[:, node])

    worst = 0.0
    for i, v in enumerate(chain):
        lhs = F(target, i) - F(target, i + 1)
        rhs = x[v] * probs[i] * (1.0 - F(v, i + 1))
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    passed: bool


def weak_concavity_check(
    graph: InfluenceGraph, budget_distribution: Mapping[int, float], cap=None
) -> InequalityCheck:
    """E[OPT_N(G, X)] against e/(e-1) * OPT_N(G, E[X]) for an integer-mean budget X."""
    n = graph.node_count
    dist = {int(j): float(q) for j, q in budget_distribution.items() if q != 0}
    if any(j < 0 or j > n for j in dist):
        raise ValueError("budget support must lie in [0, n]")
    if any(q < 0 for q in dist.values()) or abs(sum(dist.values()) - 1.0) > 1e-9:
        raise ValueError("budget distribution must be a probability distribution")
    mean = sum(j * q for j, q in dist.items())
    k = round(mean)
    if abs(mean - k) > 1e-9:
        raise ValueError(f"budget mean {mean} is not an integer")
    lhs = sum(q * opt_n_exact(graph, j, cap).value for j, q in dist.items())
    rhs = E_RATIO * opt_n_exact(graph, k, cap).value
    return InequalityCheck(lhs, rhs, lhs <= rhs + 1e-9)


def eq15_inequality_check(y: Sequence[float]) -> InequalityCheck:
    """1 - prod(1 - y_i) >= (1 - 1/e) * min(1, sum y_i) for y in [0, 1]^n."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("entries must lie in [0, 1]")
    lhs = float(1.0 - np.prod(1.0 - y))
    rhs = float((1.0 - 1.0 / math.e) * min(1.0, float(y.sum())))
    return InequalityCheck(lhs, rhs, lhs >= rhs - 1e-12)


def applicable_gap_bound(graph: InfluenceGraph) -> tuple[float | None, str]:
    """Tightest proven adaptivity-gap upper bound for the graph's structure."""
    kinds = structural_kinds(graph)
    options = []
    if GraphKind.BIPARTITE in kinds:
        options.append((E_RATIO, "e/(e-1)"))
    if GraphKind.OUT_ARBORESCENCE in kinds:
        options.append((2.0, "2"))
    if GraphKind.IN_ARBORESCENCE in kinds:
        options.append((2.0 * E_RATIO, "2e/(e-1)"))
    if not options:
        return None, "none"
    return min(options)
