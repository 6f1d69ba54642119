"""Seeding policies, their evaluation, the Poisson clock process and the
random-walk transform of an adaptive policy into a random seed set."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .cascade_engine import (
    LiveEdgeGraph,
    SpreadEstimate,
    enumerate_live_edges,
    live_table,
    sample_live_edges,
    spread_exact,
    spread_mc,
)
from .feedback_model import (
    PartialRealization,
    active_set,
    conditional_marginal_gain,
    observe,
)
from .graph_model import InfluenceGraph, line_order
from .runtime import DEFAULT_CHUNK, MomentAccumulator, chunk_rng, chunk_sizes, run_chunks

GAIN_EPS = 1e-12


class PolicyError(RuntimeError):
    pass


class Policy:
    """Maps a partial realization and remaining budget to the next seed, or None to stop."""

    name = "policy"
    randomized = False

    def begin(self, graph: InfluenceGraph) -> None:
        """Hook run at the start of every policy execution."""

    def next(self, psi: PartialRealization, remaining: int) -> int | None:
        raise NotImplementedError


class FixedSetPolicy(Policy):
    """Non-adaptive: seeds a fixed set in increasing id order."""

    def __init__(self, seeds: Iterable[int]):
        self.seeds = tuple(sorted(set(int(v) for v in seeds)))
        self.name = f"fixed{list(self.seeds)}"

    def next(self, psi, remaining):
        for v in self.seeds:
            if v not in psi.dom:
                return v
        return None


class FrontPolicy(Policy):
    """On a directed line, seed the inactive node closest to the origin.

    ``budget=None`` gives the unbounded variant, which keeps going until the
    whole line is active.
    """

    def __init__(self, budget: int | None = None):
        self.budget = budget
        self.name = "front" if budget is not None else "front_unbounded"
        self._order: tuple[int, ...] = ()

    def begin(self, graph):
        self._order = line_order(graph)

    def next(self, psi, remaining):
        if self.budget is not None and len(psi.dom) >= self.budget:
            return None
        active = psi.active_mask
        for v in self._order:
            if not (active >> v) & 1:
                return v
        return None


class AdaptiveGreedyPolicy(Policy):
    """Seed the node with the largest conditional marginal gain; ties go to the lowest id."""

    name = "adaptive_greedy"

    def __init__(self, method: str = "exact", samples: int = 2000, seed: int = 0, cap=None):
        self.method = method
        self.samples = samples
        self.seed = seed
        self.cap = cap
        self._memo: dict = {}
        self._graph = None
        self.randomized = method != "exact"

    def begin(self, graph):
        if graph is not self._graph:
            self._graph = graph
            self._memo = {}

    def next(self, psi, remaining):
        if psi in self._memo:
            return self._memo[psi]
        graph = psi.graph
        best, best_gain = None, GAIN_EPS
        for u in range(graph.node_count):
            if (psi.active_mask >> u) & 1:
                continue
            gain = conditional_marginal_gain(
                graph, psi, u, self.method, self.samples, self.seed, self.cap
            )
            if gain > best_gain + GAIN_EPS:
                best, best_gain = u, gain
        self._memo[psi] = best
        return best


class IndependentRoundingPolicy(Policy):
    """Non-adaptive and randomized: include node i independently with probability x_i."""

    name = "independent_rounding"
    randomized = True

    def __init__(self, x: Sequence[float], rng: np.random.Generator | int = 0):
        self.x = np.asarray(x, dtype=np.float64)
        if np.any(self.x < 0) or np.any(self.x > 1):
            raise ValueError("configuration entries must lie in [0, 1]")
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self._chosen: tuple[int, ...] = ()

    def begin(self, graph):
        if self.x.size != graph.node_count:
            raise ValueError("configuration length does not match the graph")
        draw = self.rng.random(self.x.size) < self.x
        self._chosen = tuple(int(v) for v in np.flatnonzero(draw))

    def next(self, psi, remaining):
        for v in self._chosen:
            if v not in psi.dom:
                return v
        return None


def front_policy(budget: int | None = None) -> FrontPolicy:
    return FrontPolicy(budget)


def adaptive_greedy_policy(method: str = "exact", samples: int = 2000, seed: int = 0) -> AdaptiveGreedyPolicy:
    return AdaptiveGreedyPolicy(method, samples, seed)


def independent_rounding_policy(x, rng=0) -> IndependentRoundingPolicy:
    return IndependentRoundingPolicy(x, rng)


# -- running and evaluating ----------------------------------------------------


@dataclass(frozen=True)
class PolicyRun:
    seeds: tuple[int, ...]
    psi: PartialRealization
    value: int


def run_policy(graph: InfluenceGraph, policy: Policy, k: int, live: LiveEdgeGraph) -> PolicyRun:
    if k < 0:
        raise ValueError("budget must be non-negative")
    psi = PartialRealization.empty(graph)
    if k == 0:
        return PolicyRun((), psi, 0)
    policy.begin(graph)
    while len(psi.dom) < k:
        u = policy.next(psi, k - len(psi.dom))
        if u is None:
            break
        if u in psi.dom:
            raise PolicyError(f"policy {policy.name} re-selected seed {u}")
        psi = observe(graph, live, psi, u)
    return PolicyRun(psi.seeds, psi, psi.value)


def _policy_outcomes(graph, policy, k, method, samples, seed, cap) -> Iterator[tuple[float, PolicyRun]]:
    if method == "exact":
        if policy.randomized:
            raise PolicyError(f"policy {policy.name} is randomized; use method='mc'")
        for live in enumerate_live_edges(graph, cap):
            yield live.weight, run_policy(graph, policy, k, live)
    elif method == "mc":
        if samples < 1:
            raise ValueError("samples must be >= 1")
        for j, count in enumerate(chunk_sizes(samples, DEFAULT_CHUNK)):
            rng = chunk_rng(seed, j)
            for _ in range(count):
                yield 1.0 / samples, run_policy(graph, policy, k, sample_live_edges(graph, rng))
    else:
        raise ValueError(f"unknown method {method!r}")


@dataclass
class PolicyEvaluation:
    spread: SpreadEstimate
    marginals: np.ndarray
    activation: np.ndarray
    max_seeds: int


def evaluate_policy(
    graph: InfluenceGraph,
    policy: Policy,
    k: int,
    method: str = "exact",
    samples: int = 10_000,
    seed: int = 0,
    cap: int | None = None,
) -> PolicyEvaluation:
    """Spread, seeding marginals and per-node activation of a policy in one pass."""
    n = graph.node_count
    marg = np.zeros(n)
    act = np.zeros(n)
    values = []
    weights = []
    max_seeds = 0
    for w, run in _policy_outcomes(graph, policy, k, method, samples, seed, cap):
        for v in run.seeds:
            marg[v] += w
        for v in active_set(run.psi):
            act[v] += w
        values.append(run.value)
        weights.append(w)
        max_seeds = max(max_seeds, len(run.seeds))
    vals = np.asarray(values, dtype=np.float64)
    if method == "exact":
        spread = SpreadEstimate(float(np.dot(np.asarray(weights), vals)))
    else:
        acc = MomentAccumulator()
        acc.add_array(vals)
        spread = SpreadEstimate(acc.mean, acc.stderr, "mc", samples)
    return PolicyEvaluation(spread, marg, act, max_seeds)


def policy_spread(graph, policy, k, method="exact", samples=10_000, seed=0, cap=None) -> SpreadEstimate:
    if k == 0:
        return SpreadEstimate(0.0, 0.0, method)
    return evaluate_policy(graph, policy, k, method, samples, seed, cap).spread


def policy_marginals(graph, policy, k, method="exact", samples=10_000, seed=0, cap=None) -> np.ndarray:
    """Probability that each node is chosen as a seed by the policy."""
    return evaluate_policy(graph, policy, k, method, samples, seed, cap).marginals


def nonadaptive_greedy(
    graph: InfluenceGraph,
    k: int,
    method: str = "exact",
    samples: int = 10_000,
    seed: int = 0,
    cap: int | None = None,
) -> frozenset[int]:
    """Standard greedy on the spread function; ties go to the lowest id.

    In ``mc`` mode every candidate is evaluated with the same random stream
    so that comparisons use common random numbers.
    """
    if k < 0 or k > graph.node_count:
        raise ValueError(f"budget {k} outside [0, {graph.node_count}]")

    def value(s):
        if method == "exact":
            return spread_exact(graph, s, cap).value
        return spread_mc(graph, s, samples, seed).value

    chosen: list[int] = []
    for _ in range(k):
        best, best_val = None, -math.inf
        for u in range(graph.node_count):
            if u in chosen:
                continue
            val = value(chosen + [u])
            if val > best_val + GAIN_EPS:
                best, best_val = u, val
        chosen.append(best)
    return frozenset(chosen)


# -- Poisson clock process ---------------------------------------------------


@dataclass
class PoissonTrajectory:
    firings: list[tuple[float, int]]
    snapshots: dict[float, PartialRealization] = field(default_factory=dict)
    final: PartialRealization | None = None

    @property
    def final_value(self) -> int:
        return self.final.value if self.final is not None else 0


def first_firing_times(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("clock rates must be non-negative")
    draws = rng.exponential(1.0, size=x.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        times = np.where(x > 0, draws / np.where(x > 0, x, 1.0), np.inf)
    return times


def poisson_process_run(
    graph: InfluenceGraph,
    x: Sequence[float],
    live: LiveEdgeGraph,
    rng: np.random.Generator,
    snapshot_times: Sequence[float] = (),
) -> PoissonTrajectory:
    """One run of the per-node clock process on a fixed live-edge graph.

    Clock i rings first at an Exponential(x_i) time; only first rings inside
    [0, 1] matter, since ringing again just re-seeds a seed.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size != graph.node_count:
        raise ValueError("configuration length does not match the graph")
    times = first_firing_times(x, rng)
    order = sorted((float(t), int(i)) for i, t in enumerate(times) if t <= 1.0)
    psi = PartialRealization.empty(graph)
    snaps = sorted(float(s) for s in snapshot_times)
    traj = PoissonTrajectory(order)
    si = 0
    for t, i in order:
        while si < len(snaps) and snaps[si] < t:
            traj.snapshots[snaps[si]] = psi
            si += 1
        psi = observe(graph, live, psi, i)
    for s in snaps[si:]:
        traj.snapshots[s] = psi
    traj.final = psi
    return traj


def poisson_spread_mc(graph, x, samples, seed=0, threads=1) -> SpreadEstimate:
    """Monte Carlo estimate of the expected final value of the clock process."""

    def chunk(rng, count):
        return np.array(
            [poisson_process_run(graph, x, sample_live_edges(graph, rng), rng).final_value for _ in range(count)],
            dtype=np.float64,
        )

    acc = MomentAccumulator()
    for vals in run_chunks(chunk, samples, seed, DEFAULT_CHUNK, threads):
        acc.add_array(vals)
    return SpreadEstimate(acc.mean, acc.stderr, "mc", samples)


def poisson_expected_value_exact(graph: InfluenceGraph, x: Sequence[float], cap=None) -> float:
    """Exact expected final value of the clock process.

    Conditions on the live-edge graph: node u ends active unless every node
    that reaches u failed to ring by time 1, and rings are independent with
    P(no ring of i) = exp(-x_i).
    """
    x = np.asarray(x, dtype=np.float64)
    table = live_table(graph, cap)
    log_silent = -x
    total = np.zeros_like(table.weights)
    n = graph.node_count
    one = np.uint64(1)
    for u in range(n):
        # sum of log P(silent) over nodes v whose reach set contains u
        acc = np.zeros_like(table.weights)
        for v in range(n):
            hits = ((table.reach[v] >> np.uint64(u)) & one).astype(bool)
            acc += np.where(hits, log_silent[v], 0.0)
        total += 1.0 - np.exp(acc)
    return float(np.dot(table.weights, total))


def poisson_rate(graph: InfluenceGraph, psi: PartialRealization, x: Sequence[float], cap=None) -> float:
    """Instantaneous expected gain rate of the clock process at state ``psi``."""
    x = np.asarray(x, dtype=np.float64)
    active = psi.active_mask
    total = 0.0
    for i in range(graph.node_count):
        if (active >> i) & 1 or x[i] == 0:
            continue
        total += x[i] * conditional_marginal_gain(graph, psi, i, "exact", cap=cap)
    return total


# -- random-walk transform -----------------------------------------------------


def random_walk_transform(
    graph: InfluenceGraph, policy: Policy, k: int, rng: np.random.Generator
) -> frozenset[int]:
    """Seed set the policy picks on one randomly drawn realization."""
    if k == 0:
        return frozenset()
    return frozenset(run_policy(graph, policy, k, sample_live_edges(graph, rng)).seeds)
