"""Enumeration caps and seeded, chunked Monte Carlo execution.

Every Monte Carlo routine in the package splits its samples into chunks of a
size that does not depend on the worker count. Chunk ``j`` draws from its own
generator seeded by ``(master_seed, j)``, and partial results are combined in
chunk order, so output is bit-identical for any number of threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_EDGE_CAP = 20
DEFAULT_CHUNK = 2048
EDGE_CAP_ENV = "ADGAP_EDGE_CAP"


class CapExceeded(RuntimeError):
    """An exact computation would exceed its configured enumeration cap."""


def edge_cap(cap: int | None = None) -> int:
    if cap is not None:
        return int(cap)
    raw = os.environ.get(EDGE_CAP_ENV)
    if raw:
        value = int(raw)
        if value < 1:
            raise ValueError(f"{EDGE_CAP_ENV} must be >= 1, got {raw!r}")
        return value
    return DEFAULT_EDGE_CAP


def check_cap(count: int, cap: int | None, what: str = "edges") -> None:
    limit = edge_cap(cap)
    if count > limit:
        raise CapExceeded(f"{count} {what} exceeds enumeration cap {limit}")


def chunk_rng(master_seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(chunk),))
    return np.random.default_rng(ss)


def chunk_sizes(total: int, chunk_size: int) -> list[int]:
    if total < 0:
        raise ValueError("sample count must be non-negative")
    full, rest = divmod(total, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunks(
    fn: Callable[[np.random.Generator, int], T],
    total: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> list[T]:
    """Evaluate ``fn(rng_j, n_j)`` for every chunk and return results in chunk order."""
    sizes = chunk_sizes(total, chunk_size)
    jobs = [(j, n) for j, n in enumerate(sizes)]

    def work(job: tuple[int, int]) -> T:
        j, n = job
        return fn(chunk_rng(seed, j), n)

    if threads <= 1 or len(jobs) <= 1:
        return [work(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, jobs))


class MomentAccumulator:
    """Sample mean and variance merged chunk by chunk (Chan et al. update)."""

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add_array(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=np.float64).ravel()
        n_b = v.size
        if n_b == 0:
            return
        mean_b = float(v.mean())
        m2_b = float(np.sum((v - mean_b) ** 2))
        n_a = self.count
        n = n_a + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / n
        self.m2 += m2_b + delta * delta * n_a * n_b / n
        self.count = n

    @property
    def stderr(self) -> float:
        n = self.count
        if n < 2:
            return 0.0
        return float(np.sqrt(self.m2 / (n - 1) / n))
