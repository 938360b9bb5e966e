"""Seeded, worker-count-independent random streams.

Paths are grouped into fixed blocks of ``BLOCK`` consecutive indices.
Block ``b`` of logical stream ``stream`` draws from a Philox generator
keyed by ``SeedSequence(seed, spawn_key=(stream, b))``. The decomposition
never depends on how many workers run, and block results are reduced in
block order, so output is bit-identical for any ``workers``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK = 4096

# logical stream ids
CLOCK = 1       # subordinator increments
BASE = 2        # base diffusion increments
CLOCK_ALT = 3   # second, independent subordinator ensemble
LIMIT = 4       # limit-process base paths in distributional checks
EXTRA = 5       # auxiliary draws (killing thresholds and the like)

T = TypeVar("T")


def generator(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def blocks(n_paths: int, block: int = BLOCK) -> list[tuple[int, int]]:
    return [(lo, min(lo + block, n_paths)) for lo in range(0, n_paths, block)]


def map_blocks(fn: Callable[[int, int, int], T], n_paths: int, workers: int = 1) -> list[T]:
    """Run ``fn(block_index, lo, hi)`` over all blocks; results in block order."""
    spans = blocks(n_paths)
    if workers <= 1 or len(spans) == 1:
        return [fn(b, lo, hi) for b, (lo, hi) in enumerate(spans)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, b, lo, hi) for b, (lo, hi) in enumerate(spans)]
        return [f.result() for f in futures]


def mean_and_se(chunks: list[np.ndarray]) -> tuple[float, float, int]:
    """Ordered reduction of per-block samples to (mean, standard error, n).

    Blocks are merged with the pairwise (count, mean, M2) update, which
    is associative up to rounding and applied in block order.
    """
    n, mean, m2 = 0, 0.0, 0.0
    for c in chunks:
        nb = len(c)
        if nb == 0:
            continue
        mb = float(np.mean(c))
        m2b = float(np.sum((c - mb) ** 2))
        delta = mb - mean
        tot = n + nb
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    var = m2 / max(n - 1, 1)
    return mean, float(np.sqrt(var / n)) if n else 0.0, n
