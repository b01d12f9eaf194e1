"""Replica-parallel map with output independent of the worker count.

Each replica derives its randomness from its own index, so splitting the
index range into contiguous chunks and concatenating chunk results in order
reproduces the serial result exactly.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np


def _run_chunk(task):
    fn, lo, hi = task
    return [fn(r) for r in range(lo, hi)]


def chunk_bounds(count: int, chunks: int) -> list[tuple[int, int]]:
    chunks = max(1, min(chunks, count))
    edges = np.linspace(0, count, chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def map_replicas(fn: Callable[[int], object], count: int, workers: int = 1) -> list:
    """``[fn(0), ..., fn(count - 1)]``, optionally across processes.

    ``fn`` must be picklable (a module-level function or a
    ``functools.partial`` of one) when ``workers > 1``.
    """
    if workers <= 1 or count < 2:
        return [fn(r) for r in range(count)]
    tasks = [(fn, lo, hi) for lo, hi in chunk_bounds(count, 4 * workers)]
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_run_chunk, tasks):
            out.extend(part)
    return out


def map_array(fn: Callable[[int], object], count: int, workers: int = 1) -> np.ndarray:
    return np.asarray(map_replicas(fn, count, workers), dtype=float)
