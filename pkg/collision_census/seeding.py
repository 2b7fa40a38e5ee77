"""Seeded random streams for reproducible parallel trials."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from collision_census.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")


def task_rng(master_seed: int, task_index: int) -> np.random.Generator:
    """Generator for one task.

    Derivation: ``default_rng([master_seed, task_index])``, i.e. a
    SeedSequence over the entropy pair. Streams depend only on the pair,
    never on thread count or scheduling order.
    """
    return np.random.default_rng([int(master_seed), int(task_index)])


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        return settings.threads
    return max(1, int(threads))


def map_tasks(
    fn: Callable[[int], T],
    count: int,
    threads: Optional[int] = None,
) -> List[T]:
    """Run ``fn(i)`` for i in range(count); results come back in index order."""
    workers = min(resolve_threads(threads), max(1, count))
    if workers == 1 or count <= 1:
        return [fn(i) for i in range(count)]

    logger.debug(f"🔄 Running {count} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


# Trials per random stream. Fixed so a seed maps to the same draws on every host.
STREAM_BLOCK = 65536


def chunk_sizes(total: int, chunk: int = STREAM_BLOCK) -> Sequence[int]:
    """Split ``total`` trials into chunks of at most ``chunk``; chunk i draws from ``task_rng(seed, i)``."""
    if chunk < 1:
        raise ValueError(f"chunk must be positive, got {chunk}")
    if total <= 0:
        return []
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
