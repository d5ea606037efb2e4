"""Seeded, thread-count-independent random number plumbing.

All stochastic entry points take a 64-bit seed.  Work is cut into
fixed-size blocks of sample indices; the generator for a block is derived
from (seed, *namespace, block_index) via ``numpy.random.SeedSequence``
spawn keys, so a result never depends on how blocks were scheduled across
threads.  Standard normals come from numpy's PCG64 + ziggurat sampler,
which is deterministic for a fixed numpy version.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = ["child_rng", "derive_seed", "blocks", "map_blocks", "SAMPLE_BLOCK"]

# Samples per block.  Fixed constant: changing it changes the stream, and it
# must not depend on thread count.  Sized so per-block buffers stay in the
# few-MB range where repeated allocations are cheap.
SAMPLE_BLOCK = 16384


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (seed, key...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed = hash(seed, key...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def blocks(n: int, block: int = SAMPLE_BLOCK) -> Iterator[tuple[int, int, int]]:
    """Yield (block_index, start, stop) covering range(n)."""
    i = 0
    for start in range(0, n, block):
        yield i, start, min(start + block, n)
        i += 1


def map_blocks(
    fn: Callable[[int, int, int], object],
    n: int,
    threads: int = 1,
    block: int = SAMPLE_BLOCK,
) -> list:
    """Run ``fn(block_index, start, stop)`` over all blocks of range(n).

    Results are returned in block order regardless of ``threads``, so any
    reduction over them is deterministic.
    """
    work = list(blocks(n, block))
    if threads is None or threads <= 1 or len(work) <= 1:
        return [fn(*w) for w in work]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        futures = [pool.submit(fn, *w) for w in work]
        return [f.result() for f in futures]
