"""Keyed random streams and an order-preserving parallel map.

Every random draw in the package comes from ``stream(seed, *keys)``: a PCG64
generator seeded by ``SeedSequence([seed, *keys])``.  Normals are produced by
numpy's ziggurat sampler (``Generator.standard_normal``), whose output for a
given bit generator state has been stable since numpy 1.17.  Since a trial's
stream depends only on its keys, results do not depend on how trials are
distributed over workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Monte Carlo averages draw samples in fixed-size blocks, one stream per block.
BLOCK = 4096


def stream(seed, *keys):
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *map(int, keys)])))


def pmap(fn, items, threads=1):
    """``list(map(fn, items))`` on ``threads`` workers, results in input order."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as ex:
        return list(ex.map(fn, items))


def gaussian_blocks(seed, samples, dim, tag=0):
    """Yield standard Gaussian blocks of shape (<=BLOCK, dim) totalling ``samples`` rows."""
    done = 0
    b = 0
    while done < samples:
        k = min(BLOCK, samples - done)
        yield stream(seed, tag, b).standard_normal((k, dim))
        done += k
        b += 1
