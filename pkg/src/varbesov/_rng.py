"""Counter-based random substreams.

Every stochastic routine in the package derives its generator from a root
seed plus a named path, e.g. ``substream(seed, "noise")`` or
``substream(seed, "xi", sample, level, gen)``.  Streams for distinct paths
are independent, and the same (seed, path) always yields the same stream,
which is what makes truncation studies and common-random-number estimators
reproducible across runs and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, *path) -> np.random.Generator:
    """Return a Philox generator keyed by ``(seed, *path)``."""
    digest = hashlib.sha256(repr((int(seed),) + tuple(path)).encode()).digest()
    key = np.frombuffer(digest[:32], dtype=np.uint64)[:4]
    return np.random.Generator(np.random.Philox(key=key[:2], counter=key[2:].tolist() + [0, 0]))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, a seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return substream(int(rng), "direct")
