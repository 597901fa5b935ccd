"""Seeding policy.

Every stochastic routine in this package takes an integer seed and derives
its generator through :class:`numpy.random.SeedSequence` (PCG64 streams).
Child streams are addressed by ``spawn_key`` so that replicate k always gets
the same stream no matter in which order (or on how many workers) the
replicates run.
"""

from __future__ import annotations

import numpy as np


def rng_from_seed(seed: int) -> np.random.Generator:
    """Root generator for a run."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for a sub-task, addressed by an integer tuple.

    ``child_rng(seed, i, j)`` is independent of ``child_rng(seed, i', j')``
    whenever the keys differ, and does not depend on evaluation order.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """n independent child sequences of ``seed`` (for worker pools)."""
    return np.random.SeedSequence(seed).spawn(n)
