"""Seeding helpers.

One counter-based (Philox) generator per run; independent child streams are
spawned rather than reseeded so parallel cells never share state.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(s)) for s in children]
