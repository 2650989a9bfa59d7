"""Seed handling shared by every stochastic routine."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

_SEED_LIMIT = 2**64


def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise ConfigurationError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise ConfigurationError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(check_seed(seed))))


def derive_seed(*keys: int) -> int:
    """Mix integer keys into a single 64-bit seed.

    The mapping is a pure function of ``keys``, so trials seeded this way give
    the same stream regardless of the order or process they run in.
    """
    ss = np.random.SeedSequence([check_seed(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
