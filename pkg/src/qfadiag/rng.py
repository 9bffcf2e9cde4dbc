"""
Splittable seeded random streams.

Every random draw in the package comes from ``substream(seed, *keys)``; the
stream for a given key path does not depend on which other streams were
drawn or in what order.
"""

from __future__ import annotations

import os

import numpy as np

from qfadiag.errors import InputError

__all__ = ["SEED_ENV", "Purpose", "resolve_seed", "substream"]

SEED_ENV = "QFA_SEED"


class Purpose:
    """First spawn-key component, separating independent uses of one seed."""

    SIMULATE = 0
    TARGET = 1
    NULL = 2
    OBSERVED = 3
    FIT = 4


def _check_seed(seed) -> int:
    try:
        value = int(seed)
    except (TypeError, ValueError):
        raise InputError(f"seed must be a nonnegative integer, got {seed!r}") from None
    if value < 0 or value != seed and not isinstance(seed, str):
        raise InputError(f"seed must be a nonnegative integer, got {seed!r}")
    return value


def resolve_seed(seed=None) -> tuple[int, str]:
    """
    Returns ``(seed, source)`` with source one of "argument", "environment"
    or "generated".  A generated seed is drawn from OS entropy and must be
    echoed by the caller so the run can be reproduced.
    """
    if seed is not None:
        return _check_seed(seed), "argument"
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        return _check_seed(env.strip()), "environment"
    return int(np.random.SeedSequence().entropy % (2 ** 63)), "generated"


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 generator for the key path ``keys`` under ``seed``."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
