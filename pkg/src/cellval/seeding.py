"""Seed handling.

Every random draw in the package goes through :func:`rng`, which builds a
``numpy.random.Generator`` backed by PCG64 and seeded through
``numpy.random.SeedSequence([seed, *stream])``.  Seeds are 64-bit unsigned
integers (other integers are reduced modulo 2**64); ``stream`` lets one seed
feed several independent draws without sharing state.  There is no global
generator anywhere.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1


def as_seed(seed: int) -> int:
    return int(seed) & _MASK


def rng(seed: int, *stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence([as_seed(seed), *(as_seed(s) for s in stream)])
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *stream: int) -> int:
    """Mix ``seed`` with ``stream`` into a new 64-bit seed."""
    ss = np.random.SeedSequence([as_seed(seed), *(as_seed(s) for s in stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))
