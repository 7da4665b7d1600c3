"""Deterministic, seedable Gaussian draws.

Draws are produced by inverse-CDF sampling: uniforms from a PCG64 stream,
mapped through the rational-approximation inverse normal CDF (the Cephes
``ndtri`` routine exposed by scipy.special). A fixed seed therefore yields
identical bytes on any platform with IEEE doubles.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_LOW = 5e-324  # smallest subnormal; keeps ndtri finite if a uniform is 0.0


def seeded_standard_normals(seed, count):
    """`count` independent N(0, 1) draws from the PCG64 stream `seed`."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(count)
    np.clip(u, _LOW, None, out=u)
    return ndtri(u)


def seeded_rademacher(seed, shape):
    """+-1 entries from the PCG64 stream `seed`, as float64."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
