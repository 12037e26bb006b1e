"""Deterministic random streams.

Every random quantity in a run is drawn from a stream identified by the run
seed and a tuple of non-negative integers (the *key*).  The splitting rule is

    Generator(PCG64(SeedSequence(run_seed, spawn_key=key)))

so a stream depends only on ``(run_seed, key)``; it does not depend on which
process draws it or in which order streams are created.  This is what makes
sweeps reproducible bit-for-bit regardless of worker count.
"""

from __future__ import annotations

import numpy as np

# Purpose tags used as the first element of stream keys.
FADE = 1
INFO_BITS = 2
PILOT_NOISE = 3
DATA_NOISE = 4
INTERLEAVER = 5
OUTAGE_OUTER = 6
OUTAGE_INNER = 7
EXPORT = 8

_MASK64 = (1 << 64) - 1


def stream(run_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(run_seed, key)``."""
    if run_seed < 0:
        raise ValueError("run_seed must be non-negative")
    ss = np.random.SeedSequence(int(run_seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric CN(0, var) samples."""
    scale = np.sqrt(var / 2.0)
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return scale * (z[..., 0] + 1j * z[..., 1])
