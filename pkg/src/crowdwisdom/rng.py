"""Seed mixing and inverse-CDF variates from a seeded uniform stream."""

from __future__ import annotations

import numpy as np
from scipy import special

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 output function."""
    z = (x + GOLDEN64) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed of stream ``index`` under a base seed: splitmix64(seed ^ splitmix64(index))."""
    return splitmix64((int(seed) & MASK64) ^ splitmix64(int(index) & MASK64))


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    return (rng.integers(0, 1 << 53, size=size, dtype=np.int64) + 0.5) / float(1 << 53)


def normal(rng: np.random.Generator, size) -> np.ndarray:
    return special.ndtri(uniform(rng, size))


def beta_symmetric(rng: np.random.Generator, shape: float, size) -> np.ndarray:
    return special.betaincinv(shape, shape, uniform(rng, size))
