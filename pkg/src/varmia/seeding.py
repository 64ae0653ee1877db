"""Stateless seed derivation so that parallel schedules never change results."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _mix64(z: int) -> int:
    # splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def derive_seed(experiment_seed: int, sample_id: int, repeat_index: int = 0) -> int:
    """Mix three integers into one well-spread u64 seed."""
    h = _mix64((int(experiment_seed) & _MASK) + 0x9E3779B97F4A7C15 & _MASK)
    h = _mix64(h ^ (int(sample_id) & _MASK))
    h = _mix64(h ^ ((int(repeat_index) & 0xFFFFFFFF) | 0xA5A5 << 32))
    return h


def rng_for(*keys: int) -> np.random.Generator:
    """A PCG64 generator keyed by up to three integers."""
    return np.random.default_rng(derive_seed(*keys))
