"""Counter-based per-path seeds: a path's stream depends only on (base_seed, index)."""
from __future__ import annotations

import numpy as np

from app.errors import ValidationError

SEED_BITS = 64


def path_key(base_seed: int, path_index: int) -> int:
    """128-bit Philox key: path index in the high word, base seed in the low word."""
    if not 0 <= base_seed < 1 << SEED_BITS:
        raise ValidationError(f"base seed must be an unsigned 64-bit integer, got {base_seed!r}")
    if not 0 <= path_index < 1 << SEED_BITS:
        raise ValidationError(f"path index out of range: {path_index!r}")
    return (int(path_index) << SEED_BITS) | int(base_seed)


def tree_sum(values) -> float:
    """Pairwise-tree sum whose rounding depends only on the order of *values*."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def mean_and_stderr(values) -> tuple[float, float]:
    """Sample mean and its standard error, both by tree reduction.

    Identical samples return their common value and an exact zero error.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.size
    if n == 0:
        raise ValidationError("no samples")
    if np.all(v == v[0]):
        return float(v[0]), 0.0
    mean = tree_sum(v) / n
    var = tree_sum((v - mean) ** 2) / (n - 1)
    return mean, float(np.sqrt(var / n))
