"""Small input-validation and seeding helpers shared across the package."""
from __future__ import annotations

from typing import Iterable

import numpy as np


class ConfigError(ValueError):
    """Bad configuration value. CLI maps this to exit code 2."""


class DataError(ValueError):
    """Bad input data. CLI maps this to exit code 3."""


def require(condition: bool, message: str, exc: type = ConfigError) -> None:
    if not condition:
        raise exc(message)


def zigzag(n: int) -> int:
    """Map a signed int to an unsigned one, injectively (for seed material)."""
    return 2 * n if n >= 0 else -2 * n - 1


def rng_for(*parts: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of (possibly negative) ints."""
    return np.random.default_rng([zigzag(int(p)) for p in parts])


def check_scalar_finite(value, name: str = "value") -> float:
    v = float(value)
    require(np.isfinite(v), f"{name} must be finite, got {value!r}", DataError)
    return v


def check_active_indices(width: int, active: Iterable[int]) -> np.ndarray:
    """Validate and canonicalize a set of active bit indices.

    Returns a sorted, duplicate-free int32 array with every index in
    [0, width).
    """
    arr = np.asarray(list(active) if not isinstance(active, np.ndarray) else active)
    if arr.size == 0:
        return np.empty(0, dtype=np.int32)
    require(np.issubdtype(arr.dtype, np.integer) or np.all(arr == arr.astype(np.int64)),
            "active indices must be integers", DataError)
    arr = arr.astype(np.int64)
    require(arr.min() >= 0 and arr.max() < width,
            f"active indices must lie in [0, {width})", DataError)
    out = np.unique(arr)
    require(out.size == arr.size, "active indices must not repeat", DataError)
    return out.astype(np.int32)


def check_dense_input(x, width: int) -> np.ndarray:
    """Coerce a dense binary vector to bool of the expected width."""
    arr = np.asarray(x)
    require(arr.ndim == 1 and arr.shape[0] == width,
            f"expected a length-{width} vector, got shape {arr.shape}", DataError)
    return arr.astype(bool)
