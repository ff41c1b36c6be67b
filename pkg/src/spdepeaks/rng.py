"""Counter-based Gaussian noise keyed on (seed, time index, stream, path).

Each key selects one Philox block sequence; its first ``n`` outputs are the
standard normals of one grid row. Nothing is sequential, so any path or row
can be regenerated alone, in any order, in any process.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


def _as_u64(v: int) -> int:
    v = int(v)
    if v < 0 or v > _MASK64:
        raise ValueError(f"key component {v} is not a 64-bit unsigned integer")
    return v


def normal_row(seed: int, t_index: int, stream: int, path: int, n: int) -> np.ndarray:
    """``n`` i.i.d. standard normals for one (seed, time, stream, path) key."""
    bitgen = np.random.Philox(
        key=np.array([_as_u64(seed), 0], dtype=np.uint64),
        counter=np.array([0, _as_u64(t_index), _as_u64(stream), _as_u64(path)], dtype=np.uint64),
    )
    raw = bitgen.random_raw(n)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
    return special.ndtri(u)


def normal_rows(seed: int, t_index: int, stream: int, paths, n: int) -> np.ndarray:
    """Stack of ``normal_row`` for several paths, shape ``(len(paths), n)``."""
    return np.stack([normal_row(seed, t_index, stream, p, n) for p in paths])


def noise_increment(seed: int, path: int, t_index: int, x_index: int,
                    dt: float = 1.0, dx: float = 1.0, stream: int = 0) -> float:
    """One white-noise cell increment ``N(0, dt dx)``."""
    if x_index < 0:
        raise ValueError("x_index must be nonnegative")
    return float(np.sqrt(dt * dx) * normal_row(seed, t_index, stream, path, x_index + 1)[x_index])
