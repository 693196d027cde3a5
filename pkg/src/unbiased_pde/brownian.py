"""Brownian increments on dyadic grids of [0, T].

A level-``n`` path holds ``2**n`` increments of a ``dim``-dimensional Brownian
motion over steps of length ``T * 2**-n``.  Coarser levels are produced by
summing consecutive pairs, which is exact, and the antithetic path swaps the
two increments inside every pair, leaving every pairwise sum unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoarsenAtLevelZero, PathError, SwapAtLevelZero


@dataclass(frozen=True, eq=False)
class DyadicPath:
    level: int
    increments: np.ndarray  # shape (2**level, dim)
    horizon: float = 1.0

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, None]
        if self.level < 0 or inc.ndim != 2 or inc.shape[0] != 2 ** self.level:
            raise PathError(
                f"level {self.level} needs {2 ** max(self.level, 0)} increments, "
                f"got array of shape {inc.shape}")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def dim(self) -> int:
        return self.increments.shape[1]

    @property
    def dt(self) -> float:
        return self.horizon * 2.0 ** -self.level

    def __eq__(self, other):
        if not isinstance(other, DyadicPath):
            return NotImplemented
        return (self.level == other.level and self.horizon == other.horizon
                and np.array_equal(self.increments, other.increments))

    __hash__ = None


def sample_path(level: int, dim: int, rng: np.random.Generator,
                horizon: float = 1.0) -> DyadicPath:
    """Draw ``2**level`` i.i.d. N(0, dt I) increments from ``rng``."""
    if level < 0 or dim < 1:
        raise PathError(f"need level >= 0 and dim >= 1, got ({level}, {dim})")
    scale = np.sqrt(horizon * 2.0 ** -level)
    inc = rng.standard_normal((2 ** level, dim)) * scale
    return DyadicPath(level, inc, horizon)


def coarsen_increments(inc: np.ndarray) -> np.ndarray:
    return inc[0::2] + inc[1::2]


def coarsen(path: DyadicPath, times: int = 1) -> DyadicPath:
    """Sum consecutive pairs ``times`` times (default once)."""
    if times < 0 or times > path.level:
        if path.level == 0:
            raise CoarsenAtLevelZero("cannot coarsen a level-0 path")
        raise PathError(f"cannot coarsen level {path.level} path {times} times")
    inc = path.increments
    for _ in range(times):
        inc = coarsen_increments(inc)
    return DyadicPath(path.level - times, inc, path.horizon)


def antithetic_swap(path: DyadicPath) -> DyadicPath:
    """Exchange increments ``2m`` and ``2m+1`` for every pair ``m``."""
    if path.level == 0:
        raise SwapAtLevelZero("a level-0 path has no increment pairs")
    inc = path.increments
    swapped = np.empty_like(inc)
    swapped[0::2] = inc[1::2]
    swapped[1::2] = inc[0::2]
    return DyadicPath(path.level, swapped, path.horizon)


def levy_proxy(increment, dt: float) -> np.ndarray:
    """Tractable stand-in for the iterated integrals over one step.

    Off-diagonal entries are ``dB_i dB_j / 2``; diagonal entries carry the Ito
    correction, ``(dB_i**2 - dt) / 2``.
    """
    if not dt > 0:
        raise PathError(f"dt must be positive, got {dt}")
    db = np.atleast_1d(np.asarray(increment, dtype=float))
    out = 0.5 * np.outer(db, db)
    out[np.diag_indices_from(out)] -= 0.5 * dt
    return out
