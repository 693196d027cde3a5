"""Mergeable streaming moments, CLT intervals and log2-slope fits.

:class:`RunningMoments` exposes the usual ``(count, mean, m2)`` triple but
stores the running sums ``sum x`` and ``sum x**2`` as exact floating-point
expansions (Shewchuk's algorithm, as in ``math.fsum``).  Merging is then
exact addition, so any merge order gives bit-identical results.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

import numpy as np
from scipy import stats as sps

Z95 = 1.96


def _grow(partials: list[float], x: float) -> None:
    # exact: afterwards sum(partials) == old sum + x with no rounding
    i = 0
    for y in partials:
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo:
            partials[i] = lo
            i += 1
        x = hi
    partials[i:] = [x]


class RunningMoments:
    """Count, mean and centered second moment of a stream of floats."""

    __slots__ = ("count", "_s", "_q")

    def __init__(self):
        self.count = 0
        self._s: list[float] = []
        self._q: list[float] = []

    def update(self, x: float) -> None:
        x = float(x)
        self.count += 1
        _grow(self._s, x)
        _grow(self._q, x * x)

    def update_batch(self, xs: Iterable[float]) -> None:
        for x in np.asarray(xs, dtype=float).ravel().tolist():
            self.update(x)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        out = RunningMoments()
        out.count = self.count + other.count
        out._s, out._q = list(self._s), list(self._q)
        for x in other._s:
            _grow(out._s, x)
        for x in other._q:
            _grow(out._q, x)
        return out

    @property
    def total(self) -> float:
        return math.fsum(self._s)

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else math.nan

    @property
    def m2(self) -> float:
        """``sum (x - mean)**2``, clipped at zero."""
        if not self.count:
            return math.nan
        s = self.total
        return max(math.fsum(self._q + [-s * (s / self.count)]), 0.0)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan

    def ci95(self) -> tuple[float, float]:
        return ci95(self.mean, self.std_error)

    def to_dict(self) -> dict:
        return {"count": self.count, "sum_partials": list(self._s), "sq_partials": list(self._q)}

    @classmethod
    def from_dict(cls, data: dict) -> "RunningMoments":
        out = cls()
        out.count = int(data["count"])
        out._s = [float(v) for v in data["sum_partials"]]
        out._q = [float(v) for v in data["sq_partials"]]
        return out

    def __repr__(self):
        return f"RunningMoments(count={self.count}, mean={self.mean!r}, m2={self.m2!r})"


def moments_of(xs) -> RunningMoments:
    acc = RunningMoments()
    acc.update_batch(xs)
    return acc


def ci95(estimate: float, std_error: float) -> tuple[float, float]:
    return (estimate - Z95 * std_error, estimate + Z95 * std_error)


def intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


class SlopeFit(NamedTuple):
    slope: float
    slope_se: float
    intercept: float


def fit_log2_slope(levels, values) -> SlopeFit:
    """Least-squares line through ``(level, log2 value)``; values must be positive."""
    x = np.asarray(levels, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size < 3 or x.shape != y.shape:
        raise ValueError("need at least three (level, value) pairs of matching length")
    if not np.all(y > 0):
        raise ValueError("log2 slope needs strictly positive values")
    res = sps.linregress(x, np.log2(y))
    return SlopeFit(float(res.slope), float(res.stderr), float(res.intercept))
