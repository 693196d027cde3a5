"""Random drift fields given as Gaussian series over a deterministic basis.

A field is

    mu(x) = sum_i  (lambda_i / i**q) * V_i * psi_i(x),   V_i ~ N(m_i, Sigma_i)

with ``V_i`` independent ``d``-vectors.  A :class:`FieldRealization` samples
the ``V_i`` lazily, in fixed blocks drawn from block-keyed substreams, so any
prefix ``V_1..V_M`` is the same no matter how the list grew.  The truncation
used at discretization level ``n`` keeps ``floor(2**(n*gamma))`` terms.
"""

from __future__ import annotations

import math
import threading
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BasisEvaluationFailure, ParameterError
from .streams import CopyStreams

BLOCK = 32

Basis = Callable[[np.ndarray, int], np.ndarray]


def _one(i: int) -> float:
    return 1.0


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """Law of the random drift.

    ``basis(x, m)`` returns the values of the first ``m`` basis functions at
    ``x``.  ``lam(i)``, ``cov(i)`` and ``mean(i)`` are indexed from 1.  The
    sup-norm bounds on the basis and its derivatives are documented
    requirements and are not checked.  ``max_terms`` caps the truncation
    size; ``compiled_basis`` is an optional ``(jitted_fn, params)`` pair with
    the same values as ``basis`` used by the compiled solver.
    """

    d: int
    q: float
    basis: Basis
    lam: Callable[[int], float] = _one
    cov: Callable[[int], np.ndarray] | None = None
    mean: Callable[[int], np.ndarray] | None = None
    lam_bound: float = 1.0
    max_terms: int | None = None
    compiled_basis: tuple | None = None
    name: str = "custom"
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"field dimension must be >= 1, got {self.d}")
        if not self.q > 0:
            raise ParameterError(f"decay exponent must be positive, got {self.q}")
        if self.max_terms is not None and self.max_terms < 1:
            raise ParameterError(f"max_terms must be >= 1, got {self.max_terms}")
        if not self.q > 4 and not any("q" in w for w in self.warnings):
            object.__setattr__(self, "warnings",
                               self.warnings + (f"q = {self.q:g} violates q > 4",))
        object.__setattr__(self, "_law_cache", {})

    def term_law(self, i: int) -> tuple[np.ndarray, np.ndarray, float]:
        """``(mean_i, Sigma_i**0.5, lambda_i / i**q)``."""
        means, roots, scales = self.block_law(i - 1 - (i - 1) % BLOCK)
        r = (i - 1) % BLOCK
        return means[r], roots[r], scales[r]

    def block_law(self, start: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stacked laws of terms ``start + 1 .. start + BLOCK`` (cached)."""
        cache = self._law_cache
        if start not in cache:
            idx = range(start + 1, start + BLOCK + 1)
            cache[start] = (np.array([self.mean_vector(i) for i in idx]),
                            np.array([self.cov_root(i) for i in idx]),
                            np.array([self.scale(i) for i in idx]))
        return cache[start]

    def scale(self, i: int) -> float:
        lam = float(self.lam(i))
        if abs(lam) > self.lam_bound:
            raise ParameterError(f"|lambda_{i}| = {abs(lam)} exceeds bound {self.lam_bound}")
        return lam / i ** self.q

    def cov_root(self, i: int) -> np.ndarray:
        """Symmetric square root of ``Sigma_i`` (identity when no rule is given)."""
        if self.cov is None:
            return np.eye(self.d)
        cov = np.atleast_2d(np.asarray(self.cov(i), dtype=float))
        if cov.shape != (self.d, self.d) or not np.allclose(cov, cov.T):
            raise ParameterError(f"Sigma_{i} must be a symmetric {self.d}x{self.d} matrix")
        w, v = np.linalg.eigh(cov)
        if w.min() < -1e-12 * max(1.0, abs(w).max()):
            raise ParameterError(f"Sigma_{i} is not positive semidefinite")
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T

    def mean_vector(self, i: int) -> np.ndarray:
        if self.mean is None:
            return np.zeros(self.d)
        return np.broadcast_to(np.asarray(self.mean(i), dtype=float), (self.d,)).copy()


@lru_cache(maxsize=4096)
def truncation_size(level: int, gamma: float, max_terms: int | None = None) -> int:
    """``floor(2**(level * gamma))``, optionally capped at ``max_terms``.

    Exponents within 1e-9 of an integer are snapped to it, so that
    ``gamma = 1/3`` at level 9 keeps exactly 8 terms despite 1/3 being
    inexact in binary.
    """
    if level < 0 or not gamma > 0:
        raise ParameterError(f"need level >= 0 and gamma > 0, got ({level}, {gamma})")
    e = level * gamma
    if abs(e - round(e)) < 1e-9:
        m = 2 ** int(round(e))
    else:
        m = math.floor(2.0 ** e)
    m = max(m, 1)
    return m if max_terms is None else min(m, max_terms)


class FieldRealization:
    """One draw of the field; grows its coefficient list on demand.

    Accepts either a :class:`CopyStreams` (coefficients come from block-keyed
    substreams) or a plain generator (coefficients drawn sequentially).
    """

    def __init__(self, spec: FieldSpec, rng: CopyStreams | np.random.Generator):
        self.spec = spec
        self._rng = rng
        self._values = np.empty((0, spec.d))
        self._scaled = np.empty((0, spec.d))
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self._values.shape[0]

    def _normals(self, start: int, count: int) -> np.ndarray:
        if isinstance(self._rng, CopyStreams):
            return self._rng.field(start // BLOCK).standard_normal((count, self.spec.d))
        return self._rng.standard_normal((count, self.spec.d))

    def _extend(self, m: int) -> None:
        with self._lock:
            have = len(self)
            if m <= have:
                return
            target = -(-m // BLOCK) * BLOCK
            spec = self.spec
            new = np.empty((target - have, spec.d))
            scaled = np.empty_like(new)
            for start in range(have, target, BLOCK):
                z = self._normals(start, BLOCK)
                means, roots, scales = spec.block_law(start)
                v = means + np.matmul(roots, z[:, :, None])[:, :, 0]
                new[start - have:start - have + BLOCK] = v
                scaled[start - have:start - have + BLOCK] = scales[:, None] * v
            values = np.concatenate([self._values, new])
            scaled = np.concatenate([self._scaled, scaled])
            values.setflags(write=False)
            scaled.setflags(write=False)
            self._values, self._scaled = values, scaled

    def coefficients(self, m: int) -> np.ndarray:
        """The sampled ``V_1..V_m`` as an ``(m, d)`` read-only array."""
        if m < 0:
            raise ParameterError(f"coefficient count must be >= 0, got {m}")
        self._extend(m)
        return self._values[:m]

    def scaled(self, m: int) -> np.ndarray:
        """``(lambda_i / i**q) V_i`` for ``i = 1..m``."""
        self._extend(m)
        return self._scaled[:m]


def realize(spec: FieldSpec, rng: CopyStreams | np.random.Generator) -> FieldRealization:
    return FieldRealization(spec, rng)


def eval_basis(spec: FieldSpec, x, m: int) -> np.ndarray:
    try:
        psi = np.asarray(spec.basis(np.asarray(x, dtype=float), m), dtype=float)
    except Exception as exc:
        raise BasisEvaluationFailure(f"basis evaluation failed at x={x}: {exc}") from exc
    if psi.shape != (m,):
        raise BasisEvaluationFailure(f"basis returned shape {psi.shape}, expected ({m},)")
    return psi


def drift_eval(realization: FieldRealization, level: int, gamma: float, x) -> np.ndarray:
    """Truncated drift ``mu^(level)(x)``."""
    spec = realization.spec
    m = truncation_size(level, gamma, spec.max_terms)
    return eval_basis(spec, x, m) @ realization.scaled(m)
