"""Antithetic Milstein-type discretization of dX = mu(X) dt + sigma(X) dB.

One step of the level-``n`` recursion is

    X_i <- X_i + mu^(n)_i(X) dt + sum_j sigma_ij(X) dB_j
               + sum_{j,l,m} d_l sigma_ij(X) sigma_lm(X) A_mj

where ``A`` is the Levy-area proxy of :func:`brownian.levy_proxy`.  The
coupled difference used by the level-randomized estimators is

    Delta_n = (f(X^fine_{n+1}) + f(X^anti_{n+1})) / 2 - f(X^coarse_n)

with the antithetic path swapping increment pairs of the fine path and the
coarse path summing them.

Costs are counted in units: one step at level ``n`` costs ``1 + M_n`` where
``M_n`` is the drift truncation size, so a full level-``n`` solve costs
``2**n * (1 + M_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .brownian import DyadicPath, antithetic_swap, coarsen, levy_proxy, sample_path
from .errors import DimensionMismatch
from .field import FieldRealization, FieldSpec, eval_basis, truncation_size
from .params import ParamSet


@dataclass(frozen=True)
class CompiledFunctions:
    """Jitted ``(fn, params)`` counterparts of a problem's sigma and payoff."""

    sigma: object
    sigma_jac: object
    sigma_params: np.ndarray
    payoff: object
    payoff_params: np.ndarray


@dataclass(frozen=True, eq=False)
class Problem:
    d: int
    dprime: int
    sigma: Callable[[np.ndarray], np.ndarray]
    sigma_jac: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], float]
    G: Callable[[np.ndarray], float]
    points: np.ndarray
    field: FieldSpec
    horizon: float = 1.0
    G_grad: Callable | None = None
    params: ParamSet | None = None
    compiled: CompiledFunctions | None = None
    name: str = "custom"
    config: dict | None = None
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != self.d:
            raise DimensionMismatch(f"points have dimension {pts.shape[1]}, expected {self.d}")
        if self.field.d != self.d:
            raise DimensionMismatch(f"field dimension {self.field.d} != state dimension {self.d}")
        if not self.horizon > 0:
            raise DimensionMismatch(f"terminal time must be positive, got {self.horizon}")
        object.__setattr__(self, "points", pts)
        warns = list(self.warnings)
        if self.horizon != 1.0:
            warns.append("terminal time != 1 is experimental")
        for w in self.field.warnings:
            if w not in warns:
                warns.append(w)
        object.__setattr__(self, "warnings", tuple(warns))

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def is_compiled(self) -> bool:
        return self.compiled is not None and self.field.compiled_basis is not None


class SchemeResult(NamedTuple):
    terminal: np.ndarray
    cost_units: int


class DeltaSample(NamedTuple):
    delta: float
    cost_units: int
    fine_path: DyadicPath


def level_cost(level: int, gamma: float, max_terms: int | None = None) -> int:
    return 2 ** level * (1 + truncation_size(level, gamma, max_terms))


def _reference_solve(x, inc, dt, coef, problem: Problem) -> np.ndarray:
    x = np.array(x, dtype=float)
    m = coef.shape[0]
    for db in inc:
        s = np.asarray(problem.sigma(x), dtype=float)
        jac = np.asarray(problem.sigma_jac(x), dtype=float)
        drift = eval_basis(problem.field, x, m) @ coef
        area = levy_proxy(db, dt)
        x = x + drift * dt + s @ db + np.einsum("ijl,lm,mj->i", jac, s, area)
    return x


def _check_inputs(x, path: DyadicPath, level: int, problem: Problem) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != problem.d:
        raise DimensionMismatch(f"start point has dimension {x.shape[0]}, expected {problem.d}")
    if path.level != level:
        raise DimensionMismatch(f"path level {path.level} != scheme level {level}")
    if path.dim != problem.dprime:
        raise DimensionMismatch(f"path dimension {path.dim} != noise dimension {problem.dprime}")
    return x


def num_sol(x, level: int, path: DyadicPath, realization: FieldRealization,
            params: ParamSet, problem: Problem) -> SchemeResult:
    """Terminal state of the level-``level`` recursion driven by ``path``."""
    x = _check_inputs(x, path, level, problem)
    m = truncation_size(level, params.gamma, problem.field.max_terms)
    terminal = _reference_solve(x, path.increments, path.dt, realization.scaled(m), problem)
    return SchemeResult(terminal, level_cost(level, params.gamma, problem.field.max_terms))


def delta_on_path(x, level: int, fine: DyadicPath, realization: FieldRealization,
                  params: ParamSet, problem: Problem) -> DeltaSample:
    """Coupled level difference using a given level-``level + 1`` path."""
    xf = num_sol(x, level + 1, fine, realization, params, problem)
    xa = num_sol(x, level + 1, antithetic_swap(fine), realization, params, problem)
    xc = num_sol(x, level, coarsen(fine), realization, params, problem)
    delta = 0.5 * (problem.f(xf.terminal) + problem.f(xa.terminal)) - problem.f(xc.terminal)
    return DeltaSample(float(delta), xc.cost_units + 2 * xf.cost_units, fine)


def delta_gen(x, level: int, rng: np.random.Generator, realization: FieldRealization,
              params: ParamSet, problem: Problem) -> DeltaSample:
    """Sample a level-``level + 1`` path and return the coupled difference on it."""
    if level < 0:
        raise DimensionMismatch(f"level must be >= 0, got {level}")
    fine = sample_path(level + 1, problem.dprime, rng, problem.horizon)
    return delta_on_path(x, level, fine, realization, params, problem)


# -- batched evaluation -------------------------------------------------------


@dataclass
class PathBatch:
    """Concatenated increments for many independent samples.

    Sample ``b`` starts at ``x0s[b]``, uses coefficient row ``rows[b]`` and
    increments ``incs[offs[b]:offs[b] + 2**levels[b]]``.
    """

    x0s: np.ndarray
    rows: np.ndarray
    levels: np.ndarray
    incs: np.ndarray
    offs: np.ndarray

    @classmethod
    def build(cls, x0s, rows, levels, increments: list[np.ndarray], dprime: int):
        levels = np.asarray(levels, dtype=np.int64)
        sizes = np.array([a.shape[0] for a in increments], dtype=np.int64)
        offs = np.zeros(len(increments), dtype=np.int64)
        if len(sizes) > 1:
            offs[1:] = np.cumsum(sizes[:-1])
        incs = (np.concatenate(increments) if increments else np.empty((0, dprime)))
        return cls(np.ascontiguousarray(x0s, dtype=float), np.asarray(rows, dtype=np.int64),
                   levels, np.ascontiguousarray(incs, dtype=float), offs)

    def increments(self, b: int) -> np.ndarray:
        return self.incs[self.offs[b]:self.offs[b] + 2 ** int(self.levels[b])]


def _sizes(levels, gamma, max_terms):
    return np.array([truncation_size(int(n), gamma, max_terms) for n in levels], dtype=np.int64)


def coupled_payoffs(problem: Problem, params: ParamSet, coefs: np.ndarray, batch: PathBatch,
                    base_level: int = -1) -> np.ndarray:
    """``(B, 4)`` array of fine, antithetic, coarse and base payoffs.

    ``batch.levels`` are fine levels (at least 1); ``coefs`` has shape
    ``(rows, M, d)`` holding scaled coefficients.  The base column is NaN when
    ``base_level < 0``.
    """
    g, cap = params.gamma, problem.field.max_terms
    lv = batch.levels
    m_fine = _sizes(lv, g, cap)
    m_coarse = _sizes(lv - 1, g, cap)
    m_base = truncation_size(base_level, g, cap) if base_level >= 0 else 0
    out = np.full((lv.shape[0], 4), np.nan)
    if problem.is_compiled:
        c = problem.compiled
        basis, bp = problem.field.compiled_basis
        _kernels.coupled_terms(
            batch.x0s, batch.rows, np.ascontiguousarray(coefs), batch.incs, batch.offs, lv,
            base_level, m_fine, m_coarse, m_base, float(problem.horizon),
            c.sigma, c.sigma_jac, c.sigma_params, basis, bp, c.payoff, c.payoff_params, out)
        return out
    f = problem.f
    for b in range(lv.shape[0]):
        fine = batch.increments(b)
        n = int(lv[b])
        dt = problem.horizon * 2.0 ** -n
        coef = coefs[batch.rows[b]]
        x0 = batch.x0s[b]
        anti = np.empty_like(fine)
        anti[0::2], anti[1::2] = fine[1::2], fine[0::2]
        coarse = fine[0::2] + fine[1::2]
        out[b, 0] = f(_reference_solve(x0, fine, dt, coef[:m_fine[b]], problem))
        out[b, 1] = f(_reference_solve(x0, anti, dt, coef[:m_fine[b]], problem))
        out[b, 2] = f(_reference_solve(x0, coarse, 2 * dt, coef[:m_coarse[b]], problem))
        if base_level >= 0:
            cur = coarse
            for _ in range(n - 1 - base_level):
                cur = cur[0::2] + cur[1::2]
            out[b, 3] = f(_reference_solve(x0, cur, problem.horizon * 2.0 ** -base_level,
                                           coef[:m_base], problem))
    return out


def terminal_payoffs(problem: Problem, params: ParamSet, coefs: np.ndarray,
                     batch: PathBatch) -> np.ndarray:
    """Uncoupled ``f(X_n(T))`` for each sample of ``batch``."""
    g, cap = params.gamma, problem.field.max_terms
    msize = _sizes(batch.levels, g, cap)
    out = np.empty(batch.levels.shape[0])
    if problem.is_compiled:
        c = problem.compiled
        basis, bp = problem.field.compiled_basis
        _kernels.terminal_payoffs(
            batch.x0s, batch.rows, np.ascontiguousarray(coefs), batch.incs, batch.offs,
            batch.levels, msize, float(problem.horizon), c.sigma, c.sigma_jac, c.sigma_params,
            basis, bp, c.payoff, c.payoff_params, out)
        return out
    for b in range(out.shape[0]):
        n = int(batch.levels[b])
        coef = coefs[batch.rows[b]][:msize[b]]
        out[b] = problem.f(_reference_solve(batch.x0s[b], batch.increments(b),
                                            problem.horizon * 2.0 ** -n, coef, problem))
    return out
