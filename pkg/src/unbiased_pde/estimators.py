"""Level-randomized unbiased estimators.

Inner layer, for a fixed field draw ``mu`` and start point ``x``::

    Z = f(X_{n0}(T)) + Delta_{N + n0} / p_N,      N ~ Geom(1 - 2**-theta)

with the base solution computed on the coarsening of the very path that
drives ``Delta``.  Outer layer, for a smooth functional ``G``::

    W = DeltaTilde_{Nt + n1} / pt_{Nt} + rho(1, 2**n1),   Nt ~ Geom(1 - 2**-1.5)

    DeltaTilde_n = rho(1, 2**(n+1)) - (rho(1, 2**n) + rho(2**n + 1, 2**(n+1))) / 2

where ``rho(a, b)`` applies ``G`` to the per-point means of ``Z`` over
columns ``a..b``.  One field realization is shared by every ``Z`` inside a
``W`` copy; Brownian paths and inner levels are independent per ``Z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .brownian import DyadicPath, coarsen, sample_path
from .errors import IndexRange, ParameterError
from .field import FieldRealization, realize, truncation_size
from .params import ParamSet
from .scheme import PathBatch, Problem, coupled_payoffs, delta_gen, level_cost, num_sol, \
    terminal_payoffs
from .streams import CopyStreams


@dataclass(frozen=True)
class GeometricLaw:
    """``P(N = n) = (1 - 2**-rate) 2**(-rate n)`` on ``n = 0, 1, 2, ...``."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError(f"geometric rate must be positive, got {self.rate}")

    def pmf(self, n):
        return (1.0 - 2.0 ** -self.rate) * np.exp2(-self.rate * np.asarray(n, dtype=float))

    def survival(self, n):
        """``P(N >= n)``."""
        return np.exp2(-self.rate * np.asarray(n, dtype=float))

    def from_uniform(self, u: float) -> int:
        # P(N >= n) = 2**(-rate n), so N = floor(-log2(1 - u) / rate)
        return int(math.floor(-math.log2(1.0 - u) / self.rate))

    def mean_power_of_two(self) -> float:
        """``E[2**N]``, finite when ``rate > 1``."""
        if not self.rate > 1:
            return math.inf
        return (1.0 - 2.0 ** -self.rate) / (1.0 - 2.0 ** (1.0 - self.rate))


def sample_geometric(law: GeometricLaw, rng: np.random.Generator) -> int:
    return law.from_uniform(rng.random())


class ZSample(NamedTuple):
    value: float
    level_drawn: int
    cost_units: int


@dataclass
class WSample:
    value: float
    outer_level: int
    z_count: int
    cost_units: int
    z: np.ndarray | None = field(default=None, repr=False)
    realization: FieldRealization | None = field(default=None, repr=False)


def z_cost(level_drawn: int, params: ParamSet, max_terms: int | None = None) -> int:
    n0, g = params.n0, params.gamma
    return (level_cost(n0, g, max_terms) + level_cost(level_drawn + n0, g, max_terms)
            + 2 * level_cost(level_drawn + n0 + 1, g, max_terms))


def _z_block(problem: Problem, params: ParamSet, realization: FieldRealization, xs,
             gens, biased: bool = False):
    """Evaluate one ``Z`` per generator; returns ``(values, levels_drawn, costs)``.

    Each generator supplies, in order, the uniform for the inner level and
    then the fine Brownian increments.  The biased variant consumes the same
    draws and evaluates only the base solution on the coarsened path, so the
    two differ exactly by the randomized correction.
    """
    n0, cap, dp = params.n0, problem.field.max_terms, problem.dprime
    law = GeometricLaw(params.theta)
    drawn = np.zeros(len(gens), dtype=np.int64)
    incs = []
    for b, g in enumerate(gens):
        drawn[b] = sample_geometric(law, g)
        inc = sample_path(int(drawn[b]) + n0 + 1, dp, g, problem.horizon).increments
        if biased:
            for _ in range(int(drawn[b]) + 1):
                inc = inc[0::2] + inc[1::2]
        incs.append(inc)
    levels = np.full(len(gens), n0, dtype=np.int64) if biased else drawn + n0 + 1
    top = int(levels.max()) if len(gens) else n0
    coefs = np.asarray(realization.scaled(truncation_size(top, params.gamma, cap)))[None]
    batch = PathBatch.build(xs, np.zeros(len(gens), dtype=np.int64), levels, incs, dp)
    if biased:
        values = terminal_payoffs(problem, params, coefs, batch)
        costs = np.full(len(gens), level_cost(n0, params.gamma, cap), dtype=np.int64)
        return values, drawn, costs
    out = coupled_payoffs(problem, params, coefs, batch, base_level=n0)
    delta = 0.5 * (out[:, 0] + out[:, 1]) - out[:, 2]
    values = out[:, 3] + delta / law.pmf(drawn)
    costs = np.array([z_cost(int(n), params, cap) for n in drawn], dtype=np.int64)
    return values, drawn, costs


def unbiased_z(x, realization: FieldRealization, params: ParamSet, problem: Problem,
               rng: np.random.Generator) -> ZSample:
    """One unbiased sample of ``E[f(X_T) | mu]`` started at ``x``."""
    xs = np.asarray(x, dtype=float).reshape(1, problem.d)
    values, drawn, costs = _z_block(problem, params, realization, xs, [rng])
    return ZSample(float(values[0]), int(drawn[0]), int(costs[0]))


def biased_baseline_z(x, realization: FieldRealization, params: ParamSet, problem: Problem,
                      rng: np.random.Generator) -> ZSample:
    """``f(X_{n0}(T))`` with the randomized correction dropped.

    Uses the same draws as :func:`unbiased_z` on an identical generator;
    ``level_drawn`` reports the unused inner level.
    """
    xs = np.asarray(x, dtype=float).reshape(1, problem.d)
    values, drawn, costs = _z_block(problem, params, realization, xs, [rng], biased=True)
    return ZSample(float(values[0]), int(drawn[0]), int(costs[0]))


def unbiased_z_reference(x, realization: FieldRealization, params: ParamSet,
                         problem: Problem, rng: np.random.Generator):
    """Uncompiled step-by-step ``Z``; returns ``(ZSample, fine_path, base_path)``.

    Consumes ``rng`` exactly as :func:`unbiased_z` does, so both give the
    same sample up to floating-point reassociation.
    """
    law = GeometricLaw(params.theta)
    n = sample_geometric(law, rng)
    d = delta_gen(x, n + params.n0, rng, realization, params, problem)
    base = coarsen(d.fine_path, n + 1)
    xb = num_sol(x, params.n0, base, realization, params, problem)
    value = problem.f(xb.terminal) + d.delta / float(law.pmf(n))
    cost = xb.cost_units + d.cost_units
    return ZSample(float(value), n, int(cost)), d.fine_path, base


def _tree_sum(block: np.ndarray) -> np.ndarray:
    # adjacent-pair reduction: sums over aligned dyadic sub-blocks are reused bit-for-bit
    v = block
    while v.shape[1] > 1:
        if v.shape[1] % 2:
            v = np.concatenate([v[:, :-1:2] + v[:, 1::2], v[:, -1:]], axis=1)
        else:
            v = v[:, 0::2] + v[:, 1::2]
    return v[:, 0]


def rho(z: np.ndarray, a: int, b: int, G) -> float:
    """``G`` of the per-row means of columns ``a..b`` (1-based, inclusive)."""
    z = np.atleast_2d(z)
    if not (1 <= a <= b <= z.shape[1]):
        raise IndexRange(f"need 1 <= a <= b <= {z.shape[1]}, got ({a}, {b})")
    means = _tree_sum(z[:, a - 1:b]) / (b - a + 1)
    return float(G(means))


def nested_delta(z: np.ndarray, n: int, G) -> float:
    """``DeltaTilde_n`` from the first ``2**(n+1)`` columns of ``z``."""
    h = 2 ** n
    return rho(z, 1, 2 * h, G) - 0.5 * (rho(z, 1, h, G) + rho(z, h + 1, 2 * h, G))


def z_matrix(problem: Problem, params: ParamSet, realization: FieldRealization,
             streams: CopyStreams, cols: int, biased: bool = False):
    """``(k, cols)`` matrix of ``Z`` values with stream ``(i, j)`` for entry ``(i, j)``."""
    k = problem.k
    gens = [streams.path(i, j) for i in range(k) for j in range(cols)]
    xs = np.repeat(problem.points, cols, axis=0)
    values, drawn, costs = _z_block(problem, params, realization, xs, gens, biased)
    return values.reshape(k, cols), drawn.reshape(k, cols), costs.reshape(k, cols)


def unbiased_w(problem: Problem, params: ParamSet, streams: CopyStreams,
               keep: bool = False) -> WSample:
    """One unbiased sample of ``G(u(x_1, T), ..., u(x_k, T))`` averaged over the field."""
    realization = realize(problem.field, streams)
    outer = GeometricLaw(params.outer_rate)
    nt = sample_geometric(outer, streams.outer())
    m = nt + params.n1
    z, _, costs = z_matrix(problem, params, realization, streams, 2 ** (m + 1))
    value = (nested_delta(z, m, problem.G) / float(outer.pmf(nt))
             + rho(z, 1, 2 ** params.n1, problem.G))
    return WSample(value, nt, z.size, int(costs.sum()),
                   z if keep else None, realization if keep else None)


def biased_baseline_w(problem: Problem, params: ParamSet, streams: CopyStreams,
                      keep: bool = False) -> WSample:
    """``rho(1, 2**n1)`` over biased ``Z`` samples; no randomized corrections."""
    realization = realize(problem.field, streams)
    z, _, costs = z_matrix(problem, params, realization, streams, 2 ** params.n1, biased=True)
    return WSample(rho(z, 1, 2 ** params.n1, problem.G), 0, z.size, int(costs.sum()),
                   z if keep else None, realization if keep else None)


def nested_delta_sample(problem: Problem, params: ParamSet, streams: CopyStreams,
                        n: int) -> tuple[float, int]:
    """``DeltaTilde_n`` for a fresh field draw; returns ``(value, cost_units)``."""
    realization = realize(problem.field, streams)
    z, _, costs = z_matrix(problem, params, realization, streams, 2 ** (n + 1))
    return nested_delta(z, n, problem.G), int(costs.sum())


def _log2_level_cost(n: int, gamma: float, cap: int | None) -> float:
    e = n * gamma
    if cap is not None or e < 50:
        return math.log2(level_cost(n, gamma, cap))
    return n + e  # 1 + floor(2**e) ~ 2**e


def expected_z_cost(params: ParamSet, max_terms: int | None = None,
                    rtol: float = 1e-13, max_levels: int = 10 ** 6) -> float:
    """``E[cost_Z]`` under the unit cost model, summed over the inner law.

    Returns ``inf`` when the series does not converge (``theta`` too small
    for the per-level cost growth).
    """
    law = GeometricLaw(params.theta)
    n0, g = params.n0, params.gamma
    if law.rate <= 1 + (0 if max_terms is not None else g):
        return math.inf
    log_p0 = math.log2(1.0 - 2.0 ** -params.theta)
    total = float(level_cost(n0, g, max_terms))
    for n in range(max_levels):
        lc = 2.0 ** (log_p0 - law.rate * n + _log2_level_cost(n + n0, g, max_terms))
        lf = 2.0 ** (log_p0 - law.rate * n + _log2_level_cost(n + n0 + 1, g, max_terms))
        term = lc + 2 * lf
        total += term
        if n > 10 and term < rtol * total:
            return total
    return math.inf


def expected_w_cost(params: ParamSet, k: int = 1, max_terms: int | None = None) -> float:
    """``E[cost_W] = k 2**(n1+1) E[2**Nt] E[cost_Z]`` by Wald's identity."""
    outer = GeometricLaw(params.outer_rate)
    return k * 2 ** (params.n1 + 1) * outer.mean_power_of_two() * expected_z_cost(params, max_terms)
