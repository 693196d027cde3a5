"""Parallel copy generation and the reports behind the command-line tool.

Work is split into fixed chunks of consecutive copy indices.  Every copy
draws only from its own counter-based streams, chunks are dispatched to a
thread pool and their results are merged in index order, so the numbers do
not depend on the thread count.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, EmptyInput, NumericFailure
from .estimators import biased_baseline_w, nested_delta_sample, unbiased_w, z_matrix
from .field import realize, truncation_size
from .params import ParamSet, derive_parameters, override_parameters
from .scheme import PathBatch, Problem, coupled_payoffs
from .stats import RunningMoments, ci95, fit_log2_slope, intervals_overlap
from .streams import AUX, StreamFactory

CHUNK = 64
# |Delta| at or below this multiple of the payoff scale is treated as round-off
ROUNDOFF = 1e-12


def resolve_params(problem: Problem, epsilon: float | None = None, gamma: float | None = None,
                   theta: float | None = None, n0: int | None = None,
                   n1: int | None = None) -> ParamSet:
    """Problem defaults with command-line style overrides applied."""
    base = problem.params
    q = base.q if base is not None else problem.field.q
    n0 = n0 if n0 is not None else (base.n0 if base is not None else 5)
    n1 = n1 if n1 is not None else (base.n1 if base is not None else 5)
    rate = base.outer_rate if base is not None else 1.5
    if (gamma is None) != (theta is None):
        raise ConfigError("--gamma and --theta must be given together")
    if gamma is not None:
        if epsilon is not None:
            raise ConfigError("--epsilon cannot be combined with --gamma/--theta")
        return override_parameters(gamma, theta, q, n0, n1, outer_rate=rate)
    if epsilon is None and base is not None and base.override:
        return override_parameters(base.gamma, base.theta, q, n0, n1, outer_rate=rate)
    eps = epsilon if epsilon is not None else (base.epsilon if base is not None else None)
    return derive_parameters(eps, q, n0, n1, outer_rate=rate)


# -- parallel map -------------------------------------------------------------


def _chunks(total: int, size: int = CHUNK):
    return [(s, min(s + size, total)) for s in range(0, total, size)]


def parallel_map(task: Callable[[int, int], object], total: int, threads: int = 1,
                 chunk: int = CHUNK) -> list:
    """``[task(start, stop) for each chunk]`` in chunk order."""
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    spans = _chunks(total, chunk)
    if threads == 1:
        return [task(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: task(*ab), spans))


class _Samples:
    """Per-chunk values, costs, and moments of the values."""

    def __init__(self, values, costs):
        self.values = np.asarray(values, dtype=float)
        self.costs = np.asarray(costs, dtype=np.int64)
        self.moments = RunningMoments()
        self.moments.update_batch(self.values)


def _guard(value: float, what: str, copy: int, seed: int, detail: str = "") -> None:
    if not math.isfinite(value):
        raise NumericFailure(f"non-finite {what} sample {value!r} at copy {copy} "
                             f"(seed {seed}){': ' + detail if detail else ''}")


# -- reports ------------------------------------------------------------------


@dataclass
class EstimateReport:
    """Aggregate of i.i.d. estimator copies.

    ``margin`` is the ``1/sqrt(copies)`` yardstick; ``max_cost_units`` is the
    largest single-copy cost.
    """

    estimate: float
    std_error: float
    ci95: tuple[float, float]
    copies: int
    mean_cost_units: float
    total_wall_time: float
    params_echo: ParamSet
    seed: int
    problem: str = "custom"
    estimator: str = "W"
    biased: bool = False
    margin: float = math.nan
    max_cost_units: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self, wall_time: bool = True) -> dict:
        out = asdict(self)
        out["ci95"] = list(self.ci95)
        out["params_echo"] = self.params_echo.to_dict()
        if not wall_time:
            out.pop("total_wall_time")
        return out

    def to_json(self, wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(wall_time), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateReport":
        data = dict(data)
        data["ci95"] = tuple(data["ci95"])
        data["params_echo"] = ParamSet.from_dict(data["params_echo"])
        data.setdefault("total_wall_time", math.nan)
        return cls(**data)


@dataclass
class EstimateRun:
    report: EstimateReport
    values: np.ndarray
    costs: np.ndarray


def _problem_label(problem: Problem) -> str:
    return problem.name


def _w_task(problem, params, factory, biased):
    fn = biased_baseline_w if biased else unbiased_w

    def task(start, stop):
        vals, costs = [], []
        for c in range(start, stop):
            w = fn(problem, params, factory.copy(c))
            _guard(w.value, "W", c, factory.seed,
                   f"outer level {w.outer_level}, {w.z_count} inner samples")
            vals.append(w.value)
            costs.append(w.cost_units)
        return _Samples(vals, costs)
    return task


def _z_task(problem, params, factory, biased):
    def task(start, stop):
        vals, costs = [], []
        for c in range(start, stop):
            streams = factory.copy(c)
            real = realize(problem.field, streams)
            z, drawn, cost = z_matrix(problem, params, real, streams, 1, biased)
            _guard(z[0, 0], "Z", c, factory.seed, f"inner level {int(drawn[0, 0])}")
            vals.append(z[0, 0])
            costs.append(cost[0, 0])
        return _Samples(vals, costs)
    return task


def estimate(problem: Problem, params: ParamSet | None = None, copies: int = 10_000,
             seed: int = 0, threads: int = 1, biased: bool = False,
             target: str = "W") -> EstimateRun:
    """Run ``copies`` independent copies of ``W`` (or ``Z``) and aggregate them.

    ``target = "Z"`` estimates ``u(x, T)`` at the single evaluation point.
    """
    if copies < 2:
        raise ConfigError(f"copies must be >= 2, got {copies}")
    target = target.upper()
    if target not in ("W", "Z"):
        raise ConfigError(f"target must be 'W' or 'Z', got {target!r}")
    if target == "Z" and problem.k != 1:
        raise ConfigError("target Z needs exactly one evaluation point")
    params = params if params is not None else resolve_params(problem)
    factory = StreamFactory(seed)
    make = _w_task if target == "W" else _z_task
    t0 = time.perf_counter()
    parts = parallel_map(make(problem, params, factory, biased), copies, threads)
    wall = time.perf_counter() - t0
    acc = RunningMoments()
    for p in parts:
        acc = acc.merge(p.moments)
    values = np.concatenate([p.values for p in parts])
    costs = np.concatenate([p.costs for p in parts])
    est, se = acc.mean, acc.std_error
    report = EstimateReport(
        estimate=est, std_error=se, ci95=ci95(est, se), copies=copies,
        mean_cost_units=float(costs.mean()), total_wall_time=wall, params_echo=params,
        seed=seed, problem=_problem_label(problem), estimator=target, biased=biased,
        margin=1.0 / math.sqrt(copies), max_cost_units=int(costs.max()),
        warnings=list(problem.warnings) + list(params.warnings))
    return EstimateRun(report, values, costs)


def write_per_copy_csv(run: EstimateRun, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["copy", "value", "cost_units"])
        for i, (v, c) in enumerate(zip(run.values, run.costs)):
            w.writerow([i, repr(float(v)), int(c)])


def read_samples_csv(path: str | Path) -> np.ndarray:
    """Values from a per-copy CSV (``value`` column) or a bare one-column file."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except FileNotFoundError as exc:
        raise ConfigError(f"no such samples file: {path}") from exc
    if not rows:
        return np.empty(0)
    col = 0
    if "value" in rows[0]:
        col = rows[0].index("value")
        rows = rows[1:]
    try:
        return np.array([float(r[col]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed samples file ({exc})") from exc


# -- convergence --------------------------------------------------------------


@dataclass
class LevelSeries:
    """Second moments per level with standard errors and a fitted slope."""

    levels: list[int]
    samples: list[int]
    moments: list[float]
    std_errors: list[float]
    slope: float | None = None
    slope_se: float | None = None
    status: str = "ok"

    @classmethod
    def build(cls, levels, accs: list[RunningMoments], zero: list[bool]) -> "LevelSeries":
        out = cls(list(levels), [a.count for a in accs], [a.mean for a in accs],
                  [a.std_error for a in accs])
        if all(zero):
            out.status = "degenerate: exact zeros"
            out.moments = [0.0] * len(accs)
            out.std_errors = [0.0] * len(accs)
        elif any(m <= 0 for m in out.moments):
            out.status = "degenerate: some levels are zero"
        else:
            fit = fit_log2_slope(out.levels, out.moments)
            out.slope, out.slope_se = fit.slope, fit.slope_se
        return out


@dataclass
class ConvergenceReport:
    problem: str
    seed: int
    params_echo: ParamSet
    delta: LevelSeries | None
    nested: LevelSeries | None
    total_wall_time: float = 0.0

    def to_dict(self, wall_time: bool = True) -> dict:
        out = {"problem": self.problem, "seed": self.seed,
               "params_echo": self.params_echo.to_dict(),
               "delta": None if self.delta is None else asdict(self.delta),
               "nested": None if self.nested is None else asdict(self.nested)}
        if wall_time:
            out["total_wall_time"] = self.total_wall_time
        return out

    def to_json(self, wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(wall_time), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ConvergenceReport":
        def series(d):
            return None if d is None else LevelSeries(**d)
        return cls(data["problem"], data["seed"], ParamSet.from_dict(data["params_echo"]),
                   series(data["delta"]), series(data["nested"]),
                   data.get("total_wall_time", math.nan))


def delta_samples(problem: Problem, params: ParamSet, levels, start: int, stop: int,
                  factory: StreamFactory) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """``Delta_n`` at the first evaluation point for copies ``start..stop-1``.

    Copy ``c`` draws one field shared by all levels and, for level ``n``, a
    path from its stream ``(AUX, n)``.  Returns ``{n: (differences, coarse
    payoffs)}``.
    """
    n_copies = stop - start
    cap = problem.field.max_terms
    top = truncation_size(max(levels) + 1, params.gamma, cap)
    coefs = np.empty((n_copies, top, problem.d))
    gens = []
    for r, c in enumerate(range(start, stop)):
        streams = factory.copy(c)
        coefs[r] = realize(problem.field, streams).scaled(top)
        gens.append(streams)
    x0s = np.repeat(problem.points[:1], n_copies, axis=0)
    out = {}
    for n in levels:
        fine = n + 1
        m = truncation_size(fine, params.gamma, cap)
        scale = math.sqrt(problem.horizon * 2.0 ** -fine)
        incs = [g.stream(AUX, n, 0).standard_normal((2 ** fine, problem.dprime)) * scale
                for g in gens]
        batch = PathBatch.build(x0s, np.arange(n_copies), np.full(n_copies, fine), incs,
                                problem.dprime)
        pay = coupled_payoffs(problem, params, np.ascontiguousarray(coefs[:, :m]), batch)
        out[n] = (0.5 * (pay[:, 0] + pay[:, 1]) - pay[:, 2], pay[:, 2])
    return out


def _delta_task(problem, params, factory, levels):
    def task(start, stop):
        res = {}
        for n, (d, fc) in delta_samples(problem, params, levels, start, stop, factory).items():
            for r in range(d.shape[0]):
                _guard(d[r], "Delta", start + r, factory.seed, f"level {n}")
            acc = RunningMoments()
            acc.update_batch(d * d)
            res[n] = (acc, bool(np.all(np.abs(d) <= ROUNDOFF * np.maximum(1.0, np.abs(fc)))))
        return res
    return task


def _nested_task(problem, params, factory, levels):
    def task(start, stop):
        res = {}
        for n in levels:
            vals, zero = [], True
            for c in range(start, stop):
                v, _ = nested_delta_sample(problem, params, factory.copy(c), n)
                _guard(v, "DeltaTilde", c, factory.seed, f"outer level {n}")
                vals.append(v * v)
                zero = zero and abs(v) <= ROUNDOFF
            acc = RunningMoments()
            acc.update_batch(vals)
            res[n] = (acc, zero)
        return res
    return task


def _series(make, problem, params, seed, levels, samples, threads):
    levels = sorted(set(int(n) for n in levels))
    factory = StreamFactory(seed)
    accs = {n: RunningMoments() for n in levels}
    zeros = {n: True for n in levels}
    for part in parallel_map(make(problem, params, factory, levels), samples, threads):
        for n, (a, z) in part.items():
            accs[n] = accs[n].merge(a)
            zeros[n] = zeros[n] and z
    return LevelSeries.build(levels, [accs[n] for n in levels], [zeros[n] for n in levels])


def convergence(problem: Problem, params: ParamSet | None = None, levels=range(2, 8),
                samples: int = 100_000, seed: int = 0, nested_levels=None,
                nested_samples: int | None = None, threads: int = 1) -> ConvergenceReport:
    """Empirical ``E[Delta_n**2]`` and ``E[DeltaTilde_n**2]`` per level with log2 slopes.

    Differences whose size is within round-off of the payoff scale count as
    exact zeros; if every level is such, the series is reported as degenerate.
    """
    params = params if params is not None else resolve_params(problem)
    lv = list(levels) if levels is not None else []
    nl = list(nested_levels) if nested_levels is not None else []
    for name, ls in (("levels", lv), ("nested levels", nl)):
        if ls and (len(set(ls)) < 3 or min(ls) < 0):
            raise ConfigError(f"{name} need at least three distinct values >= 0")
    if not lv and not nl:
        raise ConfigError("no levels requested")
    if min(samples, nested_samples or samples) < 1000:
        raise ConfigError("samples per level must be >= 1000")
    t0 = time.perf_counter()
    delta = _series(_delta_task, problem, params, seed, lv, samples, threads) if lv else None
    nested = (_series(_nested_task, problem, params, seed, nl, nested_samples or samples,
                      threads) if nl else None)
    return ConvergenceReport(_problem_label(problem), seed, params, delta, nested,
                             time.perf_counter() - t0)


# -- compare and histogram ----------------------------------------------------


@dataclass
class CompareReport:
    unbiased: EstimateReport
    biased: EstimateReport
    disjoint: bool
    biased_higher: bool
    verdict: str

    def to_dict(self, wall_time: bool = True) -> dict:
        return {"unbiased": self.unbiased.to_dict(wall_time),
                "biased": self.biased.to_dict(wall_time),
                "disjoint": self.disjoint, "biased_higher": self.biased_higher,
                "verdict": self.verdict}

    def to_json(self, wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(wall_time), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CompareReport":
        return cls(EstimateReport.from_dict(data["unbiased"]),
                   EstimateReport.from_dict(data["biased"]),
                   data["disjoint"], data["biased_higher"], data["verdict"])


def compare(problem: Problem, params: ParamSet | None = None, copies: int = 10_000,
            seed: int = 0, threads: int = 1) -> CompareReport:
    """Unbiased ``W`` against the baseline without corrections, same copies and seed."""
    params = params if params is not None else resolve_params(problem)
    u = estimate(problem, params, copies, seed, threads).report
    b = estimate(problem, params, copies, seed, threads, biased=True).report
    disjoint = not intervals_overlap(u.ci95, b.ci95)
    higher = b.ci95[0] > u.ci95[1]
    if not disjoint:
        verdict = "no significant bias detected"
    else:
        verdict = f"disjoint: biased interval {'higher' if higher else 'lower'}"
    return CompareReport(u, b, disjoint, higher, verdict)


def histogram(samples, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width ``(edges, counts)`` over the sample range."""
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInput("no samples to bin")
    if not np.all(np.isfinite(x)):
        raise NumericFailure("samples contain non-finite values")
    counts, edges = np.histogram(x, bins=bins)
    return edges, counts


def write_histogram_csv(edges, counts, path_or_file) -> None:
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["left", "right", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    finally:
        if own:
            fh.close()
