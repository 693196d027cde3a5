"""Benchmark problems, their independent oracles, and JSON problem configs.

``ou-example1``
    dX = -alpha X dt + dB, X_0 = 0, alpha ~ N(1, 0.05**2), f(x) = x**2,
    G(y) = exp(-y**2).  Given alpha, X_1 ~ N(0, (1 - e^{-2 alpha}) / (2 alpha)),
    so the target is a one-dimensional Gaussian integral.

``example2``
    dX = -mu(X) dt + cos(X) dB, X_0 = 0, mu(x) = sum_i i^-4 sin(i x) V_i with
    gamma = 1/3 and theta = 4/3.  There is no closed form.

Problem files are JSON objects, either ``{"builtin": name, ...options}`` or
an inline description naming built-in families (see :func:`from_config`).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from scipy import integrate

from . import _kernels as K
from .errors import ConfigError, QuadratureNonConvergence
from .field import FieldSpec
from .params import ParamSet, derive_parameters, override_parameters
from .scheme import CompiledFunctions, Problem

OU_ALPHA_MEAN = 1.0
OU_ALPHA_SD = 0.05

# -- oracles ------------------------------------------------------------------


def ou_conditional_mean(alpha: float) -> float:
    """``E[X_1**2 | alpha] = (1 - exp(-2 alpha)) / (2 alpha)``; 1 at alpha = 0."""
    if alpha == 0:
        return 1.0
    return -math.expm1(-2.0 * alpha) / (2.0 * alpha)


def ou_nu_integrand(a: float, alpha_mean: float = OU_ALPHA_MEAN,
                    alpha_sd: float = OU_ALPHA_SD) -> float:
    dens = math.exp(-0.5 * ((a - alpha_mean) / alpha_sd) ** 2) / (math.sqrt(2 * math.pi) * alpha_sd)
    return dens * math.exp(-ou_conditional_mean(a) ** 2)


def ou_nu_quadrature(abs_tol: float = 1e-6, alpha_mean: float = OU_ALPHA_MEAN,
                     alpha_sd: float = OU_ALPHA_SD, width: float = 8.0) -> float:
    """Adaptive Gauss-Kronrod value of ``E[G(E[f(X_1) | alpha])]``.

    Integrates over ``alpha_mean +- width * alpha_sd``; the Gaussian mass
    outside is below 1.3e-15 for the default width and ``G <= 1``.
    """
    if not abs_tol > 0:
        raise ValueError(f"abs_tol must be positive, got {abs_tol}")
    if alpha_sd == 0:
        return math.exp(-ou_conditional_mean(alpha_mean) ** 2)
    lo, hi = alpha_mean - width * alpha_sd, alpha_mean + width * alpha_sd
    val, err, info = integrate.quad(ou_nu_integrand, lo, hi, args=(alpha_mean, alpha_sd),
                                    epsabs=abs_tol, epsrel=0.0, limit=200, full_output=1)[:3]
    if err > abs_tol:
        raise QuadratureNonConvergence(f"estimated error {err:.3g} exceeds {abs_tol:.3g}")
    return val


def ou_exact_terminal(alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Exact draws of ``X_1`` given each ``alpha`` (no time stepping)."""
    alpha = np.asarray(alpha, dtype=float)
    var = np.where(alpha == 0, 1.0, -np.expm1(-2 * alpha) / np.where(alpha == 0, 1, 2 * alpha))
    return rng.standard_normal(alpha.shape) * np.sqrt(var)


# -- families -----------------------------------------------------------------

BASES = {
    "sine": K.sine_basis,
    "cosine": K.cosine_basis,
    "neg-linear": K.neg_linear_basis,
    "constant": K.constant_basis,
}


def _bind_basis(fn, params):
    def basis(x, m):
        out = np.empty(m)
        fn(np.asarray(x, dtype=float), m, params, out)
        return out
    return basis


def _bind_matrix(fn, params, shape):
    def evaluate(x):
        out = np.empty(shape)
        fn(np.asarray(x, dtype=float), params, out)
        return out
    return evaluate


def _sigma_family(cfg: dict, d: int, dprime: int):
    fam = cfg.get("family")
    if fam == "constant":
        mat = np.asarray(cfg.get("matrix", np.eye(d, dprime)), dtype=float).reshape(d, dprime)
        return K.constant_sigma, K.constant_sigma_jac, np.concatenate([[d, dprime], mat.ravel()])
    if fam in ("cos", "linear"):
        if d != 1 or dprime != 1:
            raise ConfigError(f"sigma family {fam!r} requires d = d' = 1")
        p = np.array([float(cfg.get("scale", 1.0))])
        if fam == "cos":
            return K.cos_sigma, K.cos_sigma_jac, p
        return K.linear_sigma, K.linear_sigma_jac, p
    raise ConfigError(f"unknown sigma family {fam!r}")


def _payoff_family(cfg: dict, d: int):
    fam = cfg.get("family")
    if fam == "square":
        return K.square_payoff, np.zeros(1)
    if fam == "affine":
        w = np.broadcast_to(np.asarray(cfg.get("weights", 1.0), dtype=float), (d,))
        return K.affine_payoff, np.concatenate([[float(cfg.get("offset", 0.0))], w])
    raise ConfigError(f"unknown payoff family {fam!r}")


def _functional_family(cfg: dict, k: int):
    """``(G, grad G)`` for a functional family on R^k."""
    fam = cfg.get("family")
    if fam == "identity":
        if k != 1:
            raise ConfigError("functional 'identity' needs exactly one evaluation point")
        return (lambda y: float(y[0])), (lambda y: np.ones(1))
    if fam == "affine":
        w = np.broadcast_to(np.asarray(cfg.get("weights", 1.0), dtype=float), (k,)).copy()
        c = float(cfg.get("offset", 0.0))
        return (lambda y: c + float(w @ y)), (lambda y: w.copy())
    if fam == "gauss":
        if k != 1:
            raise ConfigError("functional 'gauss' needs exactly one evaluation point")
        return (lambda y: math.exp(-float(y[0]) ** 2),
                lambda y: np.array([-2 * y[0] * math.exp(-float(y[0]) ** 2)]))
    if fam == "product":
        def grad(y):
            y = np.asarray(y, dtype=float)
            return np.array([np.prod(np.delete(y, i)) for i in range(y.size)])
        return (lambda y: float(np.prod(y))), grad
    raise ConfigError(f"unknown functional family {fam!r}")


def _rule(value, d: int, kind: str):
    """Turn a config number/list into an index rule; ``None`` stays ``None``."""
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if kind == "cov":
        arr = arr * np.eye(d) if arr.ndim == 0 else arr.reshape(d, d)
    elif kind == "mean":
        arr = np.broadcast_to(arr, (d,)).copy()
    return lambda i: arr


def _params_from(cfg: dict | None, q: float) -> ParamSet | None:
    if cfg is None:
        return None
    n0, n1 = cfg.get("n0", 5), cfg.get("n1", 5)
    if "gamma" in cfg or "theta" in cfg:
        if "gamma" not in cfg or "theta" not in cfg:
            raise ConfigError("params override needs both gamma and theta")
        return override_parameters(cfg["gamma"], cfg["theta"], cfg.get("q", q), n0, n1,
                                   outer_rate=cfg.get("outer_rate", 1.5))
    return derive_parameters(cfg.get("epsilon"), cfg.get("q", q), n0, n1,
                             outer_rate=cfg.get("outer_rate", 1.5))


def _inline(cfg: dict) -> Problem:
    try:
        d = int(cfg.get("d", 1))
        dprime = int(cfg.get("dprime", d))
        points = np.asarray(cfg.get("points", [[0.0] * d]), dtype=float).reshape(-1, d)
        fcfg = dict(cfg["field"])
        basis_name = fcfg.get("basis", "sine")
        if basis_name not in BASES:
            raise ConfigError(f"unknown basis family {basis_name!r}")
        lam = float(fcfg.get("lambda", 1.0))
        bp = np.zeros(1)
        spec = FieldSpec(
            d=d, q=float(fcfg.get("q", 5.0)),
            basis=_bind_basis(BASES[basis_name], bp),
            lam=lambda i: lam, lam_bound=max(1.0, abs(lam)),
            cov=_rule(fcfg.get("cov"), d, "cov"), mean=_rule(fcfg.get("mean"), d, "mean"),
            max_terms=fcfg.get("max_terms"), compiled_basis=(BASES[basis_name], bp),
            name=basis_name,
            warnings=tuple(fcfg.get("warnings", ())),
        )
        sg, sj, sp = _sigma_family(cfg.get("sigma", {"family": "constant"}), d, dprime)
        pf, fp = _payoff_family(cfg.get("f", {"family": "square"}), d)
        G, G_grad = _functional_family(cfg.get("G", {"family": "identity"}), points.shape[0])
        params = _params_from(cfg.get("params"), spec.q)
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return Problem(
        d=d, dprime=dprime,
        sigma=_bind_matrix(sg, sp, (d, dprime)),
        sigma_jac=_bind_matrix(sj, sp, (d, dprime, d)),
        f=lambda x: pf(np.asarray(x, dtype=float), fp),
        G=G, G_grad=G_grad, points=points, field=spec,
        horizon=float(cfg.get("horizon", 1.0)), params=params,
        compiled=CompiledFunctions(sg, sj, sp, pf, fp),
        name=cfg.get("name", "custom"), config=cfg,
        warnings=tuple(cfg.get("warnings", ())),
    )


# -- built-ins ----------------------------------------------------------------


def ou_config(alpha_mean: float = OU_ALPHA_MEAN, alpha_sd: float = OU_ALPHA_SD,
              x0: float = 0.0) -> dict:
    return {
        "name": "ou-example1", "d": 1, "dprime": 1, "points": [[x0]],
        "field": {"basis": "neg-linear", "q": 5.0, "lambda": 1.0, "cov": alpha_sd ** 2,
                  "mean": alpha_mean, "max_terms": 1},
        "sigma": {"family": "constant", "matrix": [[1.0]]},
        "f": {"family": "square"}, "G": {"family": "gauss"},
        "params": {"n0": 5, "n1": 5, "q": 5.0},
        "warnings": ["drift -alpha x is unbounded, outside the bounded-field assumption"],
    }


def example2_config(f: dict | None = None, G: dict | None = None) -> dict:
    return {
        "name": "example2", "d": 1, "dprime": 1, "points": [[0.0]],
        # dX = -mu dt: the minus sign is carried by lambda_i = -1
        "field": {"basis": "sine", "q": 4.0, "lambda": -1.0, "cov": 1.0, "max_terms": None},
        "sigma": {"family": "cos", "scale": 1.0},
        "f": f or {"family": "square"}, "G": G or {"family": "identity"},
        "params": {"gamma": 1 / 3, "theta": 4 / 3, "q": 4.0, "n0": 5, "n1": 5},
    }


def ou_problem(alpha_mean: float = OU_ALPHA_MEAN, alpha_sd: float = OU_ALPHA_SD,
               x0: float = 0.0) -> Problem:
    """The Ornstein-Uhlenbeck benchmark; ``alpha_sd = 0`` pins alpha."""
    cfg = {"builtin": "ou-example1", "alpha_mean": alpha_mean, "alpha_sd": alpha_sd, "x0": x0}
    p = _inline(ou_config(alpha_mean, alpha_sd, x0))
    object.__setattr__(p, "config", cfg)
    return p


def example2_problem(f: dict | None = None, G: dict | None = None) -> Problem:
    cfg = {"builtin": "example2"}
    if f is not None:
        cfg["f"] = f
    if G is not None:
        cfg["G"] = G
    p = _inline(example2_config(f, G))
    object.__setattr__(p, "config", cfg)
    return p


BUILTINS = {"ou-example1": ou_problem, "example2": example2_problem}


def from_config(cfg: dict) -> Problem:
    """Build a problem from a parsed JSON config.

    Inline configs accept the keys ``d``, ``dprime``, ``points``, ``horizon``,
    ``field`` (``basis``, ``q``, ``lambda``, ``cov``, ``mean``,
    ``max_terms``), ``sigma`` (``family``: constant | cos | linear), ``f``
    (square | affine), ``G`` (identity | affine | gauss | product) and
    ``params`` (``epsilon``/``q`` or ``gamma``/``theta``, plus ``n0``, ``n1``).
    """
    if not isinstance(cfg, dict):
        raise ConfigError("problem config must be a JSON object")
    if "builtin" in cfg:
        name = cfg["builtin"]
        opts = {k: v for k, v in cfg.items() if k != "builtin"}
        if name not in BUILTINS:
            raise ConfigError(f"unknown builtin problem {name!r}; choose from {sorted(BUILTINS)}")
        try:
            return BUILTINS[name](**opts)
        except TypeError as exc:
            raise ConfigError(f"bad options for {name!r}: {exc}") from exc
    return _inline(cfg)


def load_problem(source: str | Path) -> Problem:
    """A builtin name, or a path to a JSON problem file."""
    if isinstance(source, str) and source in BUILTINS:
        return BUILTINS[source]()
    path = Path(source)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such problem file or builtin: {source}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_config(cfg)


def save_problem(problem: Problem, path: str | Path) -> None:
    if problem.config is None:
        raise ConfigError("problem was not built from a config and cannot be saved")
    Path(path).write_text(json.dumps(problem.config, indent=2) + "\n")
