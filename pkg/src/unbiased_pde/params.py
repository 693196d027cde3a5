"""Exponent system governing field truncation and level randomization.

A single small constant ``epsilon`` fixes every exponent used by the
estimators:

    alpha = 1/2 - eps        beta  = 1/2 + 2 eps      gamma = 1/3 - 12 eps
    theta = 4/3 - 23/2 eps   delta = 33 eps

``gamma`` sets the drift truncation ``floor(2**(n*gamma))`` and ``theta`` the
rate of the inner geometric level law.  ``epsilon`` must satisfy

    eps < 1/144   and   eps < (1/36) (1/6 - 12 eps) (q - 4)

which makes the admissibility inequalities reported by :meth:`ParamSet.checks`
hold.  Manually chosen ``(gamma, theta)`` pairs are accepted through
:func:`override_parameters`; failing inequalities then become warnings.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import EpsilonTooLarge, InvalidOverride, InvalidQ, ParameterError

OUTER_RATE = 1.5
_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class ParamSet:
    epsilon: float | None
    q: float
    alpha: float
    beta: float
    gamma: float
    theta: float
    delta: float
    n0: int = 5
    n1: int = 5
    override: bool = False
    outer_rate: float = OUTER_RATE
    warnings: tuple[str, ...] = field(default=())

    def checks(self) -> dict[str, bool | None]:
        """Evaluate each admissibility inequality; ``None`` means not applicable."""
        return {name: ok for name, ok, _ in _inequalities(self)}

    @property
    def admissible(self) -> bool:
        return all(ok is not False for ok in self.checks().values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["warnings"] = list(self.warnings)
        out["checks"] = self.checks()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSet":
        if data.get("override"):
            return override_parameters(
                data["gamma"], data["theta"], data["q"],
                n0=data.get("n0", 5), n1=data.get("n1", 5),
                outer_rate=data.get("outer_rate", OUTER_RATE),
            )
        return derive_parameters(
            data.get("epsilon"), data["q"],
            n0=data.get("n0", 5), n1=data.get("n1", 5),
            outer_rate=data.get("outer_rate", OUTER_RATE),
        )


def _fmt(x: float) -> str:
    for num, den in ((1, 3), (4, 3), (1, 4), (2, 3)):
        if abs(x - num / den) < _BOUNDARY_TOL:
            return f"{num}/{den}"
    return f"{x:.6g}"


def _strict(lhs: float, rhs: float) -> tuple[bool, str]:
    if lhs > rhs + _BOUNDARY_TOL:
        return True, ""
    if abs(lhs - rhs) <= _BOUNDARY_TOL:
        return False, f"fails at boundary ({_fmt(lhs)} = {_fmt(rhs)})"
    return False, f"fails ({_fmt(lhs)} < {_fmt(rhs)})"


def _inequalities(p: ParamSet):
    """Yield ``(name, holds, detail)`` for every admissibility inequality."""
    g, t, q = p.gamma, p.theta, p.q

    if g >= 0.25 - _BOUNDARY_TOL:
        yield "gamma >= 1/4", True, ""
    else:
        yield "gamma >= 1/4", False, f"fails ({_fmt(g)} < 1/4)"

    ok, why = _strict((3 + (q - 4) / 2) * g, 1.0)
    yield "(3 + (q-4)/2) * gamma > 1", ok, why

    if p.override:
        # alpha, beta, delta only exist through epsilon; this one involves neither gamma nor theta
        yield "8(2 alpha - beta) > 4 - delta > 0", None, "not applicable under override"
    else:
        ok1, why1 = _strict(8 * (2 * p.alpha - p.beta), 4 - p.delta)
        ok2, why2 = _strict(4 - p.delta, 0.0)
        yield "8(2 alpha - beta) > 4 - delta > 0", ok1 and ok2, why1 or why2

    ok1, why1 = _strict(4 - p.delta, 3 * t)
    ok2, why2 = _strict(3 * t, 0.0)
    yield "4 - delta > 3 theta > 0", ok1 and ok2, why1 or why2

    ok1, why1 = _strict(t, 1 + g)
    ok2, why2 = _strict(1 + g, 0.0)
    yield "theta > 1 + gamma > 0", ok1 and ok2, why1 or why2


def epsilon_bound(q: float) -> float:
    """Supremum of admissible epsilon for decay exponent ``q``.

    The second condition rearranges to ``eps < (q-4) / (216 + 72 (q-4))``.
    """
    if not q > 4:
        raise InvalidQ(f"q must exceed 4, got {q}")
    s = q - 4
    return min(1 / 144, s / (216 + 72 * s))


def _epsilon_ok(eps: float, q: float) -> bool:
    return eps < 1 / 144 and eps < (1 / 6 - 12 * eps) * (q - 4) / 36


def default_epsilon(q: float, grid: float = 1e-6) -> float:
    """Largest epsilon on a ``grid`` lattice that satisfies both conditions."""
    k = math.ceil(epsilon_bound(q) / grid) - 1
    while k > 0 and not _epsilon_ok(k * grid, q):
        k -= 1
    if k <= 0:
        raise InvalidQ(f"no admissible epsilon on a {grid:g} grid for q={q}")
    return k * grid


def _outer_warnings(outer_rate: float) -> list[str]:
    if not outer_rate > 0:
        raise ParameterError(f"outer rate must be positive, got {outer_rate}")
    if outer_rate != OUTER_RATE:
        return [f"outer geometric rate changed from {OUTER_RATE} to {outer_rate}"]
    return []


def _check_levels(n0: int, n1: int) -> None:
    if int(n0) != n0 or n0 < 0:
        raise ParameterError(f"n0 must be an integer >= 0, got {n0}")
    if int(n1) != n1 or n1 < 1:
        raise ParameterError(f"n1 must be an integer >= 1, got {n1}")


def derive_parameters(epsilon: float | None = None, q: float = 5.0, n0: int = 5,
                      n1: int = 5, outer_rate: float = OUTER_RATE) -> ParamSet:
    """Build the exponent system from ``epsilon`` (default: :func:`default_epsilon`)."""
    if not q > 4:
        raise InvalidQ(f"q must exceed 4, got {q}")
    _check_levels(n0, n1)
    if epsilon is None:
        epsilon = default_epsilon(q)
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    if not epsilon < 1 / 144:
        raise EpsilonTooLarge(f"epsilon={epsilon} violates epsilon < 1/144")
    if not _epsilon_ok(epsilon, q):
        raise EpsilonTooLarge(
            f"epsilon={epsilon} violates epsilon < (1/36)(1/6 - 12 epsilon)(q - 4) for q={q}")

    eps = epsilon
    p = ParamSet(
        epsilon=eps, q=q,
        alpha=0.5 - eps, beta=0.5 + 2 * eps, gamma=1 / 3 - 12 * eps,
        theta=4 / 3 - 11.5 * eps, delta=33 * eps,
        n0=int(n0), n1=int(n1), outer_rate=outer_rate,
        warnings=tuple(_outer_warnings(outer_rate)),
    )
    failed = [f"{name} {why}" for name, ok, why in _inequalities(p) if ok is False]
    if failed:
        raise ParameterError("derived exponents inadmissible: " + "; ".join(failed))
    return p


def override_parameters(gamma: float, theta: float, q: float, n0: int = 5, n1: int = 5,
                        outer_rate: float = OUTER_RATE) -> ParamSet:
    """Use a manual ``(gamma, theta)`` pair; violated inequalities become warnings.

    ``alpha``, ``beta`` and ``delta`` take their epsilon -> 0 limits
    (1/2, 1/2, 0) since no epsilon is implied by an arbitrary pair.
    """
    if not (gamma > 0 and theta > 0):
        raise InvalidOverride(f"gamma and theta must be positive, got ({gamma}, {theta})")
    _check_levels(n0, n1)
    p = ParamSet(
        epsilon=None, q=q, alpha=0.5, beta=0.5, gamma=gamma, theta=theta, delta=0.0,
        n0=int(n0), n1=int(n1), override=True, outer_rate=outer_rate,
    )
    warns = [f"{name} {why}" for name, ok, why in _inequalities(p) if ok is False]
    if not q > 4:
        warns.append(f"q = {q:g} violates q > 4")
    warns += _outer_warnings(outer_rate)
    return ParamSet(**{**asdict(p), "warnings": tuple(warns)})
