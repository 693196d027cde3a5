import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unbiased_pde.errors import EpsilonTooLarge, InvalidOverride, InvalidQ, ParameterError
from unbiased_pde.params import (ParamSet, default_epsilon, derive_parameters, epsilon_bound,
                                 override_parameters)

INEQUALITIES = [
    "gamma >= 1/4",
    "(3 + (q-4)/2) * gamma > 1",
    "8(2 alpha - beta) > 4 - delta > 0",
    "4 - delta > 3 theta > 0",
    "theta > 1 + gamma > 0",
]


def test_derived_values_at_one_three_hundredth():
    p = derive_parameters(1 / 300, q=5, n0=5, n1=5)
    np.testing.assert_allclose(
        [p.alpha, p.beta, p.gamma, p.theta, p.delta],
        [0.5 - 1 / 300, 0.5 + 2 / 300, 1 / 3 - 12 / 300, 4 / 3 - 11.5 / 300, 33 / 300],
        atol=1e-10)
    np.testing.assert_allclose([p.alpha, p.beta, p.gamma, p.theta, p.delta],
                               [0.496667, 0.506667, 0.293333, 1.295, 0.11], atol=1e-6)
    assert not p.override and p.warnings == ()
    assert all(p.checks()[name] for name in INEQUALITIES)


def test_epsilon_too_large():
    with pytest.raises(EpsilonTooLarge):
        derive_parameters(0.01, q=5)


def test_second_epsilon_condition():
    # at q = 4.5 the q-dependent bound 0.5 / 252 is below 1/144
    with pytest.raises(EpsilonTooLarge):
        derive_parameters(0.0025, q=4.5)


def test_q_at_four_rejected():
    with pytest.raises(InvalidQ):
        derive_parameters(1 / 300, q=4)


@pytest.mark.parametrize("eps", [0.0, -1e-3])
def test_nonpositive_epsilon(eps):
    with pytest.raises(ParameterError):
        derive_parameters(eps, q=5)


@pytest.mark.parametrize("n0,n1", [(-1, 5), (5, 0), (2.5, 5)])
def test_bad_levels(n0, n1):
    with pytest.raises(ParameterError):
        derive_parameters(1 / 300, q=5, n0=n0, n1=n1)


def test_epsilon_bound_formula():
    assert epsilon_bound(5) == pytest.approx(1 / 288)
    assert epsilon_bound(100) == pytest.approx(1 / 144)


@pytest.mark.parametrize("q", [4.5, 5.0, 8.0, 20.0])
def test_default_epsilon_is_largest_grid_point(q):
    eps = default_epsilon(q)
    derive_parameters(eps, q)
    with pytest.raises(EpsilonTooLarge):
        derive_parameters(round(eps + 1e-6, 6), q)


def test_default_epsilon_used_when_none():
    assert derive_parameters(None, 5).epsilon == pytest.approx(0.003472)


def test_override_boundary_pair_warns():
    p = override_parameters(1 / 3, 4 / 3, q=4.5)
    assert p.override
    assert "theta > 1 + gamma > 0 fails at boundary (4/3 = 4/3)" in p.warnings
    assert p.checks()["theta > 1 + gamma > 0"] is False
    assert p.checks()["8(2 alpha - beta) > 4 - delta > 0"] is None


def test_override_clean_pair():
    p = override_parameters(0.29, 1.30, q=5)
    assert p.warnings == ()
    assert p.admissible


def test_override_reports_q_violation():
    p = override_parameters(1 / 3, 4 / 3, q=4.0)
    assert any("q > 4" in w for w in p.warnings)


@pytest.mark.parametrize("g,t", [(-0.1, 1.0), (0.3, 0.0)])
def test_override_nonpositive(g, t):
    with pytest.raises(InvalidOverride):
        override_parameters(g, t, q=5)


def test_outer_rate_change_warns():
    p = derive_parameters(1 / 300, 5, outer_rate=1.7)
    assert any("outer geometric rate" in w for w in p.warnings)


def test_dict_round_trip():
    for p in (derive_parameters(1 / 300, 5, 3, 4), override_parameters(1 / 3, 4 / 3, 4.0)):
        assert ParamSet.from_dict(p.to_dict()) == p


def test_deterministic():
    assert derive_parameters(0.002, 6.0) == derive_parameters(0.002, 6.0)


@pytest.mark.parametrize("q", [4.5, 5.0, 8.0])
@pytest.mark.parametrize("frac", np.linspace(0.01, 0.99, 50))
def test_inequalities_hold_on_grid(q, frac):
    p = derive_parameters(frac * epsilon_bound(q), q)
    assert all(p.checks()[name] is True for name in INEQUALITIES)


@settings(max_examples=200, deadline=None)
@given(q=st.floats(4.01, 50.0), frac=st.floats(1e-4, 0.9999))
def test_any_admissible_epsilon_passes_all_checks(q, frac):
    eps = frac * epsilon_bound(q)
    p = derive_parameters(eps, q)
    assert p.admissible
    assert p.theta > 1 + p.gamma
    assert math.isclose(p.theta, 4 / 3 - 11.5 * eps)
