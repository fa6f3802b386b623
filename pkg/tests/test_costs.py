import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from esgen.costs import (CostConstants, builtin_cost, check_a1, estimate_a2_constants,
                         expression_cost, fd_gradient, gradient_agreement, verification_grid,
                         verify_a2)
from esgen.errors import ConfigError, DomainError


def grid_oracle(shifted, grad, hess, radius, points, m1):
    """Constants from closed-form derivatives on a 1-D grid, independent of the package."""
    x = np.linspace(1 - radius, 1 + radius, points)
    d = np.abs(x - 1)
    x, d = x[d >= radius / 50], d[d >= radius / 50]
    z = shifted(x)
    g = z / d ** (2 * m1)
    k = grad(x) ** 2 / z ** (2 - 1 / m1)
    mu = np.abs(hess(x)) / z ** (1 - 1 / m1)
    return g.min(), g.max(), k.min(), k.max(), mu.max()


def test_j1_values():
    J1 = builtin_cost("J1")
    assert J1([1.0]) == 0.0
    assert J1([0.0]) == 2.0
    assert J1.grad([0.0])[0] == -4.0


def test_j2_values():
    J2 = builtin_cost("J2")
    assert J2([2.0]) == 2.0
    assert J2.grad([2.0])[0] == 8.0


def test_unknown_cost():
    with pytest.raises(ConfigError):
        builtin_cost("J3")


def test_quadratic_nd_center_broadcast():
    q = builtin_cost("quadratic_nd", [3, 0.5])
    assert q.dim == 3
    assert np.allclose(q.minimizer, [0.5, 0.5, 0.5])
    assert q([1.5, 0.5, 0.5]) == pytest.approx(1.0)


def test_minimizer_check():
    for name, params in [("J1", []), ("J2", []), ("quadratic_nd", [2, 0])]:
        builtin_cost(name, params).check_minimizer()
    bad = expression_cost("(x - 1)^2", 1, minimizer=[0.0])
    with pytest.raises(ConfigError):
        bad.check_minimizer()


def test_j1_constants_match_closed_form():
    c = estimate_a2_constants(builtin_cost("J1"), 1.0, 100)
    assert c.m1 == 1.0
    for got, want in [(c.gamma1, 2), (c.gamma2, 2), (c.kappa1, 8), (c.kappa2, 8), (c.mu, 4)]:
        assert got == pytest.approx(want, rel=1e-6)


def test_j2_constants_match_grid_oracle():
    c = estimate_a2_constants(builtin_cost("J2"), 1.0, 100)
    assert c.m1 == 2.0
    want = grid_oracle(lambda x: 2 * (x - 1) ** 4, lambda x: 8 * (x - 1) ** 3,
                       lambda x: 24 * (x - 1) ** 2, 1.0, 100, 2.0)
    got = (c.gamma1, c.gamma2, c.kappa1, c.kappa2, c.mu)
    assert got[:4] == pytest.approx(want[:4], rel=1e-6)
    # the Hessian is a second difference, the oracle is exact
    assert got[4] == pytest.approx(want[4], rel=1e-4)
    assert c.gamma1 == pytest.approx(2.0) and c.gamma2 == pytest.approx(2.0)
    assert c.kappa1 == pytest.approx(64.0 / 2**1.5, rel=1e-6)


def test_quadratic_nd_constants():
    c = estimate_a2_constants(builtin_cost("quadratic_nd", [2, 0]), 1.0, 21)
    assert c.m1 == 1.0
    for got, want in [(c.gamma1, 1), (c.gamma2, 1), (c.kappa1, 4), (c.kappa2, 4), (c.mu, 2)]:
        assert got == pytest.approx(want, rel=1e-6)


def test_verify_a2_closed_form_passes():
    J1 = builtin_cost("J1")
    c = CostConstants(2.0, 2.0, 8.0, 8.0, 4.0, 1.0)
    assert verify_a2(J1, c, 1.0, 100).passed


def test_verify_a2_inflated_kappa_fails():
    J1 = builtin_cost("J1")
    c = CostConstants(2.0, 2.0, 16.0, 16.0, 4.0, 1.0)
    rep = verify_a2(J1, c, 1.0, 100)
    assert not rep.passed
    assert {v["inequality"] for v in rep.violations} == {"kappa_lower"}


def test_verify_a2_quartic_with_quadratic_constants_fails():
    J2 = builtin_cost("J2")
    c = estimate_a2_constants(builtin_cost("J1"), 1.0, 100)
    assert not verify_a2(J2, c, 1.0, 100).passed


@pytest.mark.parametrize("name,params", [("J1", []), ("J2", []), ("quadratic_nd", [2, 0.3])])
def test_estimate_then_verify_roundtrip(name, params):
    cost = builtin_cost(name, params)
    c = estimate_a2_constants(cost, 1.5, 31)
    assert verify_a2(cost, c, 1.5, 31).passed


def test_degenerate_grid():
    with pytest.raises(DomainError):
        verification_grid([1.0], 0.0, 10)


def test_a1_holds_for_builtins():
    for name, params in [("J1", []), ("J2", []), ("quadratic_nd", [2, 0])]:
        assert check_a1(builtin_cost(name, params), 2.0, 21) == []


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_gradient_agrees_with_central_differences(x):
    for name, params in [("J1", []), ("J2", []), ("quadratic_nd", [2, 0.5])]:
        cost = builtin_cost(name, params)
        pts = [np.asarray(x[:cost.dim])]
        assert gradient_agreement(cost, pts) <= 1e-6


def test_expression_cost_gradient_is_finite_difference():
    c = expression_cost("(x1 - 1)^2 + 3*x2^2", 2, minimizer=[1.0, 0.0])
    assert np.allclose(c.grad([0.0, 1.0]), [-2.0, 6.0], atol=1e-8)
    assert np.allclose(fd_gradient(c.func, np.array([2.0, -1.0])), [2.0, -6.0], atol=1e-8)
