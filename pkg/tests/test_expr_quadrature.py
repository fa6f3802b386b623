import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from esgen.errors import ConfigError, NumericError
from esgen.expr import Expression, state_function
from esgen.quadrature import adaptive_simpson, five_point_derivative, richardson_limit


def test_expression_scalar_and_array():
    ex = Expression("2*(z - 1)^2 + sin(pi*z)", ("z",))
    assert ex(1.0) == pytest.approx(0.0, abs=1e-15)
    z = np.array([0.0, 0.5, 2.0])
    assert np.allclose(ex(z), 2 * (z - 1) ** 2 + np.sin(np.pi * z))


def test_expression_functions():
    ex = Expression("ln(exp(z)) + sqrt(abs(-4)) - cos(0)", ("z",))
    assert ex(3.0) == pytest.approx(4.0)


def test_expression_params():
    ex = Expression("mu * x", ("x",), {"mu": 2.5})
    assert ex(2.0) == 5.0


@pytest.mark.parametrize("bad", ["__import__('os')", "z.real", "foo(z)", "y + 1",
                                 "'a'", "z if z else 1", "sin(z, z)", "(z"])
def test_expression_rejects(bad):
    with pytest.raises(ConfigError):
        Expression(bad, ("z",))


def test_expression_domain_error_gives_nan():
    assert math.isnan(Expression("ln(z)", ("z",))(-1.0))


def test_state_function_one_dim_alias():
    f = state_function("2*(x - 1)^2", 1)
    assert f(np.array([0.0])) == 2.0
    g = state_function("x1^2 + x2", 2)
    assert g([2.0, 1.0]) == 5.0


def test_simpson_polynomial_exact():
    assert adaptive_simpson(lambda s: s**3 - s, 0.0, 2.0) == pytest.approx(2.0, abs=1e-14)


def test_simpson_reversed_limits():
    assert adaptive_simpson(math.exp, 1.0, 0.0) == pytest.approx(1 - math.e, abs=1e-10)


def test_simpson_near_singularity():
    # int_0.001^1 1/s^2 ds = 999
    assert adaptive_simpson(lambda s: 1 / s**2, 1e-3, 1.0) == pytest.approx(999.0, rel=1e-10)


def test_simpson_nonfinite():
    with pytest.raises(NumericError):
        adaptive_simpson(lambda s: math.inf if s == 0 else 1 / s, 0.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.1, 4))
def test_simpson_matches_closed_form(a, w, length):
    b = a + length
    got = adaptive_simpson(lambda s: math.cos(w * s), a, b)
    assert got == pytest.approx((math.sin(w * b) - math.sin(w * a)) / w, abs=1e-9)


def test_richardson_limit():
    # (sin h) / h -> 1
    assert richardson_limit(lambda h: math.sin(h) / h, 0.1) == pytest.approx(1.0, abs=1e-12)


def test_five_point_derivative():
    assert five_point_derivative(math.sin, 0.3) == pytest.approx(math.cos(0.3), abs=1e-10)
