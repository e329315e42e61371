import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swgeom.errors import NonConvergent
from swgeom.quadrature import (
    LogScaledValue,
    QuadratureSpec,
    integrate,
    integrate_log_scaled,
    integrate_signed_log_scaled,
    power_tail,
)


def test_linear():
    assert integrate(lambda x: x, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)


def test_gaussian_normalisation():
    f = lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    assert integrate(f, -12.0, 12.0) == pytest.approx(1.0, abs=1e-10)


def test_algebraic_tail():
    cut = 1e6
    body = integrate(lambda y: 1.0 / (1.0 + y * y), 0.0, cut, seeds=[1.0, 10.0, 100.0, 1e3, 1e4, 1e5])
    # 1/(1+y^2) = y^-2 - y^-4 + ...
    tail = power_tail(cut, 1.0, 2.0) - power_tail(cut, 1.0, 4.0)
    assert body + tail == pytest.approx(math.pi / 2, abs=1e-8)


def test_power_tail_rejects_divergent():
    with pytest.raises(ValueError):
        power_tail(1.0, 1.0, 1.0)


def test_spike_found_through_seeds():
    # a width-1e-4 spike is invisible to the first panels unless seeded at its scale
    w = 1e-4
    f = lambda x: np.exp(-0.5 * ((x - 0.37) / w) ** 2)
    val = integrate(f, 0.0, 1.0, seeds=[0.37 + s * m * w for s in (-1, 1) for m in (0, 2, 8, 32)])
    assert val == pytest.approx(w * math.sqrt(2 * math.pi), rel=1e-10)


def test_nonconvergence_carries_estimate():
    spec = QuadratureSpec(max_subdivisions=8)
    with pytest.raises(NonConvergent) as info:
        integrate(lambda x: np.sin(1.0 / x), 1e-6, 1.0, spec)
    assert info.value.estimate is not None and info.value.error > 0


def test_bad_bounds_and_spec():
    with pytest.raises(ValueError):
        integrate(lambda x: x, 1.0, 0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_subdivisions=4)


def test_deterministic():
    f = lambda x: np.exp(-x * x) * np.cos(3 * x)
    assert integrate(f, -5, 5, seeds=[0.0]) == integrate(f, -5, 5, seeds=[0.0])


polys = st.lists(st.floats(-3, 3), min_size=1, max_size=6)


@given(polys, polys, st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=50, deadline=None)
def test_linearity(c1, c2, alpha, beta):
    f, g = np.polynomial.Polynomial(c1), np.polynomial.Polynomial(c2)
    lhs = integrate(lambda x: alpha * f(x) + beta * g(x), -1.0, 2.0)
    rhs = alpha * integrate(f, -1.0, 2.0) + beta * integrate(g, -1.0, 2.0)
    scale = 1.0 + abs(alpha) * integrate(lambda x: np.abs(f(x)), -1, 2) + abs(beta) * integrate(
        lambda x: np.abs(g(x)), -1, 2)
    assert abs(lhs - rhs) <= 1e-10 * scale


@given(st.floats(-0.99, 2.99))
@settings(max_examples=50, deadline=None)
def test_interval_additivity(c):
    f = lambda x: np.exp(-((x - 1.0) ** 2) / 0.02) + 0.1 * x
    whole = integrate(f, -1.0, 3.0, seeds=[1.0])
    parts = integrate(f, -1.0, c, seeds=[1.0]) + integrate(f, c, 3.0, seeds=[1.0])
    assert abs(whole - parts) < 10 * 1e-10 * abs(whole)


# ------------------------------------------------------------ log scaled


def test_log_scaled_constant():
    v = integrate_log_scaled(lambda x: np.zeros_like(x), 0.0, 1.0)
    assert v.sign == 1 and v.log_magnitude == pytest.approx(0.0, abs=1e-14)


def test_log_scaled_gaussian():
    v = integrate_log_scaled(lambda x: -0.5 * x * x, -12.0, 12.0)
    assert v.log_magnitude == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)


def test_log_scaled_huge_peak():
    # exponent 312.5 plus a narrow peak, well past double range once squared
    sigma = 0.02
    log_f = lambda x: 312.5 + 500.0 - 0.5 * ((x - 0.5) / sigma) ** 2
    v = integrate_log_scaled(log_f, 0.0, 1.0, seeds=[0.5])
    assert math.isfinite(v.log_magnitude)
    expected = 812.5 + math.log(sigma * math.sqrt(2 * math.pi))
    assert v.log_magnitude == pytest.approx(expected, rel=1e-12)
    assert v.value == math.inf


@pytest.mark.parametrize("shape", [0.3, 1.0, 5.0])
def test_log_scaled_matches_plain(shape):
    log_f = lambda x: -shape * x * x + np.sin(x)
    plain = integrate(lambda x: np.exp(log_f(x)), -6.0, 6.0)
    v = integrate_log_scaled(log_f, -6.0, 6.0)
    assert v.value == pytest.approx(plain, rel=1e-9)


def test_signed_integral():
    v = integrate_signed_log_scaled(lambda x: np.zeros_like(x), lambda x: np.where(x < 0.3, -1.0, 1.0), 0.0, 1.0,
                                     seeds=[0.3])
    assert v.sign == 1 and v.value == pytest.approx(0.4, rel=1e-12)
    w = integrate_signed_log_scaled(lambda x: np.zeros_like(x), lambda x: np.where(x < 0.7, -1.0, 1.0), 0.0, 1.0,
                                     seeds=[0.7])
    assert w.sign == -1 and w.value == pytest.approx(-0.4, rel=1e-12)


def test_log_scaled_zero_integrand():
    v = integrate_log_scaled(lambda x: np.full_like(x, -np.inf), 0.0, 1.0)
    assert v.sign == 0 and v.value == 0.0


def test_log_scaled_value_arithmetic():
    a = LogScaledValue.from_float(-3.0)
    b = LogScaledValue.from_float(2.0)
    assert (a * b).value == pytest.approx(-6.0)
    assert (a / b).value == pytest.approx(-1.5)
    assert (a * 0.0).sign == 0
    with pytest.raises(ZeroDivisionError):
        a / LogScaledValue.from_float(0.0)
    with pytest.raises(ValueError):
        LogScaledValue(0.0, 2)
    assert LogScaledValue(800.0).value == math.inf
