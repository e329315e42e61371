"""Limit integrals, matching points and the Laplace-method ratio checks.

``g(k)`` and ``g2(k)`` are evaluated by quadrature in logarithmic
variables with series corrections for the truncated ends; their closed
forms are kept out of this module on purpose so tests can use them as
independent oracles.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from ..errors import DegenerateMatching, InvalidScale
from ..mixtures import ComponentFamily, component_logpdf
from ..quadrature import QuadratureSpec, integrate, integrate_log_scaled

# log-variable truncation for g and g2; the dropped pieces are added back analytically
_S_CUT = 40.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _exponent(k: float) -> float:
    if not k > 0:
        raise ValueError(f"k must be positive, got {k!r}")
    return (k + 1.0) / k


def _tight(spec: QuadratureSpec | None) -> QuadratureSpec:
    spec = spec or QuadratureSpec()
    return spec.with_(rel_tol=min(spec.rel_tol, 1e-13), abs_tol=min(spec.abs_tol, 1e-16))


def _kink_seeds(a: float) -> list[float]:
    # the cutoff at s = 0 has width 1/a; geometric seeds keep every panel resolved
    out = [0.0]
    w = 1.0 / a
    while w < _S_CUT:
        out.extend((-w, w))
        w *= 2.0
    return out


def g_integral(k: float, spec: QuadratureSpec | None = None) -> float:
    """``int_0^inf dy / (1 + y**a)`` with ``a = (k+1)/k``.

    Substituting ``y = e^s`` gives a smooth integrand on ``[-40, 40]``.
    Below ``e^-40`` the integral is ``eps - eps**(a+1)/(a+1)``; above
    ``B = e^40`` the alternating series ``sum (-1)^n B^(1-a(n+1))/(a(n+1)-1)``
    converges fast.
    """
    a = _exponent(k)
    spec = _tight(spec)

    def f(s):
        return np.exp(s - np.logaddexp(0.0, a * s))

    body = integrate(f, -_S_CUT, _S_CUT, spec, seeds=_kink_seeds(a))
    eps = math.exp(-_S_CUT)
    left = eps - eps ** (a + 1.0) / (a + 1.0)
    right = 0.0
    for n in range(4):
        m = a * (n + 1) - 1.0
        right += (-1) ** n * math.exp(-_S_CUT * m) / m
    return body + left + right


def g2_integral(k: float, spec: QuadratureSpec | None = None) -> float:
    """``int_0^inf log(v)^2 / (1 + v**a) dv`` with ``a = (k+1)/k``.

    With ``v = e^u`` the log singularity at the origin becomes a plain
    ``u^2 e^u`` decay.  Both truncated tails are expanded to two terms of
    the geometric series of ``1/(1 + e^{au})``.
    """
    a = _exponent(k)
    spec = _tight(spec)

    def f(u):
        return u * u * np.exp(u - np.logaddexp(0.0, a * u))

    U = _S_CUT
    body = integrate(f, -U, U, spec, seeds=_kink_seeds(a))
    # int_U^inf u^2 e^{-c u} du
    def tail(c):
        return math.exp(-c * U) * (U * U / c + 2.0 * U / c ** 2 + 2.0 / c ** 3)

    left = tail(1.0) - tail(1.0 + a)
    right = tail(a - 1.0) - tail(2.0 * a - 1.0)
    return body + left + right


def g_prime_at_1(spec: QuadratureSpec | None = None, h: float = 1e-5) -> float:
    """``dg/dk`` at ``k = 1``: central differences, one Richardson step."""

    def central(step):
        return (g_integral(1.0 + step, spec) - g_integral(1.0 - step, spec)) / (2.0 * step)

    return (4.0 * central(h) - central(2.0 * h)) / 3.0


def matching_point(family, p_i: float, p_next: float, k: float, sigma: float, d: float) -> float:
    """Abscissa ``l`` in ``(0, d)`` where ``p_i rho(l; sigma) = p_next rho(d - l; k sigma)``.

    Gaussian: bracketed root of the log condition (monotone on ``(0, d)``).
    Laplace: closed form.  A root outside ``(0.05 d, 0.95 d)`` means the
    peak is not interior and raises ``DegenerateMatching``.
    """
    family = ComponentFamily.parse(family)
    if not (p_i > 0 and p_next > 0 and k > 0 and d > 0):
        raise ValueError("matching_point needs positive weights, k and d")
    if not sigma > 0:
        raise InvalidScale(f"sigma must be positive, got {sigma!r}")
    log_ratio = math.log(k * p_i / p_next)
    if family is ComponentFamily.LAPLACE:
        l = d / (k + 1.0) + k * sigma * log_ratio / (k + 1.0)
    else:
        def h(x):
            left = math.log(p_i) - 0.5 * (x / sigma) ** 2
            right = math.log(p_next / k) - 0.5 * ((d - x) / (k * sigma)) ** 2
            return left - right

        h0, hd = h(0.0), h(d)
        if h0 * hd > 0:
            raise DegenerateMatching(
                f"no matching point in (0, {d}) for weights ({p_i}, {p_next}) at sigma={sigma}"
            )
        l = brentq(h, 0.0, d, xtol=1e-15 * d, rtol=4 * np.finfo(float).eps, maxiter=200)
    if not 0.05 * d < l < 0.95 * d:
        raise DegenerateMatching(
            f"matching point {l:.6g} leaves (0.05d, 0.95d); weights ({p_i}, {p_next}) "
            f"are too asymmetric for sigma={sigma}"
        )
    return float(l)


def matching_point_expansion(p_i: float, p_next: float, k: float, sigma: float, d: float) -> float:
    """Small-sigma expansion of the Gaussian matching point (cross-check only)."""
    return d / (k + 1.0) + k * sigma ** 2 / d * math.log(k * p_i / p_next)


def delta2_integral(family, p_i, p_next, k, sigma, d, spec=None):
    """``int_0^d dx / (p_i rho(x; sigma) + p_next rho(d - x; k sigma))`` as a LogScaledValue."""
    family = ComponentFamily.parse(family)
    l = matching_point(family, p_i, p_next, k, sigma, d)
    lp_i, lp_n = math.log(p_i), math.log(p_next)

    def log_f(x):
        a = lp_i + component_logpdf(family, x, 0.0, sigma)
        b = lp_n + component_logpdf(family, x, d, k * sigma)
        return -np.logaddexp(a, b)

    width = sigma * sigma / max(l, 1e-300) if family is ComponentFamily.GAUSSIAN else sigma
    seeds = [l] + [l + s * width * m for s in (-1, 1) for m in (2.0, 8.0, 32.0)]
    return integrate_log_scaled(log_f, 0.0, d, spec, seeds)


def delta2_log_denominator(family, p_i, p_next, k, sigma, d) -> float:
    """Log of the Laplace-method normaliser of ``delta2_integral``."""
    family = ComponentFamily.parse(family)
    l = matching_point(family, p_i, p_next, k, sigma, d)
    if family is ComponentFamily.GAUSSIAN:
        return _LOG_SQRT_2PI + 3.0 * math.log(sigma) - math.log(p_i * l) + 0.5 * (l / sigma) ** 2
    return math.log(2.0 * sigma ** 2 / p_i) + l / sigma


def delta2_asymptotic_ratio(family, p_i, p_next, k, sigma, d, spec=None) -> float:
    """Ratio of ``delta2_integral`` to its normaliser; tends to ``g(k)`` as sigma -> 0."""
    val = delta2_integral(family, p_i, p_next, k, sigma, d, spec)
    return math.exp(val.log_magnitude - delta2_log_denominator(family, p_i, p_next, k, sigma, d))


def perturbation_lemma_check(k1: float, k2: float, t: float, spec: QuadratureSpec | None = None) -> float:
    """Difference ``D(t)`` between the perturbed and unperturbed integrals.

    The perturbed integrand grows like ``e^{u^2/2}`` relative to the plain
    one, so both are taken over the finite window ``[-t, k2^2 t / k1]``
    where the exponentials in ``t`` still dominate.  The difference is
    integrated directly, as ``(1/B) * (B/A - 1)``, to avoid cancellation.
    """
    if not t >= 5:
        raise ValueError("perturbation check needs t >= 5")
    if not (k1 > 0 and k2 > 0):
        raise ValueError("k1 and k2 must be positive")
    spec = _tight(spec)
    lo, hi = -t, k2 * k2 * t / k1

    def f(u):
        a1, a2 = -t * u, t * u / k1
        log_b = np.logaddexp(a1, a2)
        log_w, log_1mw = a1 - log_b, a2 - log_b
        q = -np.logaddexp(log_w - 0.5 * u * u, log_1mw - 0.5 * (u / k2) ** 2)
        big = q > 30.0
        small_part = np.exp(-log_b) * np.expm1(np.where(big, 0.0, q))
        big_part = np.exp(np.where(big, q, 0.0) - log_b) - np.exp(-log_b)
        return np.where(big, big_part, small_part)

    seeds = [0.0] + [s * m / t for s in (-1, 1) for m in (1.0, 4.0, 16.0)]
    return integrate(f, lo, hi, spec, seeds)


def perturbation_scaled(k1: float, k2: float, t: float, spec: QuadratureSpec | None = None) -> float:
    """``D(t) * 4 t^3 / (1 + 1/k2^2)``, which tends to ``g2(k1)``."""
    return perturbation_lemma_check(k1, k2, t, spec) * 4.0 * t ** 3 / (1.0 + 1.0 / k2 ** 2)
