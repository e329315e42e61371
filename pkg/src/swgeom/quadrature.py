"""Adaptive Gauss-Kronrod quadrature for sharply peaked 1D integrands.

The information-matrix integrands concentrate in windows of width
``O(sigma^2 / d)`` around a few known abscissae (component means and the
matching points between neighbours).  A generic adaptive rule started on
the whole interval samples too coarsely to ever see such a spike, so every
integral here starts from mandatory breakpoints supplied by the caller.

Integrands must be vectorised: they receive a 1D float array and return
an array of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NonConvergent

# 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980290980,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# full symmetric node/weight vectors on [-1, 1]
NODES = np.concatenate((-_XGK[:-1], _XGK[::-1]))
KRONROD_WEIGHTS = np.concatenate((_WGK[:-1], _WGK[::-1]))
_gauss_full = np.zeros(21)
_gauss_full[1:10:2] = _WG
_gauss_full[11:20:2] = _WG[::-1]
GAUSS_WEIGHTS = _gauss_full

_EPS = np.finfo(float).eps
_MAX_SPLITS_PER_ROUND = 64


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 2000
    #: infinite domains are cut this many (largest) component scales past the extreme means
    truncation_radius: float = 12.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 8:
            raise ValueError("max_subdivisions must be at least 8")
        if not self.truncation_radius > 0:
            raise ValueError("truncation_radius must be positive")

    def with_(self, **changes) -> "QuadratureSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class LogScaledValue:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")

    @classmethod
    def from_float(cls, value: float) -> "LogScaledValue":
        if value == 0.0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(value)), 1 if value > 0 else -1)

    @property
    def value(self) -> float:
        """Plain float; ``inf`` when the magnitude is not representable."""
        if self.sign == 0:
            return 0.0
        if self.log_magnitude > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_magnitude)

    def __float__(self):
        return self.value

    def __mul__(self, other):
        if isinstance(other, LogScaledValue):
            if self.sign == 0 or other.sign == 0:
                return LogScaledValue(-math.inf, 0)
            return LogScaledValue(self.log_magnitude + other.log_magnitude, self.sign * other.sign)
        return self * LogScaledValue.from_float(float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, LogScaledValue):
            other = LogScaledValue.from_float(float(other))
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogScaledValue")
        if self.sign == 0:
            return LogScaledValue(-math.inf, 0)
        return LogScaledValue(self.log_magnitude - other.log_magnitude, self.sign * other.sign)

    def to_dict(self) -> dict:
        return {"log_magnitude": self.log_magnitude, "sign": self.sign}


def _rule(f, lefts, rights):
    """Apply GK21 to every panel at once.

    Returns the Kronrod estimates, their error estimates and ``int |f|``
    per panel (the latter bounds attainable accuracy).
    """
    centers = 0.5 * (lefts + rights)
    halves = 0.5 * (rights - lefts)
    x = centers[:, None] + halves[:, None] * NODES[None, :]
    y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise NonConvergent(f"integrand is not finite at x={bad!r}")
    kron = halves * (y @ KRONROD_WEIGHTS)
    gauss = halves * (y @ GAUSS_WEIGHTS)
    mean = kron / np.where(halves > 0, 2.0 * halves, 1.0)
    resasc = halves * (np.abs(y - mean[:, None]) @ KRONROD_WEIGHTS)
    resabs = halves * (np.abs(y) @ KRONROD_WEIGHTS)
    err = np.abs(kron - gauss)
    # QUADPACK's error scaling
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where(resasc > 0, scaled, err)
    return kron, err, resabs


def _breakpoints(a, b, seeds):
    pts = [a, b]
    if seeds is not None:
        pts.extend(float(s) for s in np.ravel(seeds) if a < s < b)
    return np.unique(np.asarray(pts, dtype=float))


def integrate(f, a, b, spec: QuadratureSpec | None = None, seeds=None) -> float:
    """Integrate ``f`` over ``[a, b]`` to ``max(abs_tol, rel_tol*|I|)``.

    ``seeds`` are abscissae that become initial panel boundaries.  Panels
    are bisected in order of decreasing error estimate until the summed
    estimate meets the tolerance.  Raises ``NonConvergent`` (carrying the
    best estimate and its error bound) when ``max_subdivisions`` panels
    are not enough.
    """
    spec = spec or QuadratureSpec()
    a, b = float(a), float(b)
    if not a < b:
        raise ValueError(f"integration bounds must satisfy a < b, got [{a}, {b}]")
    pts = _breakpoints(a, b, seeds)
    lefts, rights = pts[:-1], pts[1:]
    ests, errs, absvals = _rule(f, lefts, rights)
    while True:
        total = math.fsum(ests)
        err_total = math.fsum(errs)
        # below 50 ulp of int |f| further bisection only chases rounding noise
        tol = max(spec.abs_tol, spec.rel_tol * abs(total), 50.0 * _EPS * math.fsum(absvals))
        if err_total <= tol:
            return total
        if lefts.size >= spec.max_subdivisions:
            raise NonConvergent(
                f"quadrature did not converge on [{a}, {b}] with "
                f"{spec.max_subdivisions} panels (estimate {total!r}, error {err_total:.3g})",
                estimate=total,
                error=err_total,
            )
        # worst panels first; ties broken by position for determinism
        order = np.lexsort((lefts, -errs))
        budget = err_total - 0.5 * tol
        cum = np.cumsum(errs[order])
        count = int(np.searchsorted(cum, budget) + 1)
        count = max(1, min(count, _MAX_SPLITS_PER_ROUND, spec.max_subdivisions - lefts.size))
        split = order[:count]
        keep = np.ones(lefts.size, dtype=bool)
        keep[split] = False
        mids = 0.5 * (lefts[split] + rights[split])
        new_l = np.concatenate((lefts[split], mids))
        new_r = np.concatenate((mids, rights[split]))
        new_e, new_err, new_abs = _rule(f, new_l, new_r)
        lefts = np.concatenate((lefts[keep], new_l))
        rights = np.concatenate((rights[keep], new_r))
        ests = np.concatenate((ests[keep], new_e))
        errs = np.concatenate((errs[keep], new_err))
        absvals = np.concatenate((absvals[keep], new_abs))
        # keep panels sorted so fsum sees a reproducible order
        idx = np.argsort(lefts, kind="stable")
        lefts, rights, ests, errs, absvals = lefts[idx], rights[idx], ests[idx], errs[idx], absvals[idx]


def power_tail(cutoff: float, coefficient: float, exponent: float) -> float:
    """``int_cutoff^inf c * y**(-exponent) dy`` for an algebraically decaying tail."""
    if exponent <= 1.0:
        raise ValueError("tail exponent must exceed 1 for convergence")
    return coefficient * cutoff ** (1.0 - exponent) / (exponent - 1.0)


def _probe_max(log_f, a, b, seeds, n=2049):
    xs = np.linspace(a, b, n)
    if seeds is not None:
        extra = np.array([s for s in np.ravel(seeds) if a <= s <= b], dtype=float)
        xs = np.unique(np.concatenate((xs, extra)))
    vals = np.asarray(log_f(xs), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    best = float(np.max(vals))
    j = int(np.argmax(vals))
    lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, xs.size - 1)]
    for _ in range(4):
        if hi <= lo:
            break
        fine = np.linspace(lo, hi, 65)
        fv = np.asarray(log_f(fine), dtype=float)
        fv = np.where(np.isnan(fv), -np.inf, fv)
        k = int(np.argmax(fv))
        if fv[k] > best:
            best = float(fv[k])
        lo, hi = fine[max(k - 1, 0)], fine[min(k + 1, fine.size - 1)]
    return best


def integrate_log_scaled(log_f, a, b, spec: QuadratureSpec | None = None, seeds=None) -> LogScaledValue:
    """``log int_a^b exp(log_f(x)) dx`` without forming ``exp(log_f)`` directly.

    The integrand is shifted by its (probed) maximum so the quadrature
    sees values of order one.  If the probe underestimated the maximum
    badly enough to risk overflow, the shift is raised and the integral
    redone.
    """
    return integrate_signed_log_scaled(log_f, None, a, b, spec, seeds)


def integrate_signed_log_scaled(log_abs_f, sign_f, a, b, spec: QuadratureSpec | None = None,
                                seeds=None) -> LogScaledValue:
    """Like ``integrate_log_scaled`` for an integrand ``sign_f(x) * exp(log_abs_f(x))``.

    ``sign_f=None`` means the integrand is positive.  The result carries the
    sign of the integral; an exactly cancelling integral gives sign 0.
    """
    spec = spec or QuadratureSpec()
    shift = _probe_max(log_abs_f, float(a), float(b), seeds)
    if not math.isfinite(shift):
        if shift == -math.inf:
            return LogScaledValue(-math.inf, 0)
        raise NonConvergent("log-integrand is +inf on the probe grid")
    for _ in range(4):
        seen = [-math.inf]

        def scaled(x, _shift=shift):
            g = np.asarray(log_abs_f(x), dtype=float) - _shift
            seen[0] = max(seen[0], float(np.max(g)))
            out = np.exp(np.minimum(g, 700.0))
            if sign_f is not None:
                out = out * np.asarray(sign_f(x), dtype=float)
            return out

        value = integrate(scaled, a, b, spec, seeds)
        if seen[0] <= 600.0:
            break
        shift += seen[0]
    if value == 0.0 or (sign_f is None and value < 0.0):
        return LogScaledValue(-math.inf, 0)
    return LogScaledValue(shift + math.log(abs(value)), 1 if value > 0 else -1)
