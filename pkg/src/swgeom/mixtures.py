"""One-dimensional mixture models and the two weight coordinate systems.

Weights live on the open probability simplex (``SimplexPoint``).  The
metric formulas are written in cumulative-complement coordinates
``theta_i = p_{i+1} + ... + p_N`` (``ThetaCoords``), so that the mixture
density reads ``rho_1 + sum_i theta_i (rho_{i+1} - rho_i)``.

All densities are evaluated in the log domain first; the plain versions
are ``exp`` of those.  This keeps the ratios that appear in the
information-matrix integrands finite far out in the tails.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, logsumexp

from .errors import InvalidCoordinates, InvalidModel, InvalidScale

#: smallest admissible simplex mass
MASS_FLOOR = 1e-15
_SUM_TOL = 1e-12
_LOG_HALF = math.log(0.5)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ComponentFamily(enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"

    @classmethod
    def parse(cls, value) -> "ComponentFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidModel(f"unknown component family {value!r}") from None


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """Interior point of the probability simplex."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).ravel()
        if p.size < 2:
            raise InvalidCoordinates("a simplex point needs at least two masses")
        if not np.all(np.isfinite(p)):
            raise InvalidCoordinates("simplex masses must be finite")
        if np.any(p < MASS_FLOOR):
            raise InvalidCoordinates(
                f"simplex masses must exceed {MASS_FLOOR:g}; got min {p.min():.3g}"
            )
        if abs(p.sum() - 1.0) > _SUM_TOL:
            raise InvalidCoordinates(f"simplex masses sum to {float(p.sum())!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.size

    @classmethod
    def uniform(cls, n: int) -> "SimplexPoint":
        return cls(np.full(n, 1.0 / n))

    def reversed(self) -> "SimplexPoint":
        return SimplexPoint(self.p[::-1])

    def __eq__(self, other):
        return isinstance(other, SimplexPoint) and np.array_equal(self.p, other.p)

    def __repr__(self):
        return f"SimplexPoint({self.p.tolist()})"


@dataclass(frozen=True, eq=False)
class ThetaCoords:
    """Strictly decreasing coordinates ``1 > theta_1 > ... > theta_{N-1} > 0``."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.array(self.theta, dtype=float).ravel()
        if th.size < 1:
            raise InvalidCoordinates("theta needs at least one entry")
        padded = np.concatenate(([1.0], th, [0.0]))
        if not np.all(np.isfinite(th)) or np.any(np.diff(padded) >= 0.0):
            raise InvalidCoordinates(
                f"theta must satisfy 1 > theta_1 > ... > theta_(N-1) > 0; got {th.tolist()}"
            )
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @property
    def n(self) -> int:
        """Number of mixture components (one more than the coordinates)."""
        return self.theta.size + 1

    def __eq__(self, other):
        return isinstance(other, ThetaCoords) and np.array_equal(self.theta, other.theta)

    def __repr__(self):
        return f"ThetaCoords({self.theta.tolist()})"


def simplex_from_theta(theta) -> SimplexPoint:
    """``p_i = theta_{i-1} - theta_i`` with ``theta_0 = 1`` and ``theta_N = 0``."""
    if not isinstance(theta, ThetaCoords):
        theta = ThetaCoords(theta)
    padded = np.concatenate(([1.0], theta.theta, [0.0]))
    return SimplexPoint(padded[:-1] - padded[1:])


def theta_from_simplex(p) -> ThetaCoords:
    if not isinstance(p, SimplexPoint):
        p = SimplexPoint(p)
    # tail sums instead of 1 - cumsum: no cancellation for small theta
    tails = np.cumsum(p.p[::-1])[::-1]
    return ThetaCoords(tails[1:])


def _check_scale(sigma):
    s = np.asarray(sigma, dtype=float)
    if np.any(~(s > 0.0)):
        raise InvalidScale(f"component scale must be positive, got {sigma!r}")


def component_logpdf(family, x, mu, sigma):
    family = ComponentFamily.parse(family)
    _check_scale(sigma)
    z = (np.asarray(x, dtype=float) - mu) / sigma
    if family is ComponentFamily.GAUSSIAN:
        return -0.5 * z * z - _LOG_SQRT_2PI - np.log(sigma)
    return -np.abs(z) - np.log(2.0 * sigma)


def component_pdf(family, x, mu, sigma):
    return np.exp(component_logpdf(family, x, mu, sigma))


def _laplace_logcdf(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    left = z < 0.0
    out[left] = _LOG_HALF + z[left]
    out[~left] = np.log1p(-0.5 * np.exp(-z[~left]))
    return out


def component_logcdf(family, x, mu, sigma):
    family = ComponentFamily.parse(family)
    _check_scale(sigma)
    z = (np.asarray(x, dtype=float) - mu) / sigma
    if family is ComponentFamily.GAUSSIAN:
        return log_ndtr(z)
    return _laplace_logcdf(z)


def component_logsf(family, x, mu, sigma):
    """Log of the survival function ``1 - F``, accurate in the right tail."""
    family = ComponentFamily.parse(family)
    _check_scale(sigma)
    z = (np.asarray(x, dtype=float) - mu) / sigma
    if family is ComponentFamily.GAUSSIAN:
        return log_ndtr(-z)
    return _laplace_logcdf(-z)


def component_cdf(family, x, mu, sigma):
    return np.exp(component_logcdf(family, x, mu, sigma))


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Mixture ``sum_i p_i rho(x; mu_i, sigma_i)`` with ordered means."""

    family: ComponentFamily
    means: np.ndarray
    scales: np.ndarray
    weights: SimplexPoint

    def __post_init__(self):
        family = ComponentFamily.parse(self.family)
        means = np.array(self.means, dtype=float).ravel()
        scales = np.array(self.scales, dtype=float).ravel()
        weights = self.weights
        if not isinstance(weights, SimplexPoint):
            try:
                weights = SimplexPoint(weights)
            except InvalidCoordinates as exc:
                raise InvalidModel(str(exc)) from exc
        if scales.size == 1 and means.size > 1:
            scales = np.full(means.size, scales[0])
        if not (means.size == scales.size == weights.n):
            raise InvalidModel(
                f"size mismatch: {means.size} means, {scales.size} scales, {weights.n} weights"
            )
        if not np.all(np.isfinite(means)) or np.any(np.diff(means) <= 0.0):
            raise InvalidModel("means must be finite and strictly increasing")
        if np.any(~(scales > 0.0)) or not np.all(np.isfinite(scales)):
            raise InvalidModel("scales must be finite and positive")
        means.setflags(write=False)
        scales.setflags(write=False)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def homogeneous(cls, p, sigma, gap=1.0, start=0.0, family=ComponentFamily.GAUSSIAN):
        """Equal scales and equally spaced means ``start, start+gap, ...``."""
        p = p if isinstance(p, SimplexPoint) else SimplexPoint(p)
        means = start + gap * np.arange(p.n)
        return cls(family, means, np.full(p.n, float(sigma)), p)

    @property
    def n(self) -> int:
        return self.means.size

    @property
    def p(self) -> np.ndarray:
        return self.weights.p

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.means)

    def reflected(self) -> "MixtureModel":
        """Mirror image ``x -> -x``; node order is reversed."""
        return MixtureModel(self.family, -self.means[::-1], self.scales[::-1], self.weights.reversed())

    def support(self, radius: float = 12.0) -> tuple[float, float]:
        smax = float(self.scales.max())
        return float(self.means[0] - radius * smax), float(self.means[-1] + radius * smax)

    # component-wise evaluation, shape (N, len(x))
    def component_logpdfs(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([component_logpdf(self.family, x, m, s) for m, s in zip(self.means, self.scales)])

    def component_logcdfs(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([component_logcdf(self.family, x, m, s) for m, s in zip(self.means, self.scales)])

    def component_logsfs(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([component_logsf(self.family, x, m, s) for m, s in zip(self.means, self.scales)])

    def logpdf(self, x):
        lw = np.log(self.p)[:, None]
        return logsumexp(lw + self.component_logpdfs(x), axis=0)

    def logcdf(self, x):
        lw = np.log(self.p)[:, None]
        return logsumexp(lw + self.component_logcdfs(x), axis=0)

    def logsf(self, x):
        lw = np.log(self.p)[:, None]
        return logsumexp(lw + self.component_logsfs(x), axis=0)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "weights": self.p.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureModel":
        expected = {"family", "means", "scales", "weights"}
        if not isinstance(data, dict) or set(data) != expected:
            got = sorted(data) if isinstance(data, dict) else type(data).__name__
            raise InvalidModel(f"model JSON needs exactly the keys {sorted(expected)}; got {got}")
        return cls(data["family"], data["means"], data["scales"], data["weights"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MixtureModel":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidModel(f"model is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def _scalar_or_array(values, x):
    return float(values[0]) if np.ndim(x) == 0 else values


def mixture_pdf(model: MixtureModel, x):
    return _scalar_or_array(np.exp(model.logpdf(x)), x)


def mixture_cdf(model: MixtureModel, x):
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    lo = model.logcdf(x_arr)
    hi = -np.expm1(model.logsf(x_arr))
    # pick whichever representation is not cancelling
    out = np.where(lo < _LOG_HALF, np.exp(lo), hi)
    return _scalar_or_array(out, x)
