"""Closed-form scaling limits of the Fisher and Wasserstein matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidModel, MatchingViolation
from ..mixtures import ComponentFamily, MixtureModel, SimplexPoint
from ..quadrature import QuadratureSpec
from .asymptotics import g_integral, g_prime_at_1
from .matrices import ExtendedMetric, MetricMatrix, Provenance, Variant, scaling_factor

_MATCH_TOL = 1e-12
_EQUAL_GAP_TOL = 1e-9


def _simplex(p) -> SimplexPoint:
    return p if isinstance(p, SimplexPoint) else SimplexPoint(p)


def fisher_limit(p) -> MetricMatrix:
    """Tridiagonal limit: ``1/p_i + 1/p_{i+1}`` on the diagonal, ``-1/p_{i+1}`` beside it."""
    p = _simplex(p).p
    inv = 1.0 / p
    m = np.diag(inv[:-1] + inv[1:])
    off = -inv[1:-1]
    m += np.diag(off, 1) + np.diag(off, -1)
    return MetricMatrix(m, Provenance.FISHER_LIMIT)


def wasserstein_limit(p) -> MetricMatrix:
    """``diag(1 / sqrt(p_i p_{i+1}))``: the Wasserstein matrix divided by ``K``."""
    p = _simplex(p).p
    return MetricMatrix(np.diag(1.0 / np.sqrt(p[:-1] * p[1:])), Provenance.WASSERSTEIN_LIMIT)


def second_order_coefficient(p_i: float, p_next: float, g1prime: float, rederived: bool = False) -> float:
    """Coefficient ``c`` of ``sigma^2 / d^2`` in the diagonal correction.

    The default is the stated expansion
    ``pi^2/2 + (4/pi) L g'(1) + (2/pi) L^2`` with ``L = log(p_i / p_next)``.
    ``rederived=True`` gives ``pi^2/2 + L^2/2``, which is even in ``L`` as
    reflection symmetry requires and agrees with high-precision quadrature
    for unequal weights.
    """
    L = math.log(p_i / p_next)
    if rederived:
        return math.pi ** 2 / 2.0 + 0.5 * L * L
    return math.pi ** 2 / 2.0 + (4.0 / math.pi) * L * g1prime + (2.0 / math.pi) * L * L


def second_order_limit(p, sigma: float, d: float, spec: QuadratureSpec | None = None,
                       rederived: bool = False) -> MetricMatrix:
    """Wasserstein limit with the ``O(sigma^2)`` diagonal correction."""
    p = _simplex(p).p
    if not (sigma > 0 and d > 0 and sigma / d < 0.5):
        raise ValueError("second-order expansion needs 0 < sigma/d < 0.5")
    g1 = g_prime_at_1(spec)
    r = (sigma / d) ** 2
    diag = [
        (1.0 + second_order_coefficient(p[i], p[i + 1], g1, rederived) * r) / math.sqrt(p[i] * p[i + 1])
        for i in range(p.size - 1)
    ]
    return MetricMatrix(np.diag(diag), Provenance.SECOND_ORDER_LIMIT)


@dataclass(frozen=True, eq=False)
class InhomogeneousSpec:
    """Gaps ``d_i`` and relative scales ``s_i`` (component scale ``s_i * sigma``)."""

    gaps: np.ndarray
    scale_factors: np.ndarray
    sigma: float
    reduced_gap: float

    def __post_init__(self):
        gaps = np.array(self.gaps, dtype=float).ravel()
        s = np.array(self.scale_factors, dtype=float).ravel()
        if s.size < 2 or gaps.size != s.size - 1:
            raise InvalidModel(f"need N-1 gaps for N scale factors; got {gaps.size} and {s.size}")
        if np.any(gaps <= 0) or np.any(s <= 0) or not self.sigma > 0 or not self.reduced_gap > 0:
            raise InvalidModel("gaps, scale factors, sigma and the reduced gap must be positive")
        reduced = gaps / (s[:-1] + s[1:])
        bad = np.nonzero(np.abs(reduced - self.reduced_gap) > _MATCH_TOL * self.reduced_gap)[0]
        if bad.size:
            i = int(bad[0])
            raise MatchingViolation(
                f"gap {i + 1}: d_i/(s_i+s_(i+1)) = {reduced[i]!r} differs from the reduced gap "
                f"{self.reduced_gap!r}",
                gap_index=i + 1,
            )
        gaps.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "scale_factors", s)

    @classmethod
    def from_model(cls, model: MixtureModel, sigma: float | None = None) -> "InhomogeneousSpec":
        """Read gaps and relative scales off a model; ``sigma`` defaults to the first scale."""
        sigma = float(model.scales[0]) if sigma is None else float(sigma)
        s = model.scales / sigma
        gaps = model.gaps
        return cls(gaps, s, sigma, float(gaps[0] / (s[0] + s[1])))

    def scaling(self):
        return scaling_factor(ComponentFamily.GAUSSIAN, self.sigma, self.reduced_gap, Variant.INHOMOGENEOUS)


def inhomogeneous_limit(p, ispec: InhomogeneousSpec, spec: QuadratureSpec | None = None) -> MetricMatrix:
    """Diagonal limit of the Wasserstein matrix divided by ``K_in``.

    Entry ``i``: ``g(s_{i+1}/s_i) (s_{i+1}/p_{i+1})^w (s_i/p_i)^{1-w} s_i``
    with ``w = s_{i+1} / (s_i + s_{i+1})``.
    """
    p = _simplex(p).p
    s = ispec.scale_factors
    if p.size != s.size:
        raise InvalidModel(f"{p.size} weights but {s.size} scale factors")
    diag = []
    for i in range(p.size - 1):
        w = s[i + 1] / (s[i] + s[i + 1])
        diag.append(
            g_integral(s[i + 1] / s[i], spec)
            * (s[i + 1] / p[i + 1]) ** w
            * (s[i] / p[i]) ** (1.0 - w)
            * s[i]
        )
    return MetricMatrix(np.diag(diag), Provenance.INHOMOGENEOUS_LIMIT)


def extended_limit(p, means, sigma: float, family=ComponentFamily.GAUSSIAN) -> ExtendedMetric:
    """Limit block metric over ``(theta, mu)`` for equally spaced means.

    ``block_thth = K diag(1/sqrt(p_i p_{i+1}))``, ``block_mumu = diag(p)`` and
    row ``i`` of ``block_thmu`` holds ``(mu_{i+1} - mu_i)/2`` in columns
    ``i`` and ``i+1``.
    """
    p = _simplex(p).p
    mu = np.asarray(means, dtype=float).ravel()
    if mu.size != p.size or np.any(np.diff(mu) <= 0):
        raise InvalidModel("extended limit needs one strictly increasing mean per weight")
    gaps = np.diff(mu)
    d = float(gaps.mean())
    if np.any(np.abs(gaps - d) > _EQUAL_GAP_TOL * d):
        raise InvalidModel("extended limit assumes equally spaced means")
    K = scaling_factor(family, sigma, d)
    n = p.size
    thmu = np.zeros((n - 1, n))
    for i in range(n - 1):
        thmu[i, i] = thmu[i, i + 1] = 0.5 * gaps[i]
    return ExtendedMetric(np.diag(1.0 / np.sqrt(p[:-1] * p[1:])), thmu, np.diag(p), K, limit=True)
