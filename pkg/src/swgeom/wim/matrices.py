"""Metric containers and the scaling factors that normalise them."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidScale
from ..mixtures import ComponentFamily
from ..quadrature import LogScaledValue

#: tail constant bounding Gaussian CDF tails by the density, sqrt(2 pi e) / 2
M_TAIL = math.sqrt(2.0 * math.pi * math.e) / 2.0

_SYM_TOL = 1e-9
_PSD_TOL = 1e-8


class Provenance(enum.Enum):
    NUMERIC_FISHER = "NumericFisher"
    NUMERIC_WASSERSTEIN = "NumericWasserstein"
    FISHER_LIMIT = "FisherLimit"
    WASSERSTEIN_LIMIT = "WassersteinLimit"
    SECOND_ORDER_LIMIT = "SecondOrderLimit"
    INHOMOGENEOUS_LIMIT = "InhomogeneousLimit"

    @property
    def is_numeric(self) -> bool:
        return self in (Provenance.NUMERIC_FISHER, Provenance.NUMERIC_WASSERSTEIN)


class Variant(enum.Enum):
    HOMOGENEOUS = "homogeneous"
    INHOMOGENEOUS = "inhomogeneous"


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """Information matrix in theta coordinates.

    The true matrix is ``entries * exp(log_scale)``.  Numeric Wasserstein
    matrices also keep per-entry ``log_abs``/``signs`` so entries that
    underflow after scaling (the off-diagonal ones) are not lost.
    """

    entries: np.ndarray
    provenance: Provenance
    log_scale: float | None = None
    log_abs: np.ndarray | None = field(default=None, repr=False)
    signs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"metric entries must be a square matrix, got shape {e.shape}")
        prov = Provenance(self.provenance)
        scale = np.max(np.abs(e)) if e.size else 0.0
        if np.max(np.abs(e - e.T), initial=0.0) > _SYM_TOL * max(scale, 1e-300):
            raise ValueError("metric entries are not symmetric")
        if prov.is_numeric and e.size:
            low = float(np.linalg.eigvalsh(0.5 * (e + e.T))[0])
            if low < -_PSD_TOL * float(np.trace(e)):
                raise ValueError(f"numeric metric is not positive semidefinite (eigenvalue {low:.3g})")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "provenance", prov)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def dense(self) -> np.ndarray:
        """Plain matrix; may contain ``inf`` when ``log_scale`` is huge."""
        if self.log_scale is None:
            return np.array(self.entries)
        if self.log_scale > 709.78:
            with np.errstate(invalid="ignore"):
                return np.where(self.entries == 0.0, 0.0, np.sign(self.entries) * math.inf)
        return self.entries * math.exp(self.log_scale)

    def log_entry(self, i: int, j: int) -> LogScaledValue:
        if self.log_abs is not None:
            return LogScaledValue(float(self.log_abs[i, j]), int(self.signs[i, j]))
        v = LogScaledValue.from_float(float(self.entries[i, j]))
        if self.log_scale is not None and v.sign != 0:
            v = LogScaledValue(v.log_magnitude + self.log_scale, v.sign)
        return v

    def divided_by(self, k: LogScaledValue) -> np.ndarray:
        """``G / K`` formed from log magnitudes."""
        out = np.zeros_like(self.entries)
        for i in range(self.n):
            for j in range(self.n):
                v = self.log_entry(i, j)
                if v.sign:
                    out[i, j] = v.sign * math.exp(v.log_magnitude - k.log_magnitude)
        return out

    def to_dict(self) -> dict:
        out = {"provenance": self.provenance.value, "n": self.n, "entries": self.entries.tolist()}
        if self.log_scale is not None:
            out["log_scale"] = self.log_scale
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricMatrix":
        allowed = {"provenance", "n", "entries", "log_scale"}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown metric keys {sorted(extra)}")
        m = cls(np.array(data["entries"], dtype=float), Provenance(data["provenance"]), data.get("log_scale"))
        if int(data["n"]) != m.n:
            raise ValueError(f"metric declares n={data['n']} but has {m.n} rows")
        return m

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def scaling_factor(family, sigma: float, d: float, variant=Variant.HOMOGENEOUS) -> LogScaledValue:
    """Divergence rate ``K`` of the diagonal Wasserstein entries, log domain.

    Gaussian homogeneous: ``sqrt(2 pi^3) sigma^3 / d * exp(d^2 / 8 sigma^2)``.
    Laplace: ``pi sigma^2 exp(d / 2 sigma)``.
    Gaussian inhomogeneous (``d`` the reduced gap): ``sqrt(2 pi) sigma^3 / d * exp(d^2 / 2 sigma^2)``.
    """
    family = ComponentFamily.parse(family)
    variant = Variant(variant)
    if not sigma > 0:
        raise InvalidScale(f"sigma must be positive, got {sigma!r}")
    if not d > 0:
        raise ValueError(f"gap must be positive, got {d!r}")
    if family is ComponentFamily.LAPLACE:
        if variant is not Variant.HOMOGENEOUS:
            raise ValueError("no inhomogeneous scaling factor is defined for Laplace mixtures")
        return LogScaledValue(math.log(math.pi) + 2.0 * math.log(sigma) + d / (2.0 * sigma))
    if variant is Variant.HOMOGENEOUS:
        log_k = 0.5 * math.log(2.0 * math.pi ** 3) + 3.0 * math.log(sigma) - math.log(d) + d * d / (8.0 * sigma * sigma)
    else:
        log_k = 0.5 * math.log(2.0 * math.pi) + 3.0 * math.log(sigma) - math.log(d) + d * d / (2.0 * sigma * sigma)
    return LogScaledValue(log_k)


@dataclass(frozen=True)
class ScalingConstants:
    K: LogScaledValue
    d: float
    sigma: float

    @classmethod
    def for_family(cls, family, sigma, d, variant=Variant.HOMOGENEOUS) -> "ScalingConstants":
        return cls(scaling_factor(family, sigma, d, variant), float(d), float(sigma))


@dataclass(frozen=True, eq=False)
class ExtendedMetric:
    """Block metric over ``(theta, mu)``.

    ``theta_block_scaled`` holds ``block_thth / K``; the unscaled block
    overflows for small sigma and is only formed on request.
    """

    theta_block_scaled: np.ndarray
    block_thmu: np.ndarray
    block_mumu: np.ndarray
    K: LogScaledValue
    #: closed-form limit rather than quadrature; its rescaled form is exactly block-diagonal
    limit: bool = False

    def __post_init__(self):
        th = np.array(self.theta_block_scaled, dtype=float)
        tm = np.array(self.block_thmu, dtype=float)
        mm = np.array(self.block_mumu, dtype=float)
        n = mm.shape[0]
        if th.shape != (n - 1, n - 1) or tm.shape != (n - 1, n) or mm.shape != (n, n):
            raise ValueError("inconsistent extended metric block shapes")
        for a in (th, tm, mm):
            a.setflags(write=False)
        object.__setattr__(self, "theta_block_scaled", th)
        object.__setattr__(self, "block_thmu", tm)
        object.__setattr__(self, "block_mumu", mm)

    @property
    def block_thth(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.theta_block_scaled * self.K.value

    def full(self) -> np.ndarray:
        n = self.block_mumu.shape[0]
        out = np.zeros((2 * n - 1, 2 * n - 1))
        out[: n - 1, : n - 1] = self.block_thth
        out[: n - 1, n - 1:] = self.block_thmu
        out[n - 1:, : n - 1] = self.block_thmu.T
        out[n - 1:, n - 1:] = self.block_mumu
        return out

    def rescaled(self) -> np.ndarray:
        """Metric after dividing theta tangents by ``sqrt(K)``.

        The theta block becomes ``block_thth / K`` and the cross blocks
        pick up ``K^{-1/2}``, which vanishes in the limit.
        """
        n = self.block_mumu.shape[0]
        shrink = 0.0 if self.limit else math.exp(-0.5 * self.K.log_magnitude)
        out = np.zeros((2 * n - 1, 2 * n - 1))
        out[: n - 1, : n - 1] = self.theta_block_scaled
        out[: n - 1, n - 1:] = self.block_thmu * shrink
        out[n - 1:, : n - 1] = self.block_thmu.T * shrink
        out[n - 1:, n - 1:] = self.block_mumu
        return out
