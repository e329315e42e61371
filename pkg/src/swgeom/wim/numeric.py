"""Fisher and Wasserstein information matrices by quadrature.

Every integrand is assembled from log-domain component densities and
CDFs so that ratios such as ``rho_i / rho_theta`` stay finite in the
tails.  Wasserstein diagonal entries grow like ``exp(d^2 / 8 sigma^2)`` and
are integrated log-scaled.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from ..errors import InvalidModel, NonConvergent
from ..mixtures import ComponentFamily, MixtureModel
from ..quadrature import (
    LogScaledValue,
    QuadratureSpec,
    integrate,
    integrate_log_scaled,
    integrate_signed_log_scaled,
)
from .matrices import M_TAIL, ExtendedMetric, MetricMatrix, Provenance, scaling_factor

_LOG_HALF = math.log(0.5)
_EQUAL_GAP_TOL = 1e-9


def _log_abs_diff(la, lb):
    """``log|e^la - e^lb|`` and the sign of ``e^la - e^lb``, elementwise."""
    hi = np.maximum(la, lb)
    gap = -np.abs(la - lb)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = hi + np.log(-np.expm1(gap))
    sign = np.sign(la - lb)
    out = np.where(sign == 0, -np.inf, out)
    # both -inf: nothing left
    out = np.where(np.isneginf(hi), -np.inf, out)
    sign = np.where(np.isneginf(hi), 0.0, sign)
    return out, sign


class _Evaluator:
    """Log-domain pieces of the information-matrix integrands for one model."""

    def __init__(self, model: MixtureModel):
        self.model = model
        self.log_w = np.log(model.p)[:, None]

    def log_density(self, x):
        lp = self.model.component_logpdfs(x)
        return lp, logsumexp(self.log_w + lp, axis=0)

    def log_cdf_gap(self, x, i):
        """``log|F_i - F_{i+1}|`` and its sign (0-based ``i``)."""
        lc = self.model.component_logcdfs(x)
        ls = self.model.component_logsfs(x)
        # CDF form on the left of the pair, survival form on the right
        left_abs, left_sign = _log_abs_diff(lc[i], lc[i + 1])
        right_abs, right_sign = _log_abs_diff(ls[i + 1], ls[i])
        use_left = lc[i] < _LOG_HALF
        return np.where(use_left, left_abs, right_abs), np.where(use_left, left_sign, right_sign)


def _truncation(model: MixtureModel, spec: QuadratureSpec) -> tuple[float, float]:
    r = spec.truncation_radius
    if model.family is ComponentFamily.LAPLACE:
        # same tail mass as a Gaussian cut at r scales: exp(-r^2/2)
        r = 0.5 * r * r
    return model.support(r)


def pair_matching_point(model: MixtureModel, i: int) -> float | None:
    """Where ``p_i rho_i = p_{i+1} rho_{i+1}`` between the two means, if it exists."""
    lo, hi = float(model.means[i]), float(model.means[i + 1])
    lw = np.log(model.p)

    def h(x):
        lp = model.component_logpdfs(np.array([x]))[:, 0]
        return float(lw[i] + lp[i] - lw[i + 1] - lp[i + 1])

    a, b = h(lo), h(hi)
    if not (a > 0 > b):
        return None
    return float(brentq(h, lo, hi, xtol=1e-14 * max(1.0, hi - lo)))


def quadrature_seeds(model: MixtureModel, a: float, b: float) -> np.ndarray:
    """Mandatory breakpoints: means, midpoints, matching points and peak widths around them."""
    mu, s = model.means, model.scales
    pts = list(mu) + list(0.5 * (mu[:-1] + mu[1:]))
    for m, sc in zip(mu, s):
        pts.extend(m + sc * np.array([-3.0, -1.0, 1.0, 3.0]))
    for i in range(model.n - 1):
        l = pair_matching_point(model, i)
        if l is None:
            continue
        sc = max(s[i], s[i + 1])
        if model.family is ComponentFamily.GAUSSIAN:
            width = sc * sc / max(model.gaps[i], 1e-300)
        else:
            width = sc
        pts.append(l)
        pts.extend(l + width * np.array([-32.0, -8.0, -2.0, 2.0, 8.0, 32.0]))
    pts = np.array([p for p in pts if a < p < b])
    return np.unique(pts)


def _tag(exc: NonConvergent, entry):
    exc.entry = entry
    return exc


def fisher_matrix_numeric(model: MixtureModel, spec: QuadratureSpec | None = None) -> MetricMatrix:
    """``G_ij = int (rho_{i+1} - rho_i)(rho_{j+1} - rho_j) / rho_theta dx``.

    Written as ``rho_theta * (r_{i+1} - r_i)(r_{j+1} - r_j)`` with bounded
    ratios ``r_k = rho_k / rho_theta``.
    """
    spec = spec or QuadratureSpec()
    ev = _Evaluator(model)
    a, b = _truncation(model, spec)
    seeds = quadrature_seeds(model, a, b)
    n = model.n - 1
    g = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            def f(x, i=i, j=j):
                lp, lr = ev.log_density(x)
                r = np.exp(lp - lr)
                return np.exp(lr) * (r[i + 1] - r[i]) * (r[j + 1] - r[j])

            try:
                g[i, j] = g[j, i] = integrate(f, a, b, spec, seeds)
            except NonConvergent as exc:
                raise _tag(exc, (i + 1, j + 1))
    return MetricMatrix(g, Provenance.NUMERIC_FISHER)


def wasserstein_log_entries(model: MixtureModel, spec: QuadratureSpec | None = None):
    """Log magnitudes and signs of ``int (F_{i+1} - F_i)(F_{j+1} - F_j) / rho_theta dx``."""
    spec = spec or QuadratureSpec()
    ev = _Evaluator(model)
    a, b = _truncation(model, spec)
    seeds = quadrature_seeds(model, a, b)
    n = model.n - 1
    log_abs = np.full((n, n), -np.inf)
    signs = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i, n):
            def log_f(x, i=i, j=j):
                _, lr = ev.log_density(x)
                li, _ = ev.log_cdf_gap(x, i)
                lj, _ = ev.log_cdf_gap(x, j)
                return li + lj - lr

            def sign_f(x, i=i, j=j):
                _, si = ev.log_cdf_gap(x, i)
                _, sj = ev.log_cdf_gap(x, j)
                return si * sj

            try:
                if i == j:
                    v = integrate_log_scaled(log_f, a, b, spec, seeds)
                else:
                    v = integrate_signed_log_scaled(log_f, sign_f, a, b, spec, seeds)
            except NonConvergent as exc:
                raise _tag(exc, (i + 1, j + 1))
            log_abs[i, j] = log_abs[j, i] = v.log_magnitude
            signs[i, j] = signs[j, i] = v.sign
    return log_abs, signs


def wasserstein_matrix_numeric(model: MixtureModel, spec: QuadratureSpec | None = None) -> MetricMatrix:
    """Numeric Wasserstein information matrix over theta tangents.

    When the diagonal would overflow, entries are stored divided by
    ``exp(log_scale)`` with ``log_scale`` the largest diagonal log.
    """
    log_abs, signs = wasserstein_log_entries(model, spec)
    top = float(np.max(np.diag(log_abs)))
    log_scale = top if top > 600.0 else None
    shift = log_scale or 0.0
    entries = signs * np.exp(log_abs - shift)
    return MetricMatrix(entries, Provenance.NUMERIC_WASSERSTEIN, log_scale, log_abs, signs)


def mean_block_numeric(model: MixtureModel, spec: QuadratureSpec | None = None) -> np.ndarray:
    """``p_i p_j int rho_i rho_j / rho_theta dx``: Wasserstein metric over mean tangents."""
    spec = spec or QuadratureSpec()
    ev = _Evaluator(model)
    a, b = _truncation(model, spec)
    seeds = quadrature_seeds(model, a, b)
    n = model.n
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            def f(x, i=i, j=j):
                lp, lr = ev.log_density(x)
                return np.exp(ev.log_w[i, 0] + ev.log_w[j, 0] + lp[i] + lp[j] - lr)

            try:
                out[i, j] = out[j, i] = integrate(f, a, b, spec, seeds)
            except NonConvergent as exc:
                raise _tag(exc, ("mu", i + 1, j + 1))
    return out


def cross_block_numeric(model: MixtureModel, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Entry ``(i, j)``: ``p_j int (rho_j / rho_theta)(F_i - F_{i+1}) dx``."""
    spec = spec or QuadratureSpec()
    ev = _Evaluator(model)
    a, b = _truncation(model, spec)
    seeds = quadrature_seeds(model, a, b)
    n = model.n
    out = np.zeros((n - 1, n))
    for i in range(n - 1):
        for j in range(n):
            def f(x, i=i, j=j):
                lp, lr = ev.log_density(x)
                lg, sg = ev.log_cdf_gap(x, i)
                return sg * np.exp(ev.log_w[j, 0] + lp[j] - lr + lg)

            try:
                out[i, j] = integrate(f, a, b, spec, seeds)
            except NonConvergent as exc:
                raise _tag(exc, ("theta-mu", i + 1, j + 1))
    return out


def _homogeneous_gap(model: MixtureModel) -> tuple[float, float]:
    gaps = model.gaps
    d = float(gaps.mean())
    sigma = float(model.scales[0])
    if np.any(np.abs(gaps - d) > _EQUAL_GAP_TOL * d) or np.any(
        np.abs(model.scales - sigma) > _EQUAL_GAP_TOL * sigma
    ):
        raise InvalidModel("this construction needs equal gaps and equal scales")
    return sigma, d


def extended_matrix_numeric(model: MixtureModel, spec: QuadratureSpec | None = None) -> ExtendedMetric:
    """Quadrature version of the ``(theta, mu)`` block metric of a homogeneous model."""
    sigma, d = _homogeneous_gap(model)
    K = scaling_factor(model.family, sigma, d)
    w = wasserstein_matrix_numeric(model, spec)
    return ExtendedMetric(
        w.divided_by(K),
        cross_block_numeric(model, spec),
        mean_block_numeric(model, spec),
        K,
    )


def sigma_matrix(p) -> np.ndarray:
    """Map from mean-tangent scores to Fisher theta scores: row ``i`` is ``-1/p_i, 1/p_{i+1}``."""
    p = np.asarray(p, dtype=float)
    n = p.size
    s = np.zeros((n - 1, n))
    for i in range(n - 1):
        s[i, i] = -1.0 / p[i]
        s[i, i + 1] = 1.0 / p[i + 1]
    return s


def wig_relation_check(model: MixtureModel, spec: QuadratureSpec | None = None) -> float:
    """Relative Frobenius deviation of ``G_F`` from ``Sigma G_W Sigma^T``."""
    gf = fisher_matrix_numeric(model, spec).entries
    gw = mean_block_numeric(model, spec)
    s = sigma_matrix(model.p)
    return float(np.linalg.norm(gf - s @ gw @ s.T) / np.linalg.norm(gf))


def offdiagonal_bound(p, sigma: float, d: float) -> float:
    """Upper bound on the off-diagonal Wasserstein entries of a homogeneous Gaussian model."""
    pmin = float(np.min(p))
    return 3.0 * d * sigma ** 2 * M_TAIL / pmin * (1.0 + 2.0 * sigma ** 2 / (3.0 * d ** 2) * math.exp(-d * d / (2.0 * sigma ** 2)))


def diagonal_bounds(p_i: float, p_next: float, sigma: float, d: float, I: LogScaledValue):
    """Lower and upper bounds on a diagonal entry in terms of ``I`` (see ``between_means_integral``)."""
    inv_i = math.exp(-I.log_magnitude)
    tail_hi = sigma ** 4 * M_TAIL ** 2 / (2.0 * min(p_i, p_next))
    tail_lo = sigma ** 4 * M_TAIL ** 2 / (2.0 * max(p_i, p_next))
    c = 1.0 - math.sqrt(2.0 * sigma / math.pi) * math.exp(-1.0 / (2.0 * sigma)) - math.exp(
        -d * d / (2.0 * sigma ** 2)
    ) / min(p_i, p_next)
    lower_rel = c + tail_lo * inv_i
    upper_rel = 1.0 + tail_hi * inv_i
    lower = LogScaledValue(I.log_magnitude + math.log(lower_rel)) if lower_rel > 0 else LogScaledValue.from_float(lower_rel)
    return lower, LogScaledValue(I.log_magnitude + math.log(upper_rel))


def between_means_integral(model: MixtureModel, i: int, spec: QuadratureSpec | None = None) -> LogScaledValue:
    """``int_{mu_i}^{mu_{i+1}} dx / (p_i rho_i + p_{i+1} rho_{i+1})`` (0-based ``i``)."""
    lw = np.log(model.p)
    lo, hi = float(model.means[i]), float(model.means[i + 1])

    def log_f(x):
        lp = model.component_logpdfs(x)
        return -np.logaddexp(lw[i] + lp[i], lw[i + 1] + lp[i + 1])

    return integrate_log_scaled(log_f, lo, hi, spec, quadrature_seeds(model, lo, hi))
