"""Gradient flows on the simplex under the scaling Wasserstein metric.

In the limit metric ``diag(1/sqrt(p_i p_{i+1}))`` (theta coordinates) the
gradient flow of an energy ``F`` moves mass between neighbouring nodes with
flux ``sqrt(p_i p_{i+1}) * (dF/dp_{i+1} - dF/dp_i)``.  The right-hand side is
assembled from these fluxes, so total mass is conserved by construction.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import EvaluationError, InvalidModel, StiffnessError
from .mixtures import ComponentFamily, SimplexPoint
from .quadrature import LogScaledValue
from .wim.matrices import scaling_factor

_SYM_TOL = 1e-12
_FLUSH_LOG = 700.0
_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Potential:
    """``F(p) = sum_i V_i p_i``; ``V``/``dV`` are the smooth potential for extended flows."""

    V_nodes: np.ndarray | None = None
    V: Callable | None = None
    dV: Callable | None = None

    def __post_init__(self):
        if self.V_nodes is not None:
            v = np.array(self.V_nodes, dtype=float).ravel()
            if not np.all(np.isfinite(v)):
                raise InvalidModel("potential values must be finite")
            v.setflags(write=False)
            object.__setattr__(self, "V_nodes", v)

    def partials(self, p):
        if self.V_nodes is None:
            raise InvalidModel("potential has no node values")
        if self.V_nodes.size != np.size(p):
            raise InvalidModel(f"{self.V_nodes.size} potential values for {np.size(p)} nodes")
        return self.V_nodes

    def energy(self, p):
        return float(np.dot(self.partials(p), p))


@dataclass(frozen=True, eq=False)
class Internal:
    """``F(p) = sum_i U(p_i)``."""

    U: Callable
    dU: Callable

    @classmethod
    def entropy(cls) -> "Internal":
        return cls(lambda p: p * np.log(p), lambda p: np.log(p) + 1.0)

    def partials(self, p):
        with np.errstate(all="ignore"):
            out = np.asarray(self.dU(np.asarray(p, dtype=float)), dtype=float)
        if not np.all(np.isfinite(out)):
            bad = int(np.nonzero(~np.isfinite(out))[0][0])
            raise EvaluationError(f"U' is not finite at p_{bad + 1} = {p[bad]!r}")
        return out

    def energy(self, p):
        return float(np.sum(self.U(np.asarray(p, dtype=float))))


@dataclass(frozen=True, eq=False)
class Interaction:
    """``F(p) = p^T W p / 2`` with symmetric ``W``."""

    W: np.ndarray

    def __post_init__(self):
        w = np.array(self.W, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidModel("interaction kernel must be square")
        if np.max(np.abs(w - w.T), initial=0.0) > _SYM_TOL * max(1.0, np.max(np.abs(w))):
            raise InvalidModel("interaction kernel must be symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "W", w)

    def partials(self, p):
        if self.W.shape[0] != np.size(p):
            raise InvalidModel(f"{self.W.shape[0]}x{self.W.shape[0]} kernel for {np.size(p)} nodes")
        return self.W @ p

    def energy(self, p):
        return 0.5 * float(p @ self.W @ p)


EnergyFunctional = Union[Potential, Internal, Interaction]


def _masses(p) -> np.ndarray:
    return p.p if isinstance(p, SimplexPoint) else SimplexPoint(p).p


def theta_gradient(energy: EnergyFunctional, p) -> np.ndarray:
    """``dF/dtheta_i = dF/dp_{i+1} - dF/dp_i``."""
    return np.diff(energy.partials(_masses(p)))


def _rhs_from_fluxes(flux: np.ndarray) -> np.ndarray:
    out = np.zeros(flux.size + 1)
    out[:-1] += flux
    out[1:] -= flux
    return out


def flow_rhs(energy: EnergyFunctional, p) -> np.ndarray:
    """``p_i' = -sqrt(p_i p_{i-1}) g_{i-1} + sqrt(p_i p_{i+1}) g_i`` (no flux past the ends)."""
    m = _masses(p)
    g = np.diff(energy.partials(m))
    return _rhs_from_fluxes(np.sqrt(m[:-1] * m[1:]) * g)


def entropy_flow_rhs(p) -> np.ndarray:
    """Entropy flow: flux ``sqrt(p_i p_{i+1}) log(p_{i+1}/p_i)``."""
    m = _masses(p)
    return _rhs_from_fluxes(np.sqrt(m[:-1] * m[1:]) * np.log(m[1:] / m[:-1]))


def markov_kernel_form(p) -> np.ndarray:
    """Tridiagonal ``M`` with ``M p = entropy_flow_rhs(p)``.

    ``M_{i,i+1} = sqrt(p_i/p_{i+1}) log(p_{i+1}/p_i)`` and
    ``M_{i+1,i} = sqrt(p_{i+1}/p_i) log(p_i/p_{i+1})``.
    """
    m = _masses(p)
    n = m.size
    out = np.zeros((n, n))
    for i in range(n - 1):
        out[i, i + 1] = math.sqrt(m[i] / m[i + 1]) * math.log(m[i + 1] / m[i])
        out[i + 1, i] = math.sqrt(m[i + 1] / m[i]) * math.log(m[i] / m[i + 1])
    return out


def markov_log_ratio_rhs(a: float, b: float) -> tuple[float, float]:
    """Three-node entropy flow in ``a = log(p1/p2)``, ``b = log(p2/p3)``.

    ``a' = -a (e^{a/2} + e^{-a/2}) + b e^{-b/2}`` and
    ``b' = -b (e^{b/2} + e^{-b/2}) + a e^{a/2}``.
    """
    da = -a * (math.exp(a / 2) + math.exp(-a / 2)) + b * math.exp(-b / 2)
    db = -b * (math.exp(b / 2) + math.exp(-b / 2)) + a * math.exp(a / 2)
    return da, db


class Method(enum.Enum):
    FORWARD_EULER = "euler"
    RUNGE_KUTTA4 = "rk4"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidModel(f"unknown integration method {value!r}") from None


@dataclass(frozen=True)
class IntegratorSpec:
    method: Method = Method.FORWARD_EULER
    dt: float = 0.01
    max_halvings: int = 20
    positivity_floor: float = 1e-13

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if not self.dt > 0:
            raise InvalidModel(f"time step must be positive, got {self.dt!r}")
        if self.max_halvings < 0:
            raise InvalidModel("max_halvings must be nonnegative")


@dataclass(frozen=True)
class FlowState:
    p: SimplexPoint
    t: float


def step(rhs, y: np.ndarray, h: float, method: Method) -> np.ndarray:
    """One explicit step of ``y' = rhs(y)``."""
    if method is Method.FORWARD_EULER:
        return y + h * rhs(y)
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def guarded_step(rhs, y, h, spec: IntegratorSpec, t: float, positive=None):
    """Step with local halving until ``positive(y_new)`` holds; returns ``(y_new, h_used)``."""
    positive = positive or (lambda z: bool(np.all(z > spec.positivity_floor)))
    for _ in range(spec.max_halvings + 1):
        try:
            with np.errstate(invalid="ignore", divide="ignore"):
                y_new = step(rhs, y, h, spec.method)
        except (EvaluationError, InvalidModel, ValueError):
            # an intermediate RK stage left the interior
            y_new = None
        if y_new is not None and np.all(np.isfinite(y_new)) and positive(y_new):
            return y_new, h
        h *= 0.5
    raise StiffnessError(
        f"positivity could not be kept at t={t!r} after {spec.max_halvings} step halvings",
        state=np.array(y),
        t=t,
    )


def integrate_flow(energy: EnergyFunctional, p0, spec: IntegratorSpec, t_end: float,
                   stride: int = 1, metric_scale: float = 1.0) -> list[FlowState]:
    """Fixed-step integration of ``flow_rhs`` from ``p0`` to ``t_end``.

    ``metric_scale = c`` multiplies the metric by ``c``, which slows the
    flow by ``1/c``.  No renormalisation is ever applied; conservation is
    structural.
    """
    if not t_end > 0:
        raise InvalidModel("t_end must be positive")
    if not metric_scale > 0:
        raise InvalidModel("metric_scale must be positive")
    if stride < 1:
        raise InvalidModel("stride must be at least 1")
    y = _masses(p0).copy()

    def rhs(z):
        return flow_rhs(energy, z) / metric_scale

    return _run(rhs, y, spec, t_end, stride)


def _run(rhs, y, spec, t_end, stride):
    states = [FlowState(SimplexPoint(y), 0.0)]
    t = 0.0
    accepted = 0
    tol = 1e-12 * t_end
    while t < t_end - tol:
        h = min(spec.dt, t_end - t)
        y, h_used = guarded_step(rhs, y, h, spec, t)
        t = t + h_used
        accepted += 1
        if accepted % stride == 0 or t >= t_end - tol:
            states.append(FlowState(SimplexPoint(y), t))
    return states


# ---------------------------------------------------------------- extended flow


@dataclass(frozen=True, eq=False)
class ExtendedFlowState:
    """Weights and means of a mixture moving under a potential.

    ``p`` is a plain positive weight vector (merging can leave a single
    component).  ``K`` is the scaling factor of the mean gap; the
    right-hand side uses each pair's own gap.
    """

    p: np.ndarray
    mu: np.ndarray
    t: float
    sigma: float
    K: LogScaledValue | None = None
    merges: tuple = field(default=())

    def __post_init__(self):
        p = np.array(self.p, dtype=float).ravel()
        mu = np.array(self.mu, dtype=float).ravel()
        if p.size != mu.size or p.size < 1:
            raise InvalidModel("extended state needs one mean per weight")
        if np.any(~(p > 0)) or abs(p.sum() - 1.0) > _SUM_TOL:
            raise InvalidModel("extended state weights must be positive and sum to 1")
        if not self.sigma > 0:
            raise InvalidModel("sigma must be positive")
        p.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "mu", mu)
        if self.K is None and mu.size > 1:
            gap = float(np.mean(np.diff(mu)))
            if gap > 0:
                object.__setattr__(self, "K", scaling_factor(ComponentFamily.GAUSSIAN, self.sigma, gap))

    @property
    def n(self) -> int:
        return self.p.size


def _inverse_k(sigma: float, gaps: np.ndarray) -> np.ndarray:
    """``1/K`` per pair, flushed to zero once ``log K`` exceeds 700."""
    out = np.zeros(gaps.size)
    for i, g in enumerate(gaps):
        if g <= 0:
            continue
        log_k = scaling_factor(ComponentFamily.GAUSSIAN, sigma, float(g)).log_magnitude
        out[i] = 0.0 if log_k > _FLUSH_LOG else math.exp(-log_k)
    return out


def _extended_parts(p, mu, sigma, energy: Potential):
    if energy.V is None or energy.dV is None:
        raise InvalidModel("the extended flow needs a smooth potential V and its derivative")
    v = np.asarray(energy.V(mu), dtype=float)
    dv = np.asarray(energy.dV(mu), dtype=float)
    gaps = np.diff(mu)
    inv_k = _inverse_k(sigma, gaps)
    dV = np.diff(v)
    theta_dot = -np.sqrt(p[:-1] * p[1:]) * inv_k * (dV - 0.5 * gaps * (dv[:-1] + dv[1:]))
    mu_dot = -dv.copy()
    # right neighbour term for i < N, left neighbour term for i > 1
    mu_dot[:-1] += inv_k * np.sqrt(p[1:] / p[:-1]) * 0.5 * gaps * dV
    mu_dot[1:] += inv_k * np.sqrt(p[:-1] / p[1:]) * 0.5 * gaps * dV
    return theta_dot, mu_dot


def extended_flow_rhs(state: ExtendedFlowState, energy: Potential):
    """``(theta_dot, mu_dot)`` of the potential flow on the extended mixture."""
    return _extended_parts(state.p, state.mu, state.sigma, energy)


def _weights_rate(theta_dot: np.ndarray) -> np.ndarray:
    # p_i = theta_{i-1} - theta_i
    padded = np.concatenate(([0.0], theta_dot, [0.0]))
    return padded[:-1] - padded[1:]


def _merge(p, mu, threshold):
    events = []
    i = 0
    p, mu = list(p), list(mu)
    while i < len(mu) - 1:
        if mu[i + 1] - mu[i] < threshold:
            w = p[i] + p[i + 1]
            m = (p[i] * mu[i] + p[i + 1] * mu[i + 1]) / w
            events.append((i, m))
            p[i:i + 2] = [w]
            mu[i:i + 2] = [m]
        else:
            i += 1
    return np.array(p), np.array(mu), events


def integrate_extended_flow(state0: ExtendedFlowState, energy: Potential, spec: IntegratorSpec,
                            t_end: float, stride: int = 1) -> list[ExtendedFlowState]:
    """Integrate weights and means together; merge means closer than ``1e-9 * span``.

    ``span`` is the initial distance between the extreme means (1 for a
    single component).  A merge sums the weights and takes the weighted
    mean; it is recorded in ``merges`` of the state where it happened.
    """
    if not t_end > 0:
        raise InvalidModel("t_end must be positive")
    if energy.V is None or energy.dV is None:
        raise InvalidModel("the extended flow needs a smooth potential V and its derivative")
    sigma = state0.sigma
    span = float(state0.mu[-1] - state0.mu[0]) if state0.n > 1 else 1.0
    threshold = 1e-9 * span
    p, mu = np.array(state0.p), np.array(state0.mu)
    states = [state0]
    t = 0.0
    accepted = 0
    tol = 1e-12 * t_end
    while t < t_end - tol:
        n = p.size

        def rhs(y, n=n):
            th, md = _extended_parts(y[:n], y[n:], sigma, energy)
            return np.concatenate((_weights_rate(th), md))

        def positive(y, n=n):
            return bool(np.all(y[:n] > spec.positivity_floor))

        h = min(spec.dt, t_end - t)
        y, h_used = guarded_step(rhs, np.concatenate((p, mu)), h, spec, t, positive)
        t += h_used
        accepted += 1
        p, mu = y[:n], y[n:]
        events = []
        if n > 1 and np.any(np.diff(mu) < threshold):
            order = np.argsort(mu, kind="stable")
            p, mu = p[order], mu[order]
            p, mu, found = _merge(p, mu, threshold)
            events = [(t, i + 1, m) for i, m in found]
        if events or accepted % stride == 0 or t >= t_end - tol:
            states.append(ExtendedFlowState(p, mu, t, sigma, merges=tuple(events)))
    return states


# ---------------------------------------------------------------- output


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(states, fh, stride: int = 1) -> None:
    """Columns ``t, p_1..p_N`` (plus ``mu_1..mu_N`` for extended states).

    Extended trajectories keep the initial column count; merged-away
    components leave empty cells.
    """
    writer = csv.writer(fh, lineterminator="\n")
    first = states[0]
    extended = isinstance(first, ExtendedFlowState)
    n = first.n if extended else first.p.n
    header = ["t"] + [f"p_{i + 1}" for i in range(n)]
    if extended:
        header += [f"mu_{i + 1}" for i in range(n)]
    writer.writerow(header)
    for k, s in enumerate(states):
        if k % stride and k != len(states) - 1:
            continue
        p = s.p if extended else s.p.p
        row = [_fmt(s.t)] + [_fmt(v) for v in p] + [""] * (n - p.size)
        if extended:
            row += [_fmt(v) for v in s.mu] + [""] * (n - s.mu.size)
        writer.writerow(row)


def euler_stability_hint(dt: float, p) -> None:
    """Warn when an Euler step is large against the local entropy-flow rates."""
    m = _masses(p)
    rate = float(np.max(np.sqrt(m[:-1] * m[1:]) / np.minimum(m[:-1], m[1:])))
    if dt * rate > 1.0:
        warnings.warn(f"time step {dt} is large for the local flow rate {rate:.3g}", RuntimeWarning, stacklevel=2)
