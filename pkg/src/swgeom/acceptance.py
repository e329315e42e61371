"""The acceptance suite, shared by ``swgeom verify`` and the test suite.

Each criterion returns a ``CriterionResult`` built from named checks.  A
check compares a measured value with a pinned tolerance; every tolerance
has a key so it can be overridden from the command line (overrides are
reported as such).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import flows
from .flows import ExtendedFlowState, IntegratorSpec, Interaction, Internal, Potential
from .mixtures import MixtureModel
from .pde import Field, Grid1D, Grid2D, cn_trajectory, heat1d_rhs, heat2d_rhs, run_scheme
from .wim import (
    InhomogeneousSpec,
    between_means_integral,
    diagonal_bounds,
    extended_matrix_numeric,
    fisher_limit,
    fisher_matrix_numeric,
    g2_integral,
    g_integral,
    g_prime_at_1,
    inhomogeneous_limit,
    offdiagonal_bound,
    perturbation_scaled,
    second_order_coefficient,
    wasserstein_matrix_numeric,
    wig_relation_check,
)
from .wim.matrices import scaling_factor

DEFAULT_TOLERANCES = {
    "c1.g1": 1e-10,
    "c1.g2": 1e-8,
    "c1.gprime": 1e-7,
    "c2.band": 0.5,
    "c2.sigma005": 0.1,
    "c3.residual": 0.01,
    "c4.rel": 1e-2,
    "c5.slack": 1e-9,
    "c6.rel": 0.05,
    "c7.dev": 1e-6,
    "c8.mumu": 1e-3,
    "c8.thmu": 1e-2,
    "c8.cross": 1e-6,
    "c9.t20": 0.06,
    "c9.t40": 0.03,
    "c9.ratio_lo": 1.5,
    "c9.ratio_hi": 2.5,
    "c10.drift": 1e-12,
    "c10.uniform": 1e-6,
    "c11.dev": 5e-3,
    "c11.order": 0.2,
    "c12.dev": 5e-3,
    "c12.sep": 1e-14,
    "c13.loc": 1e-2,
}

#: runtime budgets in seconds
BUDGETS = {1: 1.0, 2: 30.0, 3: 10.0, 4: 10.0, 5: 30.0, 6: 30.0, 7: 30.0,
           8: 60.0, 9: 10.0, 10: 30.0, 11: 60.0, 12: 300.0, 13: 30.0}


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    overridden: bool = False


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check] = field(default_factory=list)
    runtime: float = 0.0
    budget: float = 0.0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.runtime <= self.budget and all(c.passed for c in self.checks)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [c.name for c in self.checks if not c.passed]
        extra = f" failing: {', '.join(failed)}" if failed else ""
        if self.error:
            extra = f" error: {self.error}"
        if self.runtime > self.budget:
            extra += f" (runtime {self.runtime:.1f}s over {self.budget:.0f}s budget)"
        return f"[{status}] {self.number:2d}. {self.title} ({self.runtime:.2f}s){extra}"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


class _Recorder:
    def __init__(self, tolerances, overridden):
        self.tol = tolerances
        self.overridden = overridden
        self.checks: list[Check] = []

    def at_most(self, name, value, key):
        tol = self.tol[key]
        self.checks.append(Check(name, float(value), tol, bool(value <= tol), key in self.overridden))

    def within(self, name, value, lo_key, hi_key):
        lo, hi = self.tol[lo_key], self.tol[hi_key]
        self.checks.append(Check(name, float(value), hi, bool(lo <= value <= hi),
                                 lo_key in self.overridden or hi_key in self.overridden))

    def holds(self, name, flag):
        self.checks.append(Check(name, 1.0 if flag else 0.0, 1.0, bool(flag)))


# ------------------------------------------------------------------ oracles


def g_closed_form(k: float) -> float:
    a = (k + 1.0) / k
    return math.pi / (a * math.sin(math.pi / a))


def wasserstein_ratio(family, p, sigma, d=1.0):
    """``exp(log G_11 - log K) * sqrt(p_1 p_2)`` for a two-component model."""
    m = MixtureModel.homogeneous(p, sigma, gap=d, family=family)
    w = wasserstein_matrix_numeric(m)
    k = scaling_factor(family, sigma, d)
    return math.exp(w.log_entry(0, 0).log_magnitude - k.log_magnitude) * math.sqrt(p[0] * p[1])


# ------------------------------------------------------------------ criteria


def c1(r):
    r.at_most("|g(1) - pi/2|", abs(g_integral(1.0) - math.pi / 2), "c1.g1")
    r.at_most("|g2(1) - pi^3/8|", abs(g2_integral(1.0) - math.pi ** 3 / 8), "c1.g2")
    r.at_most("|g'(1) - pi/4|", abs(g_prime_at_1() - math.pi / 4), "c1.gprime")


SIGMAS_2 = (0.1, 0.07, 0.05, 0.03)


def c2(r):
    p = (0.3, 0.7)
    coef = second_order_coefficient(p[0], p[1], math.pi / 4)
    residuals = [wasserstein_ratio("gaussian", p, s) - 1.0 for s in SIGMAS_2]
    r.holds("|residual| decreases monotonically", all(
        abs(b) < abs(a) for a, b in zip(residuals, residuals[1:])))
    for s, res in zip(SIGMAS_2, residuals):
        r.at_most(f"|residual/prediction - 1| at sigma={s}", abs(res / (coef * s * s) - 1.0), "c2.band")
    res05 = residuals[SIGMAS_2.index(0.05)]
    r.at_most("|residual/prediction - 1| at sigma=0.05 (tight)", abs(res05 / (coef * 0.0025) - 1.0), "c2.sigma005")


SIGMAS_3 = (0.1, 0.07, 0.05, 0.03, 0.02)


def c3(r):
    p = (0.3, 0.7)
    residuals = [wasserstein_ratio("laplace", p, s) - 1.0 for s in SIGMAS_3]
    r.holds("|residual| decreases monotonically", all(
        abs(b) < abs(a) for a, b in zip(residuals, residuals[1:])))
    r.at_most("|residual| at sigma=0.02", abs(residuals[-1]), "c3.residual")


def c4(r):
    p = (0.2, 0.5, 0.3)
    num = fisher_matrix_numeric(MixtureModel.homogeneous(p, 0.01)).entries
    lim = fisher_limit(p).entries
    mask = lim != 0
    r.at_most("max relative entry error", float(np.max(np.abs(num[mask] / lim[mask] - 1.0))), "c4.rel")
    r.at_most("max |entry| off the tridiagonal band", float(np.max(np.abs(num[~mask]), initial=0.0)), "c4.rel")


def c5(r):
    p = (0.2, 0.5, 0.3)
    slack = r.tol["c5.slack"]
    for s in (0.05, 0.1):
        m = MixtureModel.homogeneous(p, s)
        w = wasserstein_matrix_numeric(m)
        bound = offdiagonal_bound(p, s, 1.0)
        for (i, j) in ((0, 1),):
            v = w.log_entry(i, j)
            val = v.sign * math.exp(v.log_magnitude) if v.sign else 0.0
            r.holds(f"0 <= G_{i + 1}{j + 1} <= bound at sigma={s} ({val:.4g} vs {bound:.4g})",
                    -slack <= val <= bound * (1 + slack))
        for i in range(2):
            I = between_means_integral(m, i)
            lo, hi = diagonal_bounds(p[i], p[i + 1], s, 1.0, I)
            g = w.log_entry(i, i).log_magnitude
            lo_ok = lo.sign <= 0 or g >= lo.log_magnitude - slack
            hi_ok = g <= hi.log_magnitude + slack
            r.holds(f"diagonal {i + 1} inside the sandwich at sigma={s}", lo_ok and hi_ok)


def c6(r):
    p = (0.2, 0.5, 0.3)
    s = 0.04
    m = MixtureModel("gaussian", [-1.0, 0.0, 2.0], [s, s, 3 * s], p)
    ispec = InhomogeneousSpec.from_model(m)
    k = ispec.scaling()
    expected_log_k = math.log(2.0 * math.sqrt(2.0 * math.pi) * s ** 3) + 1.0 / (8.0 * s * s)
    r.at_most("|log K_in - log(2 sqrt(2 pi) sigma^3 e^{1/8 sigma^2})|", abs(k.log_magnitude - expected_log_k), "c5.slack")
    num = np.diag(wasserstein_matrix_numeric(m).divided_by(k))
    lim = np.diag(inhomogeneous_limit(p, ispec).entries)
    target = np.array([
        math.pi / (2.0 * math.sqrt(p[0] * p[1])),
        3 ** 0.75 * g_closed_form(3.0) / (p[1] ** 0.25 * p[2] ** 0.75),
    ])
    r.at_most("limit constructor vs worked example", float(np.max(np.abs(lim / target - 1.0))), "c5.slack")
    for i in range(2):
        r.at_most(f"|G_{i + 1}{i + 1}/K / limit - 1|", abs(num[i] / target[i] - 1.0), "c6.rel")


def c7(r):
    for p in ((0.3, 0.7), (0.2, 0.5, 0.3)):
        for s in (0.05, 0.2, 1.0):
            dev = wig_relation_check(MixtureModel.homogeneous(p, s))
            r.at_most(f"N={len(p)} sigma={s}", dev, "c7.dev")


def c8(r):
    p = (0.2, 0.5, 0.3)
    m = MixtureModel.homogeneous(p, 0.02)
    e = extended_matrix_numeric(m)
    r.at_most("max |block_mumu - diag(p)|", float(np.max(np.abs(e.block_mumu - np.diag(p)))), "c8.mumu")
    tm = e.block_thmu
    worst = 0.0
    for i in range(len(p) - 1):
        half = 0.5 * (m.means[i + 1] - m.means[i])
        worst = max(worst, abs(tm[i, i] / half - 1.0), abs(tm[i, i + 1] / half - 1.0))
    r.at_most("max relative error of block_thmu bidiagonal", worst, "c8.thmu")
    off = np.ones_like(tm, dtype=bool)
    for i in range(len(p) - 1):
        off[i, i] = off[i, i + 1] = False
    r.at_most("max |block_thmu| off the bidiagonal", float(np.max(np.abs(tm[off]))), "c8.mumu")
    n = len(p)
    cross = e.rescaled()[: n - 1, n - 1:]
    r.at_most("max |rescaled cross block|", float(np.max(np.abs(cross))), "c8.cross")


def c9(r):
    target = math.pi ** 3 / 8
    d20 = abs(perturbation_scaled(1.0, 1.0, 20.0) / target - 1.0)
    d40 = abs(perturbation_scaled(1.0, 1.0, 40.0) / target - 1.0)
    r.at_most("relative deviation at t=20", d20, "c9.t20")
    r.at_most("relative deviation at t=40", d40, "c9.t40")
    r.within("deviation ratio t=20 / t=40", d20 / d40, "c9.ratio_lo", "c9.ratio_hi")


def _random_simplex(rng, n):
    p = 1.0 + rng.random(n)
    p /= p.sum()
    # exact unit sum without renormalising any single entry afterwards
    p[-1] = 1.0 - math.fsum(p[:-1])
    return p


def c10(r, seed=0):
    rng = np.random.default_rng(seed)
    worst_drift = 0.0
    worst_uniform = 0.0
    for n in (2, 3, 5, 10):
        v = 0.05 * rng.random(n)
        w = rng.random((n, n))
        w = 0.05 * (w + w.T)
        energies = {
            "entropy": (Internal.entropy(), 0.02),
            "potential": (Potential(v), 1e-3),
            "interaction": (Interaction(w), 1e-3),
        }
        for name, (energy, dt) in energies.items():
            p0 = _random_simplex(rng, n)
            states = flows.integrate_flow(energy, p0, IntegratorSpec("euler", dt), 1e4 * dt)
            drift = max(abs(math.fsum(s.p.p) - 1.0) for s in states)
            worst_drift = max(worst_drift, drift)
            if name == "entropy":
                worst_uniform = max(worst_uniform, float(np.max(np.abs(states[-1].p.p - 1.0 / n))))
    r.at_most("max mass drift over 1e4 Euler steps", worst_drift, "c10.drift")
    r.at_most("max |p - 1/N| at the end of the entropy flow", worst_uniform, "c10.uniform")


def heat1d_experiment():
    g = Grid1D(-5.0, 5.0, 100)
    f0 = Field.from_density(lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi), g)
    scheme = run_scheme(heat1d_rhs, f0, g, 0.001, 1000)
    ref = cn_trajectory(f0, g, 0.001, 1000)
    return g, scheme, ref


def consistency_order(spacings=(0.2, 0.1, 0.05, 0.025)) -> float:
    errs = []
    for dx in spacings:
        g = Grid1D.from_spacing(-5.0, 5.0, dx)
        k = 2 * math.pi / g.length
        rho = 2.0 + np.cos(k * g.x)
        errs.append(float(np.max(np.abs(heat1d_rhs(rho, g) + k * k * np.cos(k * g.x)))))
    return float(np.polyfit(np.log(spacings), np.log(errs), 1)[0])


def c11(r):
    _, scheme, ref = heat1d_experiment()
    dev = float(np.max(np.abs(scheme.final - ref.final)) / np.max(ref.final))
    r.at_most("max-abs deviation / peak at t=1", dev, "c11.dev")
    r.at_most("|consistency order - 2|", abs(consistency_order() - 2.0), "c11.order")


def heat2d_experiment():
    g1 = Grid1D(-5.0, 5.0, 100)
    g = Grid2D(g1, g1)
    f0 = Field.from_density(lambda X, Y: np.exp(-(X * X + Y * Y) / 2) / (2 * math.pi), g)
    scheme = run_scheme(heat2d_rhs, f0, g, 0.001, 1000)
    ref = cn_trajectory(f0, g, 0.001, 1000)
    return g, scheme, ref


def c12(r, seed=0):
    g, scheme, ref = heat2d_experiment()
    dev = float(np.max(np.abs(scheme.final - ref.final)) / np.max(ref.final))
    r.at_most("max-abs deviation / peak at t=1", dev, "c12.dev")
    rng = np.random.default_rng(seed)
    v = scheme.final * (1.0 + 0.1 * rng.random(g.shape))
    rows = np.stack([heat1d_rhs(v[i, :], g.gy) for i in range(g.shape[0])])
    cols = np.stack([heat1d_rhs(v[:, j], g.gx) for j in range(g.shape[1])]).T
    sep = float(np.max(np.abs(heat2d_rhs(v, g) - (rows + cols))) / np.max(np.abs(rows + cols)))
    r.at_most("separability identity (relative)", sep, "c12.sep")


def extended_experiment(steps=5000, dt=0.01, sigma=0.1):
    s0 = ExtendedFlowState([0.2, 0.5, 0.3], [-1.0, 0.0, 3.0], 0.0, sigma)
    return flows.integrate_extended_flow(s0, Potential(V=np.sin, dV=np.cos), IntegratorSpec("euler", dt), steps * dt)


def c13(r):
    states = extended_experiment()
    merges = [m for s in states for m in s.merges]
    r.holds("exactly one merge, of components 1 and 2", len(merges) == 1 and merges[0][1] == 1)
    final = states[-1].mu
    ok_shape = final.size == 2
    r.holds("two surviving means", ok_shape)
    err = float(np.max(np.abs(final - np.array([-math.pi / 2, 1.5 * math.pi])))) if ok_shape else math.inf
    r.at_most("max |final mean - {-pi/2, 3pi/2}|", err, "c13.loc")


CRITERIA = {
    1: ("Asymptotic constants g(1), g2(1), g'(1)", c1),
    2: ("Homogeneous Gaussian Wasserstein limit and second-order residual", c2),
    3: ("Laplace mixture Wasserstein limit", c3),
    4: ("Fisher limit at sigma=0.01", c4),
    5: ("Off-diagonal bound and diagonal sandwich", c5),
    6: ("Inhomogeneous worked example at sigma=0.04", c6),
    7: ("Fisher/Wasserstein relation G_F = S G_W S^T", c7),
    8: ("Extended metric blocks at sigma=0.02", c8),
    9: ("Perturbation expansion with g2", c9),
    10: ("Flow conservation and entropy equilibrium", c10),
    11: ("1D heat experiment against Crank-Nicolson", c11),
    12: ("2D heat experiment against split Crank-Nicolson", c12),
    13: ("Extended transport under V = sin x", c13),
}


def run_criterion(number: int, tolerances: dict | None = None, seed: int = 0) -> CriterionResult:
    tol = dict(DEFAULT_TOLERANCES)
    overridden = set()
    for key, value in (tolerances or {}).items():
        if key not in tol:
            raise KeyError(f"unknown tolerance key {key!r}")
        tol[key] = float(value)
        overridden.add(key)
    title, fn = CRITERIA[number]
    rec = _Recorder(tol, overridden)
    res = CriterionResult(number, title, budget=BUDGETS[number])
    start = time.perf_counter()
    try:
        if fn in (c10, c12):
            fn(rec, seed=seed)
        else:
            fn(rec)
    except Exception as exc:  # a crash is a failed criterion, not a crashed report
        res.error = f"{type(exc).__name__}: {exc}"
    res.runtime = time.perf_counter() - start
    res.checks = rec.checks
    return res


def run_all(tolerances: dict | None = None, seed: int = 0, only=None) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if only is None else list(only)
    return [run_criterion(n, tolerances, seed) for n in numbers]
