"""Parametric heat schemes on periodic grids and Crank-Nicolson references.

Grid cells carry masses ``p_i = rho(x_i) dx``.  The parametric scheme is
the entropy gradient flow on the ring of cells with flux
``sqrt(p_i p_{i+1}) log(p_{i+1}/p_i) / dx^2``; it is a nonlinear, mass
conservative discretisation of ``rho_t = rho_xx``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidField, InvalidModel
from .flows import IntegratorSpec, Method, guarded_step


@dataclass(frozen=True)
class Grid1D:
    """Periodic grid with ``n`` cells at ``x_min + i*dx``, ``dx = (x_max - x_min)/n``."""

    x_min: float
    x_max: float
    n: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary != "periodic":
            raise InvalidModel("only periodic boundaries are supported")
        if self.n < 4:
            raise InvalidModel(f"a grid needs at least 4 nodes, got {self.n}")
        if not self.x_max > self.x_min:
            raise InvalidModel("x_max must exceed x_min")

    @classmethod
    def from_spacing(cls, x_min: float, x_max: float, dx: float) -> "Grid1D":
        return cls(x_min, x_max, int(round((x_max - x_min) / dx)))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)


@dataclass(frozen=True)
class Grid2D:
    gx: Grid1D
    gy: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.gx.n, self.gy.n)

    @property
    def cell_area(self) -> float:
        return self.gx.dx * self.gy.dx

    def mesh(self):
        return np.meshgrid(self.gx.x, self.gy.x, indexing="ij")


@dataclass(frozen=True, eq=False)
class Field:
    """Positive cell masses; ``mass`` is the total at construction."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise InvalidField("fields are 1D vectors or 2D matrices")
        if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise InvalidField("field values must be finite and positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mass", math.fsum(v.ravel()))

    @classmethod
    def from_density(cls, rho, grid) -> "Field":
        """Cell masses ``rho(x_i) * dx`` (``dx*dy`` in 2D)."""
        if isinstance(grid, Grid2D):
            X, Y = grid.mesh()
            return cls(rho(X, Y) * grid.cell_area)
        return cls(rho(grid.x) * grid.dx)


def _values(field) -> np.ndarray:
    v = field.values if isinstance(field, Field) else np.asarray(field, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
        raise InvalidField("field values must be finite and positive")
    return v


def _spacing(grid) -> float:
    return grid.dx if isinstance(grid, Grid1D) else float(grid)


def _ring_operator(v: np.ndarray, dx: float, axis: int) -> np.ndarray:
    nxt = np.roll(v, -1, axis=axis)
    flux = np.sqrt(v * nxt) * np.log(nxt / v)
    return (flux - np.roll(flux, 1, axis=axis)) / (dx * dx)


def heat1d_rhs(field, grid) -> np.ndarray:
    """``p_i' = -(1/dx^2)(sqrt(p_{i-1} p_i) log(p_i/p_{i-1}) - sqrt(p_{i+1} p_i) log(p_{i+1}/p_i))``.

    ``grid`` is a ``Grid1D`` or a bare spacing (handy for tiny rings).
    """
    v = _values(field)
    if v.ndim != 1:
        raise InvalidField("heat1d_rhs needs a 1D field")
    return _ring_operator(v, _spacing(grid), 0)


def heat2d_rhs(field, grid: Grid2D) -> np.ndarray:
    """Sum of the ring operator along axis 0 (spacing ``gx.dx``) and axis 1 (``gy.dx``)."""
    v = _values(field)
    if v.ndim != 2 or v.shape != grid.shape:
        raise InvalidField(f"heat2d_rhs needs a {grid.shape} field, got {v.shape}")
    return _ring_operator(v, grid.gx.dx, 0) + _ring_operator(v, grid.gy.dx, 1)


def _cn_multiplier(n: int, dx: float, dt: float) -> np.ndarray:
    k = np.arange(n // 2 + 1)
    lam = -4.0 * np.sin(np.pi * k / n) ** 2 / (dx * dx)
    return (1.0 + 0.5 * dt * lam) / (1.0 - 0.5 * dt * lam)


def _cn_axis(v: np.ndarray, dx: float, dt: float, steps: int, axis: int) -> np.ndarray:
    n = v.shape[axis]
    mult = _cn_multiplier(n, dx, dt) ** steps
    shape = [1] * v.ndim
    shape[axis] = mult.size
    return np.fft.irfft(np.fft.rfft(v, axis=axis) * mult.reshape(shape), n=n, axis=axis)


def crank_nicolson_1d(field0, grid: Grid1D, dt: float, steps: int) -> Field:
    """``steps`` Crank-Nicolson steps of ``rho_t = rho_xx`` on the periodic grid.

    The periodic system is circulant, so each step is diagonal in Fourier
    space with factor ``(1 + dt*lam/2) / (1 - dt*lam/2)``.
    """
    v = _values(field0)
    if steps < 0 or not dt > 0:
        raise InvalidModel("need dt > 0 and steps >= 0")
    return Field(_cn_axis(v, grid.dx, dt, steps, 0))


def crank_nicolson_2d(field0, grid: Grid2D, dt: float, steps: int) -> Field:
    """Dimension-split Crank-Nicolson: a 1D solve along x, then along y, per step.

    The two periodic axis operators commute, so the split steps can be
    applied as one power of each axis factor.
    """
    v = _values(field0)
    if steps < 0 or not dt > 0:
        raise InvalidModel("need dt > 0 and steps >= 0")
    v = _cn_axis(v, grid.gx.dx, dt, steps, 0)
    return Field(_cn_axis(v, grid.gy.dx, dt, steps, 1))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    fields: np.ndarray

    def __len__(self):
        return self.times.size

    @property
    def final(self) -> np.ndarray:
        return self.fields[-1]


def cn_trajectory(field0, grid, dt: float, steps: int, stride: int = 100) -> Trajectory:
    """Crank-Nicolson snapshots at the same cadence as ``run_scheme``."""
    solver = crank_nicolson_2d if isinstance(grid, Grid2D) else crank_nicolson_1d
    v0 = _values(field0)
    marks = sorted(set(list(range(0, steps + 1, stride)) + [steps]))
    fields = [v0 if m == 0 else solver(v0, grid, dt, m).values for m in marks]
    return Trajectory(np.array(marks, dtype=float) * dt, np.array(fields))


def run_scheme(rhs, field0, grid, dt: float, steps: int, method=Method.FORWARD_EULER,
               stride: int = 100, max_halvings: int = 20, positivity_floor: float = 1e-300) -> Trajectory:
    """Explicit time loop for ``heat1d_rhs``/``heat2d_rhs``.

    Positivity is kept by local step halving; snapshots every ``stride``
    full steps and at the end.
    """
    method = Method.parse(method)
    v = np.array(_values(field0))
    if steps < 0 or not dt > 0 or stride < 1:
        raise InvalidModel("need dt > 0, steps >= 0 and stride >= 1")
    dxs = [grid.gx.dx, grid.gy.dx] if isinstance(grid, Grid2D) else [_spacing(grid)]
    limit = 0.5 / sum(1.0 / (h * h) for h in dxs)
    if method is Method.FORWARD_EULER and dt > limit:
        warnings.warn(f"dt={dt} exceeds the explicit heat-equation bound {limit:.3g}", RuntimeWarning, stacklevel=2)
    spec = IntegratorSpec(method, dt, max_halvings, positivity_floor)
    shape = v.shape

    def f(y):
        return rhs(y.reshape(shape), grid).ravel()

    times, fields = [0.0], [v.copy()]
    y = v.ravel()
    for k in range(1, steps + 1):
        remaining = dt
        t0 = (k - 1) * dt
        while remaining > 0.0:
            y, h = guarded_step(f, y, remaining, spec, t0 + dt - remaining)
            remaining = 0.0 if h == remaining else remaining - h
        if k % stride == 0 or k == steps:
            times.append(k * dt)
            fields.append(y.reshape(shape).copy())
    return Trajectory(np.array(times), np.array(fields))


@dataclass(frozen=True)
class ErrorRow:
    t: float
    max_abs: float
    l2: float
    mass_diff: float


def error_report(a: Trajectory, b: Trajectory) -> list[ErrorRow]:
    """Per-snapshot max-abs, root-sum-square and total-mass differences."""
    if a.fields.shape != b.fields.shape:
        raise InvalidField(f"trajectory shapes differ: {a.fields.shape} vs {b.fields.shape}")
    if not np.allclose(a.times, b.times, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(a.times))))):
        raise InvalidField("trajectory snapshot times differ")
    rows = []
    for t, fa, fb in zip(a.times, a.fields, b.fields):
        diff = fa - fb
        rows.append(ErrorRow(
            float(t),
            float(np.max(np.abs(diff))),
            float(np.sqrt(np.sum(diff * diff))),
            math.fsum(fa.ravel()) - math.fsum(fb.ravel()),
        ))
    return rows


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_error_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "max_abs", "l2", "mass_diff"])
    for r in rows:
        w.writerow([_fmt(r.t), _fmt(r.max_abs), _fmt(r.l2), _fmt(r.mass_diff)])


def write_field_csv(values, grid, fh) -> None:
    """1D: ``x,value`` rows.  2D: a ``# grid`` metadata line then the row-major matrix."""
    v = np.asarray(values, dtype=float)
    w = csv.writer(fh, lineterminator="\n")
    if isinstance(grid, Grid2D):
        g, h = grid.gx, grid.gy
        fh.write(f"# grid {_fmt(g.x_min)},{_fmt(g.x_max)},{g.n},{_fmt(h.x_min)},{_fmt(h.x_max)},{h.n}\n")
        for row in v:
            w.writerow([_fmt(x) for x in row])
    else:
        w.writerow(["x", "value"])
        for x, val in zip(grid.x, v):
            w.writerow([_fmt(x), _fmt(val)])


def read_field_csv(fh):
    """Inverse of ``write_field_csv``; returns ``(values, grid)``."""
    first = fh.readline()
    if first.startswith("# grid"):
        parts = first.split(None, 2)[2].strip().split(",")
        gx = Grid1D(float(parts[0]), float(parts[1]), int(parts[2]))
        gy = Grid1D(float(parts[3]), float(parts[4]), int(parts[5]))
        rows = [[float(x) for x in r] for r in csv.reader(fh) if r]
        return np.array(rows), Grid2D(gx, gy)
    if first.strip() != "x,value":
        raise InvalidField("field CSV must start with 'x,value' or a '# grid' line")
    xs, vals = [], []
    for r in csv.reader(fh):
        if r:
            xs.append(float(r[0]))
            vals.append(float(r[1]))
    xs = np.array(xs)
    dx = xs[1] - xs[0]
    return np.array(vals), Grid1D(float(xs[0]), float(xs[0] + dx * xs.size), xs.size)


def write_trajectory_csv(traj: Trajectory, grid, fh) -> None:
    """Long format: ``t,x,value`` (1D) or ``t,x,y,value`` (2D)."""
    w = csv.writer(fh, lineterminator="\n")
    if isinstance(grid, Grid2D):
        w.writerow(["t", "x", "y", "value"])
        for t, f in zip(traj.times, traj.fields):
            for i, x in enumerate(grid.gx.x):
                for j, y in enumerate(grid.gy.x):
                    w.writerow([_fmt(t), _fmt(x), _fmt(y), _fmt(f[i, j])])
    else:
        w.writerow(["t", "x", "value"])
        for t, f in zip(traj.times, traj.fields):
            for x, val in zip(grid.x, f):
                w.writerow([_fmt(t), _fmt(x), _fmt(val)])
