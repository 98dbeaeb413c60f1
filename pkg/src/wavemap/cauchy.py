"""Cauchy problems for the wave map along the diagonal ``y = x``.

The equations are ``u_xy + u_x u_y / (2(1 + exp((u+v)/2))) = 0`` and the
same with ``u`` and ``v`` exchanged in the derivatives. Data on the diagonal
are the values ``phi1 = u``, ``phi2 = v`` and the normal derivatives
``psi1``, ``psi2`` with respect to ``n = (d_x - d_y)/sqrt(2)``.

The solver lifts the data to a 2-jet, turns it into the coefficients
``k1(y), k2(y)`` of a Lie system in ``z = (e^{u/2}, e^{v/2}, u_y, v_x)`` and
integrates that system along every grid column (or row, with the
``x``-direction counterpart). An independent route solves the Riccati
equation for ``u_y`` and recovers ``v`` algebraically from the equation.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from . import expr as ex
from .expr import Expression
from .lie import riccati_matrix, solve_lie_ivp
from .ode import IntegrationError, IvpProblem, cumulative_quad, integrate

__all__ = [
    "CauchyData",
    "CharacteristicDataError",
    "Domain",
    "Jet2",
    "StatePoint",
    "LieCoefficients",
    "SolutionGrid",
    "Diagnostics",
    "KFormulaReport",
    "prolong",
    "lift_state",
    "compute_coefficients",
    "paper_k_formulas",
    "lie_rhs",
    "lie_rhs_x",
    "solve_grid",
    "solve_riccati_path",
    "verify",
]

_SQRT2 = math.sqrt(2.0)


class CharacteristicDataError(ValueError):
    """The data make one of ``u_x, u_y, v_x, v_y`` (numerically) vanish on the diagonal."""

    def __init__(self, message: str, x: float):
        super().__init__(message)
        self.x = x


# --------------------------------------------------------------------------
# Data and jets
# --------------------------------------------------------------------------


def _as_expression(e) -> Expression:
    if isinstance(e, str):
        return ex.parse(e)
    if isinstance(e, (int, float)):
        return ex.const(e)
    return e


@dataclass(frozen=True)
class CauchyData:
    """Diagonal data ``u = phi1``, ``v = phi2``, ``n.grad u = psi1``, ``n.grad v = psi2``.

    Expressions may be given as text in the expression grammar (variable
    ``x``). ``normal_sign = -1`` flips the orientation of ``n``.
    """

    phi1: Expression
    phi2: Expression
    psi1: Expression
    psi2: Expression
    normal_sign: float = 1.0
    eps_char: float = 1e-6

    def __post_init__(self):
        for name in ("phi1", "phi2", "psi1", "psi2"):
            object.__setattr__(self, name, _as_expression(getattr(self, name)))
        if self.normal_sign not in (1.0, -1.0):
            raise ValueError("normal_sign must be +1 or -1")
        if not self.eps_char > 0:
            raise ValueError("eps_char must be positive")

    @property
    def is_constant(self) -> bool:
        return all(ex.is_constant(e) for e in (self.phi1, self.phi2, self.psi1, self.psi2))


@dataclass(frozen=True)
class Jet2:
    x: float
    u: float
    v: float
    u_x: float
    u_y: float
    v_x: float
    v_y: float
    u_xy: float
    v_xy: float
    u_xx: float
    u_yy: float
    v_xx: float
    v_yy: float


@dataclass(frozen=True)
class StatePoint:
    """``z1 = e^{u/2}``, ``z2 = e^{v/2}``, ``z3 = u_y``, ``z4 = v_x``."""

    z1: float
    z2: float
    z3: float
    z4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.z1, self.z2, self.z3, self.z4])


_JET_FIELDS = ("u", "v", "u_x", "u_y", "v_x", "v_y", "u_xy", "v_xy", "u_xx", "u_yy", "v_xx", "v_yy")


@lru_cache(maxsize=64)
def _jet_expressions(data: CauchyData) -> dict[str, Expression]:
    """Symbolic 2-jet and Lie coefficients along the diagonal, as trees in ``x``."""
    one, two, half = ex.Const(1.0), ex.Const(2.0), ex.Const(0.5)
    root2 = ex.NamedConst("sqrt2")
    d = ex.differentiate
    sign = data.normal_sign

    def first_order(phi, psi):
        tangential = ex.mul(half, d(phi))
        normal = ex.div(psi, root2) if sign > 0 else ex.neg(ex.div(psi, root2))
        return ex.add(tangential, normal), ex.sub(tangential, normal)

    u, v = data.phi1, data.phi2
    u_x, u_y = first_order(u, data.psi1)
    v_x, v_y = first_order(v, data.psi2)
    s = ex.mul(half, ex.add(u, v))
    damping = ex.mul(two, ex.add(one, ex.call("exp", s)))
    u_xy = ex.neg(ex.div(ex.mul(u_x, u_y), damping))
    v_xy = ex.neg(ex.div(ex.mul(v_x, v_y), damping))
    weight = ex.add(one, ex.call("exp", ex.neg(s)))
    k1 = ex.div(ex.mul(u_y, v_y), weight)
    a1 = ex.div(ex.mul(u_x, v_x), weight)
    u_yy = ex.sub(d(u_y), u_xy)
    v_xx = ex.sub(d(v_x), v_xy)
    sq = lambda a: ex.mul(a, a)  # noqa: E731
    k2 = ex.div(ex.add(ex.sub(ex.mul(two, u_yy), k1), sq(u_y)), u_y)
    a3 = ex.div(ex.add(ex.sub(ex.mul(two, v_xx), a1), sq(v_x)), v_x)
    return {
        "u": u,
        "v": v,
        "u_x": u_x,
        "u_y": u_y,
        "v_x": v_x,
        "v_y": v_y,
        "u_xy": u_xy,
        "v_xy": v_xy,
        "u_xx": ex.sub(d(u_x), u_xy),
        "u_yy": u_yy,
        "v_xx": v_xx,
        "v_yy": ex.sub(d(v_y), v_xy),
        "k1": k1,
        "k2": k2,
        "a1": a1,
        "a3": a3,
        "b2": d(k1),
    }


def _check_noncharacteristic(data: CauchyData, xs, values: dict[str, np.ndarray]) -> None:
    xs = np.atleast_1d(xs)
    for name in ("u_x", "u_y", "v_x", "v_y"):
        vals = np.atleast_1d(values[name])
        bad = ~(np.abs(vals) >= data.eps_char)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise CharacteristicDataError(
                f"characteristic data: |{name}| = {abs(vals[i]):.3e} < {data.eps_char:g} at x = {xs[i]:.6g}", float(xs[i])
            )


def prolong(data: CauchyData, x: float) -> Jet2:
    """2-jet of the solution at the diagonal point ``(x, x)``."""
    exprs = _jet_expressions(data)
    values = {name: ex.evaluate(exprs[name], float(x)) for name in _JET_FIELDS}
    _check_noncharacteristic(data, x, values)
    return Jet2(x=float(x), **values)


def lift_state(jet: Jet2) -> StatePoint:
    return StatePoint(math.exp(0.5 * jet.u), math.exp(0.5 * jet.v), jet.u_y, jet.v_x)


# --------------------------------------------------------------------------
# Coefficient functions
# --------------------------------------------------------------------------


class _ConstantFunction:
    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self.value
        return np.full(np.shape(t), self.value)


class _UniformCubic:
    """Piecewise cubic on a uniform mesh with a cheap scalar evaluation path."""

    def __init__(self, t0: float, dt: float, values: np.ndarray):
        n = values.size
        spline = CubicSpline(t0 + dt * np.arange(n), values)
        self.t0, self.dt, self.n = t0, dt, n - 1
        self.c = np.ascontiguousarray(spline.c.T)  # (n-1, 4), highest power first
        self._rows = [tuple(map(float, row)) for row in self.c]

    def __call__(self, t):
        if np.ndim(t) == 0:
            k = int((t - self.t0) / self.dt)
            k = 0 if k < 0 else (self.n - 1 if k >= self.n else k)
            s = t - (self.t0 + k * self.dt)
            c0, c1, c2, c3 = self._rows[k]
            return ((c0 * s + c1) * s + c2) * s + c3
        t = np.asarray(t, dtype=float)
        k = np.clip(((t - self.t0) / self.dt).astype(int), 0, self.n - 1)
        s = t - (self.t0 + k * self.dt)
        c = self.c[k]
        return ((c[..., 0] * s + c[..., 1]) * s + c[..., 2]) * s + c[..., 3]


@dataclass
class LieCoefficients:
    """Coefficients of the column (``k1, k2``) and row (``a1, a3``) Lie systems.

    All members are callables of one real variable (the diagonal parameter).
    ``zeta`` is ``u_y`` along the diagonal and ``b2 = k1'``.
    """

    k1: Callable
    k2: Callable
    a1: Callable
    a3: Callable
    zeta: Callable
    b2: Callable
    interval: tuple[float, float]
    exact: bool
    sample_step: Optional[float] = None


def compute_coefficients(
    data: CauchyData,
    interval: tuple[float, float] = (-1.0, 1.0),
    sample_step: float = 0.005,
) -> LieCoefficients:
    """Lie-system coefficients on ``interval``.

    ``k1 = u_y v_y / (1 + e^{-(u+v)/2})`` and ``k2 = (2 u_yy - k1 + u_y^2)/u_y``
    evaluated on the jet (and likewise ``a1``, ``a3`` with ``x``-derivatives).
    Constant data give exact constants; otherwise cubic splines through
    samples at ``sample_step``.

    Raises
    ------
    CharacteristicDataError
        If the data are characteristic anywhere on the sample mesh.
    """
    lo, hi = float(min(interval)), float(max(interval))
    exprs = _jet_expressions(data)
    names = ("k1", "k2", "a1", "a3", "u_y", "b2")
    if data.is_constant:
        values = {n: ex.evaluate(exprs[n], 0.0) for n in ("u_x", "u_y", "v_x", "v_y")}
        _check_noncharacteristic(data, 0.0, values)
        fns = {n: _ConstantFunction(ex.evaluate(exprs[n], 0.0)) for n in names}
        return LieCoefficients(
            fns["k1"], fns["k2"], fns["a1"], fns["a3"], fns["u_y"], fns["b2"], (lo, hi), True, None
        )
    if not sample_step > 0:
        raise ValueError("sample_step must be positive")
    n = max(4, int(math.ceil((hi - lo) / sample_step - 1e-9)))
    dt = (hi - lo) / n if hi > lo else sample_step
    mesh = lo + dt * np.arange(n + 1)
    values = {name: ex.evaluate(exprs[name], mesh) for name in ("u_x", "u_y", "v_x", "v_y")}
    _check_noncharacteristic(data, mesh, values)
    fns = {}
    for name in names:
        vals = ex.evaluate(exprs[name], mesh)
        if not np.all(np.isfinite(vals)):
            i = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise CharacteristicDataError(f"{name} is not finite at x = {mesh[i]:.6g}", float(mesh[i]))
        fns[name] = _UniformCubic(lo, dt, vals)
    return LieCoefficients(fns["k1"], fns["k2"], fns["a1"], fns["a3"], fns["u_y"], fns["b2"], (lo, hi), False, dt)


@dataclass(frozen=True)
class KFormulaReport:
    """Closed-form ``k1, a1, k2`` on a mesh and their deviation from the jet values."""

    mesh: np.ndarray
    k1: np.ndarray
    a1: np.ndarray
    k2: np.ndarray
    jet_k1: np.ndarray
    jet_a1: np.ndarray
    jet_k2: np.ndarray
    delta_vanishes: np.ndarray  # mesh points where the k2 denominator is below 1e-12

    @property
    def max_deviation(self) -> dict[str, float]:
        out = {}
        for name in ("k1", "a1", "k2"):
            diff = np.abs(getattr(self, name) - getattr(self, "jet_" + name))
            out[name] = float(np.nanmax(diff)) if np.any(np.isfinite(diff)) else math.nan
        return out


def paper_k_formulas(data: CauchyData, mesh: Sequence[float]) -> KFormulaReport:
    """Evaluate the published closed forms for ``k1``, ``a1``, ``k2`` verbatim.

    A diagnostic only: it is never used by the solvers. Points where the
    ``k2`` denominator vanishes are reported and yield NaN there.
    """
    mesh = np.atleast_1d(np.asarray(mesh, dtype=float))
    ev = lambda e: ex.evaluate(e, mesh)  # noqa: E731
    d = ex.differentiate
    phi1, phi2, psi1, psi2 = ev(data.phi1), ev(data.phi2), ev(data.psi1), ev(data.psi2)
    phi1x, phi2x = ev(d(data.phi1)), ev(d(data.phi2))
    phi1xx, psi1x = ev(d(d(data.phi1))), ev(d(data.psi1))
    r2 = _SQRT2
    k1 = -0.25 * psi2 * (r2 * phi1x - 2.0 * psi1) * np.exp(phi2 / 2) / (np.exp(-phi1 / 2) + np.exp(phi2 / 2))
    a1 = 0.25 * (r2 * phi1x + 2.0 * psi1) * (r2 * phi2x + psi2) * np.exp(phi1 / 2) / (np.exp(phi1 / 2) + np.exp(-phi2 / 2))
    delta = 4.0 * (r2 * phi2x + psi2) * (phi1x - psi1 * r2)
    numerator = (
        2.0 * (phi1x**2 + 2.0 * psi2**2 - 2.0 * r2 * psi1 * phi1x - 4.0 * k1) * (psi2 + r2 * phi2x)
        + 4.0 * r2 * a1 * (phi1x - psi1 * r2) * np.exp(-phi1 / 2 - phi2 / 2)
        + 8.0 * (-psi1x * r2 + phi1xx) * (psi2 + r2 * phi2x)
    )
    vanishes = np.abs(delta) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        k2 = np.where(vanishes, np.nan, numerator / np.where(vanishes, 1.0, delta))
    exprs = _jet_expressions(data)
    return KFormulaReport(mesh, k1, a1, k2, ev(exprs["k1"]), ev(exprs["a1"]), ev(exprs["k2"]), mesh[vanishes])


# --------------------------------------------------------------------------
# Lie systems
# --------------------------------------------------------------------------


def _callable(k) -> Callable:
    if callable(k):
        return k
    return _ConstantFunction(k)


def lie_rhs(k1, k2) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side of the column system ``dz/dy`` for coefficients ``k1(y), k2(y)``."""
    k1, k2 = _callable(k1), _callable(k2)

    def rhs(y, z):
        z1, z2, z3, z4 = z
        c1, c2 = k1(y), k2(y)
        return np.array(
            [
                0.5 * z1 * z3,
                c1 * (1.0 + z1 * z2) / (2.0 * z1 * z3),
                0.5 * (c1 + c2 * z3 - z3 * z3),
                -c1 * z4 / (2.0 * z1 * z2 * z3),
            ]
        )

    return rhs


def lie_rhs_x(a1, a3) -> Callable[[float, np.ndarray], np.ndarray]:
    """Row counterpart ``dz/dx``: the roles of ``(z1, z3, k1, k2)`` and ``(z2, z4, a1, a3)`` swap."""
    a1, a3 = _callable(a1), _callable(a3)

    def rhs(x, z):
        z1, z2, z3, z4 = z
        c1, c3 = a1(x), a3(x)
        return np.array(
            [
                c1 * (1.0 + z1 * z2) / (2.0 * z2 * z4),
                0.5 * z2 * z4,
                -c1 * z3 / (2.0 * z1 * z2 * z4),
                0.5 * (c1 + c3 * z4 - z4 * z4),
            ]
        )

    return rhs


# --------------------------------------------------------------------------
# Grids
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("domain bounds must satisfy x_min < x_max and y_min < y_max")

    @classmethod
    def coerce(cls, d) -> "Domain":
        return d if isinstance(d, Domain) else cls(*map(float, d))

    def axes(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        if not h > 0:
            raise ValueError("grid step h must be positive")
        return _axis(self.x_min, self.x_max, h), _axis(self.y_min, self.y_max, h)

    @property
    def diagonal_interval(self) -> tuple[float, float]:
        """Range of diagonal parameters reached by columns and rows."""
        return min(self.x_min, self.y_min), max(self.x_max, self.y_max)


def _axis(lo: float, hi: float, h: float) -> np.ndarray:
    n = (hi - lo) / h
    m = int(round(n))
    if abs(n - m) > 1e-9 * max(1.0, n):
        raise ValueError(f"interval [{lo}, {hi}] is not a whole number of steps h = {h}")
    # lo + j h rather than linspace so that diagonal nodes coincide exactly
    axis = lo + h * np.arange(m + 1)
    axis[-1] = hi
    return axis


@dataclass
class Diagnostics:
    """Residual and first-integral checks of a grid.

    ``residual_u``/``residual_v`` use second-order centred differences;
    first-integral checks use fourth-order centred first derivatives.
    """

    residual_u: np.ndarray
    residual_v: np.ndarray
    max_residual_u: float
    max_residual_v: float
    beta1_layer: np.ndarray
    beta1_deviation: float
    alpha1_spread: np.ndarray  # per column
    alpha1_deviation: float
    beta1_row_spread: float

    @property
    def max_residual(self) -> float:
        return max(self.max_residual_u, self.max_residual_v)

    def summary(self) -> dict:
        return {
            "max_residual_u": self.max_residual_u,
            "max_residual_v": self.max_residual_v,
            "max_residual": self.max_residual,
            "beta1_deviation": self.beta1_deviation,
            "alpha1_deviation": self.alpha1_deviation,
            "beta1_row_spread": self.beta1_row_spread,
        }


@dataclass
class SolutionGrid:
    """Layers on the nodes ``(xs[i], ys[j])``; every layer is indexed ``[i, j]``.

    Masked cells (``mask`` True) hold NaN in every layer.
    """

    xs: np.ndarray
    ys: np.ndarray
    h: float
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray  # (4, nx, ny)
    mask: np.ndarray
    events: list[str] = field(default_factory=list)
    sweep: str = "y"
    diagnostics: Optional[Diagnostics] = None
    extra: dict = field(default_factory=dict)

    @property
    def u1(self) -> np.ndarray:
        return self.u + self.v

    @property
    def u2(self) -> np.ndarray:
        return self.u - self.v

    @property
    def residual_u(self) -> Optional[np.ndarray]:
        return None if self.diagnostics is None else self.diagnostics.residual_u

    @property
    def residual_v(self) -> Optional[np.ndarray]:
        return None if self.diagnostics is None else self.diagnostics.residual_v

    @property
    def masked_count(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_states(cls, xs, ys, h, z: np.ndarray, events, sweep) -> "SolutionGrid":
        mask = ~np.all(np.isfinite(z), axis=0) | (z[0] <= 0) | (z[1] <= 0)
        z = z.copy()
        z[:, mask] = np.nan
        with np.errstate(invalid="ignore", divide="ignore"):
            u = 2.0 * np.log(z[0])
            v = 2.0 * np.log(z[1])
        return cls(np.asarray(xs), np.asarray(ys), h, u, v, z, mask, list(events), sweep)


def _default_workers() -> int:
    cap = os.environ.get("WAVEMAP_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def _integrate_line(args) -> tuple[np.ndarray, list[str]]:
    """Integrate one column (or row) from its diagonal point across ``targets``."""
    s0, z0, targets, rhs, rtol, atol, guard_threshold, label = args
    out = np.full((4, targets.size), np.nan)
    events: list[str] = []

    def guard(t, z):
        return z[0] > 0 and z[1] > 0 and abs(z[2]) > guard_threshold and abs(z[3]) > guard_threshold

    on_diagonal = targets == s0
    out[:, on_diagonal] = z0[:, None]
    for end, pick in ((targets.max(), targets > s0), (targets.min(), targets < s0)):
        if not np.any(pick):
            continue
        problem = IvpProblem(rhs, s0, z0, float(end), rtol=rtol, atol=atol, guard=guard)
        try:
            path = integrate(problem)
        except IntegrationError as err:
            events.append(f"{label}: {type(err).__name__} at {err.t:.10g} ({err})")
            path = err.path
        if path is None:
            continue
        reach = pick & path.covers(targets)
        if np.any(reach):
            out[:, reach] = path(targets[reach]).T
    return out, events



def _run_lines(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) < 16:
        return [_integrate_line(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_integrate_line, tasks, chunksize=chunk))


class _Rhs:
    """Picklable wrapper so that line tasks can be shipped to worker processes."""

    def __init__(self, kind: str, c1, c2):
        self.kind, self.c1, self.c2 = kind, c1, c2
        self._f = lie_rhs(c1, c2) if kind == "y" else lie_rhs_x(c1, c2)

    def __call__(self, t, z):
        return self._f(t, z)

    def __getstate__(self):
        return (self.kind, self.c1, self.c2)

    def __setstate__(self, state):
        self.__init__(*state)


def _initial_states(data: CauchyData, points: np.ndarray) -> np.ndarray:
    exprs = _jet_expressions(data)
    vals = {n: ex.evaluate(exprs[n], points) for n in ("u", "v", "u_x", "u_y", "v_x", "v_y")}
    _check_noncharacteristic(data, points, vals)
    return np.stack([np.exp(0.5 * vals["u"]), np.exp(0.5 * vals["v"]), vals["u_y"], vals["v_x"]])


def _sweep(data, coeffs, xs, ys, kind, rtol, atol, guard_threshold, workers):
    if kind == "y":
        starts, targets, rhs = xs, ys, _Rhs("y", coeffs.k1, coeffs.k2)
    else:
        starts, targets, rhs = ys, xs, _Rhs("x", coeffs.a1, coeffs.a3)
    z0 = _initial_states(data, starts)
    name = "column x" if kind == "y" else "row y"
    tasks = [
        (float(s), z0[:, i], targets, rhs, rtol, atol, guard_threshold, f"{name}={s:.10g}")
        for i, s in enumerate(starts)
    ]
    results = _run_lines(tasks, workers)
    z = np.stack([r[0] for r in results], axis=1)  # (4, n_lines, n_targets)
    if kind == "x":
        z = z.transpose(0, 2, 1)
    events = [e for r in results for e in r[1]]
    return z, events


def solve_grid(
    data: CauchyData,
    domain,
    h: float,
    rtol: float = 1e-10,
    atol: Optional[float] = None,
    sweep: str = "y",
    guard_threshold: float = 1e-8,
    sample_step: Optional[float] = None,
    coefficients: Optional[LieCoefficients] = None,
    workers: Optional[int] = None,
    check: bool = True,
) -> SolutionGrid:
    """Solve the Cauchy problem on a uniform grid by integrating the Lie system.

    ``sweep='y'`` integrates every column in ``y`` starting from its diagonal
    point; ``'x'`` integrates rows with the ``x``-direction system; ``'both'``
    does both, returns the column result and stores the maximum discrepancy
    of the ``u`` and ``v`` layers in ``extra['sweep_discrepancy']``.
    Guard trips and integration failures do not abort: the unreachable cells
    are masked and the event is recorded in ``events``.
    """
    if sweep not in ("y", "x", "both"):
        raise ValueError("sweep must be 'y', 'x' or 'both'")
    dom = Domain.coerce(domain)
    xs, ys = dom.axes(h)
    atol = rtol if atol is None else atol
    if coefficients is None:
        coefficients = compute_coefficients(data, dom.diagonal_interval, sample_step or h / 2)
    workers = _default_workers() if workers is None else workers
    kinds = ["y", "x"] if sweep == "both" else [sweep]
    grids = {}
    for kind in kinds:
        z, events = _sweep(data, coefficients, xs, ys, kind, rtol, atol, guard_threshold, workers)
        grids[kind] = SolutionGrid.from_states(xs, ys, h, z, events, kind)
    grid = grids[kinds[0]]
    if sweep == "both":
        other = grids["x"]
        diff = np.maximum(np.abs(grid.u - other.u), np.abs(grid.v - other.v))
        grid.extra["sweep_discrepancy"] = float(np.nanmax(diff)) if np.any(np.isfinite(diff)) else math.nan
        grid.extra["row_grid"] = other
        grid.sweep = "both"
    if check:
        grid.diagnostics = verify(grid, coefficients)
    return grid


# --------------------------------------------------------------------------
# Riccati route
# --------------------------------------------------------------------------


def _d1_4th(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order centred first derivative; NaN within two nodes of the boundary."""
    out = np.full(f.shape, np.nan)
    g = np.moveaxis(f, axis, 0)
    o = np.moveaxis(out, axis, 0)
    if g.shape[0] >= 5:
        o[2:-2] = (-g[4:] + 8.0 * g[3:-1] - 8.0 * g[1:-3] + g[:-4]) / (12.0 * h)
    return out


def _dxy_4th(f: np.ndarray, h: float) -> np.ndarray:
    return _d1_4th(_d1_4th(f, h, 0), h, 1)


def solve_riccati_path(
    data: CauchyData,
    domain,
    h: float,
    rtol: float = 1e-10,
    quad_tol: float = 1e-12,
    coefficients: Optional[LieCoefficients] = None,
    reference: Optional[SolutionGrid] = None,
    uxy_min: float = 1e-10,
) -> SolutionGrid:
    """Second solution route: Riccati equation for ``Gamma = u_y`` plus quadrature.

    Per column ``Gamma`` solves ``Gamma' = (k1 + k2 Gamma - Gamma^2)/2`` with
    ``Gamma(x, x) = u_y(x, x)``, using the pole-safe projective solver;
    ``u = phi1(x) + int_x^y Gamma``. ``v`` is then recovered from
    ``e^{v/2} = -e^{-u/2} (1 + u_x u_y / (2 u_xy))`` with fourth-order
    differences of the ``u`` layer, so it is available on nodes at least two
    steps from the boundary. Cells beyond a pole of ``Gamma``, or where
    ``|u_xy| < uxy_min``, are masked. When ``reference`` is given,
    ``extra['path_discrepancy']`` holds the maximum ``u`` difference over
    jointly valid nodes.
    """
    dom = Domain.coerce(domain)
    xs, ys = dom.axes(h)
    if coefficients is None:
        coefficients = compute_coefficients(data, dom.diagonal_interval, h / 2)
    k1, k2 = coefficients.k1, coefficients.k2
    A = riccati_matrix(lambda t: 0.5 * k1(t), lambda t: 0.25 * k2(t), 0.5)
    phi1 = ex.evaluate(data.phi1, xs)
    zeta = _initial_states(data, xs)[2]
    u = np.full((xs.size, ys.size), np.nan)
    gamma = np.full_like(u, np.nan)
    events: list[str] = []
    for i, x0 in enumerate(xs):
        here = ys == x0
        u[i, here] = phi1[i]
        gamma[i, here] = zeta[i]
        for end, pick in ((ys.max(), ys > x0), (ys.min(), ys < x0)):
            idx = np.flatnonzero(pick)
            if idx.size == 0:
                continue
            if end < x0:
                idx = idx[::-1]
            try:
                path = solve_lie_ivp(A, float(zeta[i]), float(x0), float(end), tol=rtol)
            except IntegrationError as err:
                events.append(f"column x={x0:.10g}: {type(err).__name__} ({err})")
                continue
            knots = np.concatenate([[x0], ys[idx]])
            # a pole shows up as a sign change of the homogeneous denominator
            fine = np.linspace(0.0, 1.0, 9)[:, None] * np.diff(knots)[None, :] + knots[:-1][None, :]
            den = path.homogeneous(fine.T.ravel())[:, 1].reshape(-1, 9)
            ok = np.all(den > 0, axis=1) & (path.homogeneous(knots[1:])[:, 1] > 0)
            n_ok = idx.size if np.all(ok) else int(np.argmin(ok))
            if n_ok < idx.size:
                events.append(f"column x={x0:.10g}: pole of Gamma near y={knots[n_ok + 1]:.10g}")
            if n_ok == 0:
                continue
            knots = knots[: n_ok + 1]
            integral = cumulative_quad(path.values, knots, quad_tol)
            u[i, idx[:n_ok]] = phi1[i] + integral[1:]
            gamma[i, idx[:n_ok]] = path.values(knots[1:])

    u_x = _d1_4th(u, h, 0)
    u_y = _d1_4th(u, h, 1)
    u_xy = _dxy_4th(u, h)
    with np.errstate(invalid="ignore", divide="ignore"):
        small = np.abs(u_xy) < uxy_min
        rhs = -np.exp(-0.5 * u) * (1.0 + u_x * u_y / (2.0 * u_xy))
        rhs[small | ~(rhs > 0)] = np.nan
        v = 2.0 * np.log(rhs)
    if np.any(small):
        events.append(f"{int(small.sum())} nodes with |u_xy| < {uxy_min:g}: v undefined there")
    z = np.stack([np.exp(0.5 * u), np.exp(0.5 * v), gamma, _d1_4th(v, h, 0)])
    mask = ~(np.isfinite(u) & np.isfinite(v))
    grid = SolutionGrid(xs, ys, h, u, v, z, mask, events, "riccati")
    grid.extra["u_valid"] = np.isfinite(u)
    if reference is not None:
        diff = np.abs(u - reference.u)
        grid.extra["path_discrepancy"] = float(np.nanmax(diff)) if np.any(np.isfinite(diff)) else math.nan
    return grid


# --------------------------------------------------------------------------
# Verification
# --------------------------------------------------------------------------


def _nanmax(a) -> float:
    a = np.asarray(a)
    finite = np.isfinite(a)
    return float(np.max(np.abs(a[finite]))) if np.any(finite) else math.nan


def _residual_layers(u: np.ndarray, v: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    ru = np.full(u.shape, np.nan)
    rv = np.full(u.shape, np.nan)
    if min(u.shape) < 3:
        return ru, rv

    def parts(f):
        fx = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * h)
        fy = (f[1:-1, 2:] - f[1:-1, :-2]) / (2.0 * h)
        fxy = (f[2:, 2:] - f[2:, :-2] - f[:-2, 2:] + f[:-2, :-2]) / (4.0 * h * h)
        return fx, fy, fxy

    ux, uy, uxy = parts(u)
    vx, vy, vxy = parts(v)
    damping = 2.0 * (1.0 + np.exp(0.5 * (u[1:-1, 1:-1] + v[1:-1, 1:-1])))
    ru[1:-1, 1:-1] = uxy + ux * uy / damping
    rv[1:-1, 1:-1] = vxy + vx * vy / damping
    return ru, rv


def verify(grid: SolutionGrid, coeffs: Optional[LieCoefficients] = None) -> Diagnostics:
    """Residuals of both equations and first-integral checks on a grid.

    ``beta1_deviation`` is the maximum of ``|u_y v_y/(1 + e^{-(u+v)/2}) - k1(y)|``
    (needs ``coeffs``); ``alpha1_deviation`` is the largest per-column spread
    in ``y`` of ``u_x v_x/(1 + e^{-(u+v)/2})``. Cells next to masked cells
    produce NaN and are skipped.
    """
    u, v, h = grid.u, grid.v, grid.h
    if min(u.shape) < 5:
        raise ValueError("verification needs at least 5 nodes per axis")
    with np.errstate(invalid="ignore", over="ignore"):
        ru, rv = _residual_layers(u, v, h)
        weight = 1.0 + np.exp(-0.5 * (u + v))
        beta1 = _d1_4th(u, h, 1) * _d1_4th(v, h, 1) / weight
        alpha1 = _d1_4th(u, h, 0) * _d1_4th(v, h, 0) / weight
    if coeffs is not None:
        beta1_layer = np.abs(beta1 - np.asarray(coeffs.k1(grid.ys))[None, :])
    else:
        beta1_layer = np.full(u.shape, np.nan)

    def spread(a, axis):
        with np.errstate(invalid="ignore"):
            finite = np.isfinite(a)
            hi = np.where(finite, a, -np.inf).max(axis=axis)
            lo = np.where(finite, a, np.inf).min(axis=axis)
            s = hi - lo
        s[~np.isfinite(s)] = np.nan
        return s

    alpha1_spread = spread(alpha1, 1)
    return Diagnostics(
        residual_u=ru,
        residual_v=rv,
        max_residual_u=_nanmax(ru),
        max_residual_v=_nanmax(rv),
        beta1_layer=beta1_layer,
        beta1_deviation=_nanmax(beta1_layer),
        alpha1_spread=alpha1_spread,
        alpha1_deviation=_nanmax(alpha1_spread),
        beta1_row_spread=_nanmax(spread(beta1, 0)),
    )
