"""SL(2) machinery for Riccati equations.

A Riccati equation ``x' = a0(t) + 2 a1(t) x - a2(t) x^2`` is the Lie system
of the Mobius action of ``SL(2, R)`` on the projective line, driven by the
curve ``A(t) = [[a1, a0], [a2, -a1]]`` in ``sl(2)``. Solutions are obtained
by transporting the initial point with the fundamental solution
``g' = A g``; states are kept in homogeneous coordinates so that poles of
the scalar solution are harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .ode import DensePath, IvpProblem, integrate, quad

__all__ = [
    "SL2Element",
    "SL2AlgebraElement",
    "ProjectivePoint",
    "AlgebraCurve",
    "RiccatiProblem",
    "SL2Path",
    "ProjectivePath",
    "ReducedPath",
    "Linearization",
    "ReductionError",
    "mobius",
    "riccati_matrix",
    "fundamental_solution",
    "solve_lie_ivp",
    "lie_reduce",
    "reduced_quadrature_solution",
    "assemble_reduced_solution",
    "linearize_riccati",
    "gauge_transform",
    "riccati_rhs",
]

Scalar = Union[float, Callable[[float], float]]

DET_TOL = 1e-9
TRACE_TOL = 1e-12


class ReductionError(ValueError):
    """A Lie-reduction precondition failed."""


def _as_function(a: Scalar) -> Callable:
    if callable(a):
        return a
    value = float(a)
    return lambda t: value + 0.0 * np.asarray(t, dtype=float) if np.ndim(t) else value


# --------------------------------------------------------------------------
# Group and algebra elements
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SL2Element:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if abs(self.det - 1.0) > DET_TOL:
            raise ValueError(f"determinant {self.det!r} is not 1")

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @classmethod
    def from_matrix(cls, m, renormalize: bool = True) -> "SL2Element":
        m = np.asarray(m, dtype=float)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if renormalize:
            if det <= 0:
                raise ValueError("cannot renormalise a matrix with non-positive determinant")
            m = m / math.sqrt(det)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @classmethod
    def identity(cls) -> "SL2Element":
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def inverse(self) -> "SL2Element":
        return SL2Element(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "SL2Element") -> "SL2Element":
        return SL2Element.from_matrix(self.matrix @ other.matrix)


@dataclass(frozen=True)
class SL2AlgebraElement:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("expected a 2x2 matrix")
        if abs(m[0, 0] + m[1, 1]) > TRACE_TOL * max(1.0, np.abs(m).max()):
            raise ValueError(f"trace {m[0, 0] + m[1, 1]!r} is not zero")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_riccati(cls, a0: float, a1: float, a2: float) -> "SL2AlgebraElement":
        return cls(np.array([[a1, a0], [a2, -a1]], dtype=float))


@dataclass(frozen=True)
class ProjectivePoint:
    """Point ``p/q`` of the real projective line, normalised to ``max(|p|, |q|) = 1``."""

    p: float
    q: float

    def __post_init__(self):
        s = max(abs(self.p), abs(self.q))
        if not s > 0 or not math.isfinite(s):
            raise ValueError("homogeneous coordinates must be finite and not both zero")
        object.__setattr__(self, "p", self.p / s)
        object.__setattr__(self, "q", self.q / s)

    @classmethod
    def from_value(cls, v: float) -> "ProjectivePoint":
        if math.isinf(v):
            return cls(1.0, 0.0)
        return cls(float(v), 1.0)

    @property
    def value(self) -> float:
        return math.inf if self.q == 0 else self.p / self.q

    @property
    def is_infinite(self) -> bool:
        return self.q == 0

    def distance(self, other: "ProjectivePoint") -> float:
        """Sine of the angle between the representing lines (0 for equal points)."""
        cross = self.p * other.q - self.q * other.p
        return abs(cross) / (math.hypot(self.p, self.q) * math.hypot(other.p, other.q))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return self.distance(other) <= 1e-14

    def __hash__(self):
        return hash(round(math.atan2(self.p, self.q) % math.pi, 12))


def _as_projective(xi) -> ProjectivePoint:
    if isinstance(xi, ProjectivePoint):
        return xi
    return ProjectivePoint.from_value(float(xi))


def mobius(g: SL2Element, xi) -> ProjectivePoint:
    """Linear fractional action ``xi -> (a xi + b)/(c xi + d)`` in homogeneous form."""
    xi = _as_projective(xi)
    return ProjectivePoint(g.a * xi.p + g.b * xi.q, g.c * xi.p + g.d * xi.q)


# --------------------------------------------------------------------------
# Curves in sl(2)
# --------------------------------------------------------------------------


class AlgebraCurve:
    """Curve ``t -> A(t)`` of traceless 2x2 matrices.

    Calling returns the raw matrix (fast path used by integrators);
    :meth:`element` returns a validated :class:`SL2AlgebraElement`.
    When built by :func:`riccati_matrix` the Riccati coefficients are kept.
    """

    def __init__(self, fn: Callable[[float], np.ndarray], coefficients=None):
        self._fn = fn
        self.coefficients = coefficients  # (a0, a1, a2) callables or None

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self._fn(t), dtype=float)

    def element(self, t: float) -> SL2AlgebraElement:
        return SL2AlgebraElement(self(t))

    def riccati_coefficients(self, t: float) -> tuple[float, float, float]:
        m = self(t)
        return float(m[0, 1]), float(m[0, 0]), float(m[1, 0])


def riccati_matrix(alpha0: Scalar, alpha1: Scalar, alpha2: Scalar) -> AlgebraCurve:
    """The curve ``t -> [[a1(t), a0(t)], [a2(t), -a1(t)]]``."""
    f0, f1, f2 = _as_function(alpha0), _as_function(alpha1), _as_function(alpha2)

    def fn(t):
        a1 = f1(t)
        return np.array([[a1, f0(t)], [f2(t), -a1]], dtype=float)

    return AlgebraCurve(fn, (f0, f1, f2))


def riccati_rhs(A: AlgebraCurve, t: float, x: float) -> float:
    a0, a1, a2 = A.riccati_coefficients(t)
    return a0 + 2.0 * a1 * x - a2 * x * x


# --------------------------------------------------------------------------
# Fundamental solutions
# --------------------------------------------------------------------------


def _renormalize(y: np.ndarray) -> np.ndarray:
    det = y[0] * y[3] - y[1] * y[2]
    return y / math.sqrt(det) if det > 0 else y


class SL2Path:
    """Dense path of group elements produced by :func:`fundamental_solution`."""

    def __init__(self, path: DensePath):
        self.path = path

    @property
    def t_start(self) -> float:
        return self.path.t_start

    @property
    def t_end(self) -> float:
        return self.path.t_end

    def matrices(self, ts) -> np.ndarray:
        ys = np.atleast_2d(self.path(np.atleast_1d(ts)))
        det = ys[:, 0] * ys[:, 3] - ys[:, 1] * ys[:, 2]
        ys = ys / np.sqrt(det)[:, None]
        return ys.reshape(-1, 2, 2)

    def __call__(self, t: float) -> SL2Element:
        return SL2Element.from_matrix(self.matrices([t])[0])


def fundamental_solution(A: AlgebraCurve, t0: float, t1: float, tol: float = 1e-10) -> SL2Path:
    """Solve ``g' = A(t) g`` with ``g(t0) = identity``; det is renormalised every step."""

    def rhs(t, y):
        a = A(t)
        return np.array(
            [
                a[0, 0] * y[0] + a[0, 1] * y[2],
                a[0, 0] * y[1] + a[0, 1] * y[3],
                a[1, 0] * y[0] + a[1, 1] * y[2],
                a[1, 0] * y[1] + a[1, 1] * y[3],
            ]
        )

    problem = IvpProblem(rhs, t0, [1.0, 0.0, 0.0, 1.0], t1, rtol=tol, atol=tol, project=_renormalize)
    return SL2Path(integrate(problem))


class ProjectivePath:
    """``t -> mobius(g(t), q)`` for a fundamental solution ``g``."""

    def __init__(self, g: SL2Path, q: ProjectivePoint):
        self.g = g
        self.q = q

    def homogeneous(self, ts) -> np.ndarray:
        m = self.g.matrices(ts)
        hp = m[:, 0, 0] * self.q.p + m[:, 0, 1] * self.q.q
        hq = m[:, 1, 0] * self.q.p + m[:, 1, 1] * self.q.q
        s = np.maximum(np.abs(hp), np.abs(hq))
        return np.stack([hp / s, hq / s], axis=-1)

    def values(self, ts) -> np.ndarray:
        """Affine values ``p/q``; exactly infinite only where ``q`` vanishes."""
        h = self.homogeneous(ts)
        with np.errstate(divide="ignore"):
            return h[:, 0] / h[:, 1]

    def __call__(self, t: float) -> ProjectivePoint:
        p, q = self.homogeneous([t])[0]
        return ProjectivePoint(p, q)


def solve_lie_ivp(A: AlgebraCurve, q, t0: float, t1: float, tol: float = 1e-10) -> ProjectivePath:
    """Pole-safe Riccati solve: ``x(t) = mobius(g(t), q)`` with ``x(t0) = q``."""
    return ProjectivePath(fundamental_solution(A, t0, t1, tol), _as_projective(q))


# --------------------------------------------------------------------------
# Lie reduction
# --------------------------------------------------------------------------


def _central_difference(f: Callable[[float], float], t: float) -> float:
    h = 1e-5 * max(1.0, abs(t))
    return (f(t + h) - f(t - h)) / (2.0 * h)


def lie_reduce(
    A: AlgebraCurve,
    x0: Callable[[float], float],
    interval: tuple[float, float],
    x0_derivative: Optional[Callable[[float], float]] = None,
    n_check: int = 50,
    residual_tol: float = 1e-7,
    isotropy_tol: float = 1e-9,
):
    """Reduce ``g' = A g`` by the particular Riccati solution ``x0``.

    Returns ``(g0, B)`` where ``g0(t) = [[1, x0(t)], [0, 1]]`` and
    ``B = g0^-1 A g0 - g0^-1 g0'`` takes values in the lower-triangular
    isotropy algebra of 0. ``x0'`` inside ``B`` comes from the Riccati
    right-hand side; ``x0_derivative`` (default: central differences) is only
    used to verify that ``x0`` solves the equation.
    """
    lo, hi = interval
    dx0 = x0_derivative or (lambda t: _central_difference(x0, t))
    for t in np.linspace(lo, hi, n_check):
        res = abs(dx0(t) - riccati_rhs(A, t, x0(t)))
        if not res <= residual_tol:
            raise ReductionError(f"x0 is not a particular solution: residual {res:.3e} at t={t:.6g}")

    def g0(t: float) -> SL2Element:
        return SL2Element(1.0, float(x0(t)), 0.0, 1.0)

    def b_fn(t):
        x = float(x0(t))
        g = np.array([[1.0, x], [0.0, 1.0]])
        g_inv = np.array([[1.0, -x], [0.0, 1.0]])
        g_dot = np.array([[0.0, riccati_rhs(A, t, x)], [0.0, 0.0]])
        return g_inv @ A(t) @ g - g_inv @ g_dot

    B = AlgebraCurve(b_fn)
    for t in np.linspace(lo, hi, n_check):
        upper = abs(B(t)[0, 1])
        if upper > isotropy_tol:
            raise ReductionError(f"reduced curve leaves the isotropy algebra: |B12| = {upper:.3e} at t={t:.6g}")
    return g0, B


class _CumulativeIntegral:
    """``t -> int_{t0}^t f`` with cached integrals over a coarse knot mesh."""

    def __init__(self, f: Callable, t0: float, tol: float, spacing: float = 0.25):
        self.f = f
        self.t0 = t0
        self.tol = tol
        self.spacing = spacing
        self._cache: dict[int, float] = {0: 0.0}

    def _knot(self, k: int) -> float:
        return self.t0 + k * self.spacing

    def _at_knot(self, k: int) -> float:
        if k not in self._cache:
            step = 1 if k > 0 else -1
            prev = self._at_knot(k - step)
            self._cache[k] = prev + quad(self.f, self._knot(k - step), self._knot(k), self.tol)
        return self._cache[k]

    def __call__(self, t: float) -> float:
        k = int(math.trunc((t - self.t0) / self.spacing))
        return self._at_knot(k) + quad(self.f, self._knot(k), t, self.tol)


class ReducedPath:
    """Quadrature solution ``g1(t) = [[gamma1, 0], [gamma2, 1/gamma1]]`` of ``g1' = B g1``."""

    def __init__(self, B: AlgebraCurve, t0: float, alpha2: Optional[Scalar] = None, tol: float = 1e-12):
        self.B = B
        self.t0 = t0
        self._beta = _vectorize(lambda t: B(t)[0, 0])
        self._lower = _vectorize(_as_function(alpha2)) if alpha2 is not None else _vectorize(lambda t: B(t)[1, 0])
        self._log_gamma1 = _CumulativeIntegral(self._beta, t0, tol)

        def weight(s):
            lg = np.array([self._log_gamma1(float(si)) for si in np.atleast_1d(s)])
            return self._lower(s) * np.exp(2.0 * lg)

        self._weighted = _CumulativeIntegral(weight, t0, tol)

    def gamma1(self, t: float) -> float:
        return math.exp(self._log_gamma1(t))

    def gamma2(self, t: float) -> float:
        return self._weighted(t) / self.gamma1(t)

    def __call__(self, t: float) -> SL2Element:
        g1 = self.gamma1(t)
        return SL2Element.from_matrix([[g1, 0.0], [self.gamma2(t), 1.0 / g1]])


def _vectorize(f: Callable[[float], float]) -> Callable:
    def wrapped(t):
        if np.ndim(t) == 0:
            return float(f(float(t)))
        return np.array([float(f(float(ti))) for ti in np.asarray(t)])

    return wrapped


def reduced_quadrature_solution(
    B: AlgebraCurve, t0: float, alpha2: Optional[Scalar] = None, tol: float = 1e-12
) -> ReducedPath:
    """Integrate the reduced equation by quadrature.

    ``gamma1 = exp(int beta)`` and ``gamma2 = gamma1^-1 int c gamma1^2``, where
    ``beta`` is the diagonal of ``B`` and ``c`` its lower-left entry (or the
    supplied ``alpha2``); this is the sign for which ``g1' = B g1`` holds.
    """
    m = B(t0)
    if abs(m[0, 1]) > 1e-9 or abs(m[0, 0] + m[1, 1]) > 1e-9:
        raise ReductionError("B must be lower triangular and traceless")
    return ReducedPath(B, t0, alpha2, tol)


def assemble_reduced_solution(g0: Callable, g1: ReducedPath, t_init: float, x_init) -> Callable[[float], ProjectivePoint]:
    """Solution of the Riccati IVP ``x(t_init) = x_init`` as ``t -> (g0 g1)(t) . q``.

    ``q`` is fixed by pulling ``x_init`` back through ``(g0 g1)(t_init)``.
    """
    g_init = g0(t_init) @ g1(t_init)
    q = mobius(g_init.inverse(), x_init)

    def solution(t: float) -> ProjectivePoint:
        return mobius(g0(t) @ g1(t), q)

    solution.q = q
    return solution


# --------------------------------------------------------------------------
# Linearisation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RiccatiProblem:
    """``x' = a0 + 2 a1 x - a2 x^2`` with ``x(t0) = q`` (``q`` may be infinite)."""

    alpha0: Scalar
    alpha1: Scalar
    alpha2: Scalar
    t0: float
    q: Union[float, ProjectivePoint]

    @property
    def curve(self) -> AlgebraCurve:
        return riccati_matrix(self.alpha0, self.alpha1, self.alpha2)


class Linearization:
    """Substitution data for a Riccati equation in linear second-order form.

    With ``p = exp(int 2 a1)`` and ``tau = int a2 p`` the function
    ``Y = -z/p`` obeys ``dY/dtau = beta + Y^2`` with ``beta = -a0/(a2 p^2)``,
    and ``Y = -psi_tau/psi`` turns that into ``psi_tautau + beta psi = 0``.
    The linear system is integrated in the original variable ``t``:
    ``psi' = a2 p phi``, ``phi' = (a0/p) psi``, and ``z = p phi / psi``.
    """

    def __init__(self, problem: RiccatiProblem, path: DensePath):
        self.problem = problem
        self._path = path
        self._a0 = _as_function(problem.alpha0)
        self._a2 = _as_function(problem.alpha2)

    def p(self, t: float) -> float:
        return float(self._path(t)[0])

    def tau(self, t: float) -> float:
        return float(self._path(t)[1])

    def t_of_tau(self, tau: float) -> float:
        lo, hi = sorted((self._path.t_start, self._path.t_end))
        return brentq(lambda t: self.tau(t) - tau, lo, hi, xtol=1e-14, rtol=1e-14)

    def beta(self, tau: float) -> float:
        t = self.t_of_tau(tau)
        return -self._a0(t) / (self._a2(t) * self.p(t) ** 2)

    def homogeneous(self, ts) -> np.ndarray:
        ys = np.atleast_2d(self._path(np.atleast_1d(ts)))
        num, den = ys[:, 0] * ys[:, 3], ys[:, 2]
        s = np.maximum(np.abs(num), np.abs(den))
        return np.stack([num / s, den / s], axis=-1)

    def values(self, ts) -> np.ndarray:
        h = self.homogeneous(ts)
        with np.errstate(divide="ignore"):
            return h[:, 0] / h[:, 1]

    def __call__(self, t: float) -> ProjectivePoint:
        p, q = self.homogeneous([t])[0]
        return ProjectivePoint(p, q)


def linearize_riccati(problem: RiccatiProblem, t1: float, tol: float = 1e-11, n_check: int = 200) -> Linearization:
    """Linearise and solve the Riccati problem on ``[t0, t1]``.

    Raises
    ------
    ReductionError
        If ``a2 p`` changes sign (``tau`` not monotone) on the interval.
    """
    a0, a1, a2 = (_as_function(a) for a in (problem.alpha0, problem.alpha1, problem.alpha2))
    samples = np.array([a2(float(t)) for t in np.linspace(problem.t0, t1, n_check)])
    # p > 0, so the sign of a2 p is that of a2
    if np.any(samples == 0) or (np.any(samples > 0) and np.any(samples < 0)):
        raise ReductionError("tau = int a2 p is not monotone on the interval")
    q = _as_projective(problem.q)

    def rhs(t, y):
        p, _, psi, phi = y
        w = a2(t) * p
        return np.array([2.0 * a1(t) * p, w, w * phi, a0(t) / p * psi])

    # z = p phi / psi, so (psi, phi) = (q_h, p_h) reproduces z(t0) = q
    path = integrate(IvpProblem(rhs, problem.t0, [1.0, 0.0, q.q, q.p], t1, rtol=tol, atol=tol))
    return Linearization(problem, path)


# --------------------------------------------------------------------------
# Gauge transformations
# --------------------------------------------------------------------------


def gauge_transform(
    h: Callable[[float], np.ndarray],
    A: AlgebraCurve,
    h_derivative: Optional[Callable[[float], np.ndarray]] = None,
) -> AlgebraCurve:
    """``t -> h A h^-1 + h' h^-1`` for a curve ``h`` of matrices (or SL2Elements)."""

    def as_matrix(v):
        return v.matrix if isinstance(v, SL2Element) else np.asarray(v, dtype=float)

    def derivative(t):
        if h_derivative is not None:
            return as_matrix(h_derivative(t))
        step = 1e-5 * max(1.0, abs(t))
        return (as_matrix(h(t + step)) - as_matrix(h(t - step))) / (2.0 * step)

    def fn(t):
        m = as_matrix(h(t))
        m_inv = np.linalg.inv(m)
        return m @ A(t) @ m_inv + derivative(t) @ m_inv

    return AlgebraCurve(fn)
