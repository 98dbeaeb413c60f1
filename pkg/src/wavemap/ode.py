"""Numerical substrate: adaptive Dormand-Prince integration, Gauss-Kronrod
quadrature and the imaginary error function."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "IvpProblem",
    "DensePath",
    "IntegrationError",
    "StepSizeUnderflow",
    "GuardAbort",
    "StepBudgetExceeded",
    "QuadratureError",
    "integrate",
    "quad",
    "cumulative_quad",
    "erfi",
    "dawson",
    "ERFI_MAX_ARG",
]

# --------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau with Hairer's dense-output coefficients
# --------------------------------------------------------------------------

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

_SAFE = 0.9
_FAC_MIN = 0.2  # a step shrinks by at most this factor
_FAC_MAX = 10.0
_BETA = 0.04  # PI controller memory
_EXPO = 0.2 - 0.75 * _BETA


class IntegrationError(RuntimeError):
    """Integration stopped early.

    Attributes
    ----------
    t, y : last accepted time and state.
    path : :class:`DensePath` covering the accepted portion, or ``None``.
    """

    def __init__(self, message: str, t: float, y: np.ndarray, path: Optional["DensePath"] = None):
        super().__init__(message)
        self.t = t
        self.y = y
        self.path = path


class StepSizeUnderflow(IntegrationError):
    """Step size fell below round-off level, typically at a finite-time blow-up."""


class GuardAbort(IntegrationError):
    """The guard predicate rejected an accepted state."""


class StepBudgetExceeded(IntegrationError):
    pass


@dataclass(frozen=True)
class IvpProblem:
    """Initial value problem ``y' = f(t, y)``, ``y(t0) = y0`` on ``[t0, t1]``.

    ``t1 < t0`` integrates backwards. ``guard(t, y)`` returns False to abort.
    ``project(y)`` is applied to every accepted state (used for manifold
    renormalisation).
    """

    f: Callable[[float, np.ndarray], np.ndarray]
    t0: float
    y0: np.ndarray
    t1: float
    rtol: float = 1e-8
    atol: float = 1e-10
    guard: Optional[Callable[[float, np.ndarray], bool]] = None
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None
    first_step: Optional[float] = None
    max_steps: int = 200_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be strictly positive")
        object.__setattr__(self, "y0", np.array(self.y0, dtype=float).reshape(-1))

    @property
    def n(self) -> int:
        return self.y0.size


@dataclass(frozen=True)
class DensePath:
    """Accepted steps of an integration with 4th-order continuous extension.

    ``ts`` holds the knots in integration order (decreasing when integrating
    backwards), ``ys`` the states at the knots and ``coef`` the per-step
    interpolation coefficients.
    """

    ts: np.ndarray
    ys: np.ndarray
    coef: np.ndarray = field(repr=False)

    @property
    def t_start(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def direction(self) -> float:
        return 1.0 if self.ts[-1] >= self.ts[0] else -1.0

    def covers(self, t) -> np.ndarray:
        lo, hi = sorted((self.t_start, self.t_end))
        t = np.asarray(t, dtype=float)
        return (t >= lo) & (t <= hi)

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not np.all(self.covers(t)):
            raise ValueError(f"t outside the integrated span [{self.t_start}, {self.t_end}]")
        n_steps = len(self.ts) - 1
        if n_steps == 0:
            out = np.repeat(self.ys[:1], t.size, axis=0)
            return out[0] if scalar else out
        d = self.direction
        keys = d * self.ts
        k = np.clip(np.searchsorted(keys, d * t, side="right") - 1, 0, n_steps - 1)
        h = self.ts[k + 1] - self.ts[k]
        theta = ((t - self.ts[k]) / h)[:, None]
        th1 = 1.0 - theta
        c = self.coef[k]
        out = c[:, 0] + theta * (c[:, 1] + th1 * (c[:, 2] + theta * (c[:, 3] + th1 * c[:, 4])))
        # knots reproduce the stored states exactly
        exact = np.searchsorted(keys, d * t, side="left")
        exact = np.clip(exact, 0, n_steps)
        hit = self.ts[exact] == t
        out[hit] = self.ys[exact[hit]]
        return out[0] if scalar else out


def _rms_norm(err: np.ndarray, scale: np.ndarray) -> float:
    return math.sqrt(float(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, direction, rtol, atol, span) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = _rms_norm(y0, scale)
    d1 = _rms_norm(f0, scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + direction * h0 * f0
    with np.errstate(all="ignore"):
        f1 = np.asarray(f(t0 + direction * h0, y1), dtype=float)
    d2 = _rms_norm(f1 - f0, scale) / h0 if np.all(np.isfinite(f1)) else np.inf
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(problem: IvpProblem) -> DensePath:
    """Integrate with the Dormand-Prince 5(4) pair and PI step-size control.

    Raises
    ------
    StepSizeUnderflow
        When the step size drops below round-off relative to ``t``; the
        error carries the last accepted time (a blow-up location estimate).
    GuardAbort
        When ``problem.guard`` rejects an accepted state.
    """
    n = problem.n

    def f(t, y):
        # scalar right-hand sides are accepted for one-dimensional systems
        return np.asarray(problem.f(t, y), dtype=float).reshape(n)

    t0, t1 = float(problem.t0), float(problem.t1)
    y = problem.y0.copy()
    rtol, atol = problem.rtol, problem.atol
    ts, ys, coefs = [t0], [y.copy()], []

    def partial():
        if len(coefs) == 0:
            return DensePath(np.array(ts), np.array(ys), np.zeros((0, 5, y.size)))
        return DensePath(np.array(ts), np.array(ys), np.array(coefs))

    if problem.guard is not None and not problem.guard(t0, y):
        raise GuardAbort(f"guard rejected the initial state at t={t0}", t0, y, partial())
    if t1 == t0:
        return partial()

    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    k1 = f(t0, y)
    if not np.all(np.isfinite(k1)):
        raise IntegrationError(f"non-finite derivative at the initial state t={t0}", t0, y, partial())
    h = problem.first_step or _initial_step(f, t0, y, k1, direction, rtol, atol, span)
    h = min(abs(h), span)
    t = t0
    err_old = 1e-4
    rejected_last = False
    stages = [None] * 7

    for _ in range(problem.max_steps):
        h_min = 16.0 * np.finfo(float).eps * max(abs(t), 1.0)
        if h < h_min:
            raise StepSizeUnderflow(
                f"step size underflow at t={t!r} (h={h:.3e}); solution likely blows up near here",
                t,
                y,
                partial(),
            )
        last = False
        if h >= abs(t1 - t) * (1 - 1e-12):
            h = abs(t1 - t)
            last = True
        hs = direction * h
        stages[0] = k1
        ok = True
        with np.errstate(all="ignore"):
            for i in range(1, 7):
                yi = y.copy()
                for j, a in enumerate(_A[i]):
                    if a:
                        yi += hs * a * stages[j]
                stages[i] = f(t + _C[i] * hs, yi)
                if not np.all(np.isfinite(stages[i])):
                    ok = False
                    break
            if ok:
                y_new = yi  # stage 7 is evaluated at the fifth-order solution
                err_vec = hs * sum(e * s for e, s in zip(_E, stages) if e)
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                err = _rms_norm(err_vec, scale)
                ok = math.isfinite(err)
        if not ok:
            h *= 0.25
            rejected_last = True
            continue
        fac11 = err**_EXPO if err > 0 else 0.0
        if err <= 1.0:
            fac = fac11 / err_old**_BETA
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFE))
            h_next = h / fac
            if rejected_last:
                h_next = min(h_next, h)
            t_new = t1 if last else t + hs
            # dense output coefficients
            ydiff = y_new - y
            bspl = hs * stages[0] - ydiff
            c5 = hs * sum(d * s for d, s in zip(_D, stages) if d)
            coef = np.stack([y.copy(), ydiff, bspl, ydiff - hs * stages[6] - bspl, c5])
            if problem.project is not None:
                y_new = np.asarray(problem.project(y_new), dtype=float)
            coefs.append(coef)
            ts.append(t_new)
            ys.append(y_new.copy())
            if problem.guard is not None and not problem.guard(t_new, y_new):
                raise GuardAbort(f"guard rejected the state at t={t_new!r}", t_new, y_new, partial())
            t, y = t_new, y_new
            if last:
                return partial()
            k1 = stages[6] if problem.project is None else f(t, y)
            err_old = max(err, 1e-4)
            h = h_next
            rejected_last = False
        else:
            h = h / min(1.0 / _FAC_MIN, fac11 / _SAFE)
            rejected_last = True
    raise StepBudgetExceeded(f"exceeded {problem.max_steps} steps at t={t!r}", t, y, partial())


# --------------------------------------------------------------------------
# Adaptive Gauss-Kronrod (7, 15) quadrature
# --------------------------------------------------------------------------

_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_WK15 = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG7 = np.zeros(15)
_WG7[[1, 3, 5]] = _WG[:3]
_WG7[[9, 11, 13]] = _WG[:3][::-1]
_WG7[7] = _WG[3]


class QuadratureError(RuntimeError):
    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def _feval(f, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(x), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(f(float(xi))) for xi in x])


def _gk15(f, a: float, b: float) -> tuple[float, float]:
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    fx = _feval(f, mid + half * _NODES)
    k = half * float(_WK15 @ fx)
    g = half * float(_WG7 @ fx)
    return k, abs(k - g)


def quad(f: Callable, a: float, b: float, tol: float = 1e-10, max_intervals: int = 2000) -> float:
    """Globally adaptive G7/K15 estimate of the integral of ``f`` over ``[a, b]``.

    ``f`` may accept an array of nodes (faster) or scalars. The bisection
    stops once the summed ``|K15 - G7|`` estimate is at most ``tol``.
    """
    if a == b:
        return 0.0
    if b < a:
        return -quad(f, b, a, tol, max_intervals)
    k, e = _gk15(f, a, b)
    heap = [(-e, a, b, k)]
    total, err = k, e
    n = 1
    while err > tol:
        if not math.isfinite(total):
            raise QuadratureError("non-finite integrand", total, err)
        if n >= max_intervals:
            raise QuadratureError(
                f"no convergence after {max_intervals} subintervals (error estimate {err:.3e})", total, err
            )
        ne, lo, hi, kv = heapq.heappop(heap)
        m = 0.5 * (lo + hi)
        if m <= lo or m >= hi:
            raise QuadratureError("subinterval below floating-point resolution", total, err)
        k1, e1 = _gk15(f, lo, m)
        k2, e2 = _gk15(f, m, hi)
        total += k1 + k2 - kv
        err += e1 + e2 + ne
        heapq.heappush(heap, (-e1, lo, m, k1))
        heapq.heappush(heap, (-e2, m, hi, k2))
        n += 1
        if n % 64 == 0:  # refresh the running sums against drift
            total = sum(item[3] for item in heap)
            err = sum(-item[0] for item in heap)
    return total



def cumulative_quad(f: Callable, knots, tol: float = 1e-10) -> np.ndarray:
    """Running integrals ``int_{knots[0]}^{knots[k]} f`` for every knot.

    All segments are first treated by one vectorised K15 sweep; segments whose
    G7/K15 discrepancy exceeds their share of ``tol`` are redone with
    :func:`quad`. ``knots`` must be monotone (either direction).
    """
    knots = np.asarray(knots, dtype=float)
    if knots.size < 2:
        return np.zeros(knots.size)
    a, b = knots[:-1], knots[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    fx = _feval(f, pts).reshape(a.size, 15)
    k = half * (fx @ _WK15)
    g = half * (fx @ _WG7)
    share = tol / a.size
    bad = ~(np.abs(k - g) <= share)
    for i in np.flatnonzero(bad):
        k[i] = quad(f, a[i], b[i], share)
    return np.concatenate([[0.0], np.cumsum(k)])

# --------------------------------------------------------------------------
# erfi
# --------------------------------------------------------------------------

ERFI_MAX_ARG = 26.6  # erfi(26.65) exceeds the largest double
_SQRT_PI = math.sqrt(math.pi)
_SERIES_LIMIT = 3.0
_RYBICKI_H = 0.2
_RYBICKI_WINDOW = 9.0


def _erfi_series(x: np.ndarray) -> np.ndarray:
    x2 = x * x
    term = x.copy()
    total = x.copy()
    for n in range(1, 80):
        term = term * x2 / n
        total = total + term / (2 * n + 1)
    return 2.0 / _SQRT_PI * total


def dawson(x):
    """Dawson's integral exp(-x^2) * int_0^x exp(t^2) dt.

    Uses Rybicki's sampling formula, whose truncation error at the fixed
    sample spacing is far below double precision.
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    h = _RYBICKI_H
    for i, xi in enumerate(xa):
        ax = abs(xi)
        lo = math.floor((ax - _RYBICKI_WINDOW) / h)
        hi = math.ceil((ax + _RYBICKI_WINDOW) / h)
        n = np.arange(lo, hi + 1)
        n = n[n % 2 != 0]
        s = float(np.sum(np.exp(-((ax - n * h) ** 2)) / n))
        out[i] = math.copysign(s / _SQRT_PI, xi)
    return float(out[0]) if scalar else out


def erfi(x):
    """Imaginary error function ``(2/sqrt(pi)) * int_0^x exp(t^2) dt``.

    Maclaurin series for ``|x| <= 3``; beyond that ``2/sqrt(pi) * exp(x^2) * dawson(x)``.

    Raises
    ------
    OverflowError
        When ``|x| > ERFI_MAX_ARG`` (the value is not representable).
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(xa) > ERFI_MAX_ARG):
        raise OverflowError(f"erfi overflows for |x| > {ERFI_MAX_ARG}")
    out = np.empty_like(xa)
    small = np.abs(xa) <= _SERIES_LIMIT
    if np.any(small):
        out[small] = _erfi_series(xa[small])
    big = ~small
    if np.any(big):
        xb = xa[big]
        out[big] = 2.0 / _SQRT_PI * np.exp(xb * xb) * dawson(xb)
    return float(out[0]) if scalar else out
