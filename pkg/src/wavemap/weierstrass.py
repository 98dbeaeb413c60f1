"""Explicit wave maps from four generating functions of one variable.

Given ``f1, f2`` of ``s`` and ``g1, g2`` of ``t`` the map is parametrised by
``x = f1(s)``, ``y = g1(t)`` with

    e^{u/2} = ((t g2 - 1) f2' + (2 t g2 - 1) f2^2) / (g2 (f2 + s f2'))
    e^{v/2} = ((s f2 - 1) g2' + (2 s f2 - 1) g2^2) / (f2 (g2 + t g2'))

Harmonicity is checked directly in the ``(s, t)`` chart with the chain rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import expr as ex
from .expr import Expression

__all__ = [
    "GeneratingData",
    "WaveMapSample",
    "HarmonicReport",
    "GeneratorDomainError",
    "sample",
    "verify_harmonic",
    "residual_layers",
]


class GeneratorDomainError(ValueError):
    """A quotient or Jacobian factor is non-positive or vanishes at a mesh node."""

    def __init__(self, message: str, s: float, t: float):
        super().__init__(message)
        self.s = s
        self.t = t


def _parse(e, variable: str) -> Expression:
    if isinstance(e, str):
        return ex.parse(e, variable)
    if isinstance(e, (int, float)):
        return ex.const(e)
    return e


@dataclass(frozen=True)
class GeneratingData:
    """Generators ``f1(s), f2(s), g1(t), g2(t)`` and the sampled rectangle.

    Text expressions are parsed with the variable ``s`` for ``f`` and ``t``
    for ``g``; trees are taken as given (their free variable is whatever the
    tree uses).
    """

    f1: Expression
    f2: Expression
    g1: Expression
    g2: Expression
    s_interval: tuple[float, float] = (0.6, 1.0)
    t_interval: tuple[float, float] = (0.6, 1.0)
    n_s: int = 41
    n_t: int = 41

    def __post_init__(self):
        object.__setattr__(self, "f1", _parse(self.f1, "s"))
        object.__setattr__(self, "f2", _parse(self.f2, "s"))
        object.__setattr__(self, "g1", _parse(self.g1, "t"))
        object.__setattr__(self, "g2", _parse(self.g2, "t"))
        for lo, hi in (self.s_interval, self.t_interval):
            if not lo < hi:
                raise ValueError("intervals must satisfy lo < hi")
        if self.n_s < 3 or self.n_t < 3:
            raise ValueError("need at least 3 samples per direction")

    def refined(self) -> "GeneratingData":
        """Same data on the mesh with half the spacing."""
        return GeneratingData(
            self.f1, self.f2, self.g1, self.g2, self.s_interval, self.t_interval, 2 * self.n_s - 1, 2 * self.n_t - 1
        )


@dataclass(frozen=True)
class WaveMapSample:
    """Layers on the ``(s_i, t_j)`` mesh, indexed ``[i, j]``."""

    s: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def u1(self) -> np.ndarray:
        return self.u + self.v

    @property
    def u2(self) -> np.ndarray:
        return self.u - self.v


def _first_bad(mask: np.ndarray, s: np.ndarray, t: np.ndarray) -> tuple[float, float]:
    i, j = np.unravel_index(int(np.flatnonzero(mask)[0]), mask.shape)
    return float(s[i]), float(t[j])


def sample(data: GeneratingData) -> WaveMapSample:
    """Evaluate the map on the mesh.

    Raises
    ------
    GeneratorDomainError
        If ``f1'`` or ``g1'`` vanishes, a quotient denominator vanishes, or a
        quotient is not positive at some node.
    """
    s = np.linspace(*data.s_interval, data.n_s)
    t = np.linspace(*data.t_interval, data.n_t)
    d = ex.differentiate
    f1p, g1p = ex.evaluate(d(data.f1), s), ex.evaluate(d(data.g1), t)
    for name, vals, grid in (("f1'", f1p, s), ("g1'", g1p, t)):
        bad = ~(np.abs(vals) > 0)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            loc = (float(grid[i]), math.nan) if name == "f1'" else (math.nan, float(grid[i]))
            raise GeneratorDomainError(f"{name} vanishes at {grid[i]:.6g}", *loc)
    f2 = ex.evaluate(data.f2, s)[:, None]
    f2p = ex.evaluate(d(data.f2), s)[:, None]
    g2 = ex.evaluate(data.g2, t)[None, :]
    g2p = ex.evaluate(d(data.g2), t)[None, :]
    S, T = s[:, None], t[None, :]
    num_u = (T * g2 - 1.0) * f2p + (2.0 * T * g2 - 1.0) * f2**2
    den_u = g2 * (f2 + S * f2p)
    num_v = (S * f2 - 1.0) * g2p + (2.0 * S * f2 - 1.0) * g2**2
    den_v = f2 * (g2 + T * g2p)
    num_u, den_u, num_v, den_v = np.broadcast_arrays(num_u, den_u, num_v, den_v)
    for label, num, den in (("e^{u/2}", num_u, den_u), ("e^{v/2}", num_v, den_v)):
        zero = den == 0
        if np.any(zero):
            loc = _first_bad(zero, s, t)
            raise GeneratorDomainError(f"denominator of {label} vanishes at (s, t) = {loc}", *loc)
        with np.errstate(invalid="ignore"):
            q = num / den
        bad = ~(q > 0)
        if np.any(bad):
            loc = _first_bad(bad, s, t)
            raise GeneratorDomainError(f"{label} quotient is not positive at (s, t) = {loc}", *loc)
    u = 2.0 * np.log(num_u / den_u)
    v = 2.0 * np.log(num_v / den_v)
    x = np.broadcast_to(ex.evaluate(data.f1, s)[:, None], u.shape).copy()
    y = np.broadcast_to(ex.evaluate(data.g1, t)[None, :], u.shape).copy()
    return WaveMapSample(s, t, x, y, u, v)


def residual_layers(smp: WaveMapSample, data: GeneratingData) -> tuple[np.ndarray, np.ndarray]:
    """Equation residuals at interior nodes by centred differences in ``(s, t)``."""
    ds = smp.s[1] - smp.s[0]
    dt = smp.t[1] - smp.t[0]
    d = ex.differentiate
    f1p = ex.evaluate(d(data.f1), smp.s[1:-1])[:, None]
    g1p = ex.evaluate(d(data.g1), smp.t[1:-1])[None, :]

    def parts(f):
        fs = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * ds)
        ft = (f[1:-1, 2:] - f[1:-1, :-2]) / (2.0 * dt)
        fst = (f[2:, 2:] - f[2:, :-2] - f[:-2, 2:] + f[:-2, :-2]) / (4.0 * ds * dt)
        return fs / f1p, ft / g1p, fst / (f1p * g1p)

    ux, uy, uxy = parts(smp.u)
    vx, vy, vxy = parts(smp.v)
    damping = 2.0 * (1.0 + np.exp(0.5 * (smp.u[1:-1, 1:-1] + smp.v[1:-1, 1:-1])))
    ru = np.full(smp.u.shape, np.nan)
    rv = np.full(smp.u.shape, np.nan)
    ru[1:-1, 1:-1] = uxy + ux * uy / damping
    rv[1:-1, 1:-1] = vxy + vx * vy / damping
    return ru, rv


@dataclass(frozen=True)
class HarmonicReport:
    max_residual_u: float
    max_residual_v: float
    refined_residual: Optional[float]
    ratio: Optional[float]
    residual_u: np.ndarray
    residual_v: np.ndarray

    @property
    def max_residual(self) -> float:
        return max(self.max_residual_u, self.max_residual_v)

    def summary(self) -> dict:
        return {
            "max_residual_u": self.max_residual_u,
            "max_residual_v": self.max_residual_v,
            "max_residual": self.max_residual,
            "refined_max_residual": self.refined_residual,
            "refinement_ratio": self.ratio,
        }


def verify_harmonic(smp: WaveMapSample, data: GeneratingData, refine: bool = True) -> HarmonicReport:
    """Residual max-norms on the sample mesh and, optionally, their ratio under halving the spacing.

    A ratio near 4 indicates the residual is pure second-order truncation error.
    """
    if smp.u.shape[0] < 5 or smp.u.shape[1] < 5:
        raise ValueError("verification needs at least a 5x5 mesh")
    ru, rv = residual_layers(smp, data)
    mu, mv = float(np.nanmax(np.abs(ru))), float(np.nanmax(np.abs(rv)))
    refined = ratio = None
    if refine:
        fine = data.refined()
        fu, fv = residual_layers(sample(fine), fine)
        refined = max(float(np.nanmax(np.abs(fu))), float(np.nanmax(np.abs(fv))))
        ratio = max(mu, mv) / refined if refined > 0 else math.inf
    return HarmonicReport(mu, mv, refined, ratio, ru, rv)
