"""Vector fields of the Vessiot algebra and the superposition group law.

All fields live on ``R^4`` with coordinates ``z = (z1, z2, z3, z4)`` and are
given in closed form. Brackets use differenced Jacobians, so every bracket
identity is verified numerically rather than symbolically.

Bases
-----
``R``   ``R1..R4`` spanning the algebra of the column system.
``rho`` ``rho1 = R1 + 4 R4``, ``rho2 = R2``, ``rho3 = R3``.
``E1``  tangential symmetries of the first characteristic system, as printed.
``E2``  tangential symmetries of the second characteristic system, as printed.
``Rx``  ``R`` conjugated by the swap ``(z1, z2, z3, z4) -> (z2, z1, z4, z3)``,
        which carries the column system to the row system.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "VField",
    "DomainError",
    "GroupPoint",
    "GroupLawError",
    "IDENTITY",
    "Relation",
    "RelationResult",
    "StructureReport",
    "basis",
    "bracket",
    "bracket_field",
    "structure_check",
    "structure_relations",
    "cross_commutation",
    "group_law",
    "cauchy_vector",
    "jacobi_defect",
]

DENOMINATOR_MIN = 1e-8
JACOBIAN_STEP = 1e-5


class DomainError(ValueError):
    """A field was evaluated where one of its denominators (nearly) vanishes."""


@dataclass(frozen=True)
class VField:
    """Closed-form vector field with the list of its denominators for domain checks."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    denominators: Callable[[np.ndarray], Sequence[float]] = lambda z: ()

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        for d in self.denominators(z):
            if not abs(d) >= DENOMINATOR_MIN:
                raise DomainError(f"{self.name}: denominator {d:.3e} at z = {tuple(z)}")
        return np.asarray(self.fn(z), dtype=float)

    def __add__(self, other: "VField") -> "VField":
        return _combine([(1.0, self), (1.0, other)], f"{self.name}+{other.name}")

    def scaled(self, c: float, name: Optional[str] = None) -> "VField":
        return _combine([(c, self)], name or f"{c:g}*{self.name}")


def _combine(terms: Sequence[tuple[float, VField]], name: str) -> VField:
    return VField(
        name,
        lambda z: sum(c * f.fn(z) for c, f in terms),
        lambda z: tuple(d for _, f in terms for d in f.denominators(z)),
    )


def _vf(name, fn, dens=lambda *z: ()):
    return VField(name, lambda z: np.array(fn(*z), dtype=float), lambda z: dens(*z))


_R = [
    _vf("R1", lambda z1, z2, z3, z4: (z1, -z2, -2.0 * z3, 0.0)),
    _vf(
        "R2",
        lambda z1, z2, z3, z4: (0.0, (1.0 + z1 * z2) / (z1 * z3), 1.0, -z4 / (z1 * z2 * z3)),
        lambda z1, z2, z3, z4: (z1 * z3, z1 * z2 * z3),
    ),
    _vf("R3", lambda z1, z2, z3, z4: (z1 * z3, 0.0, -z3 * z3, 0.0)),
    _vf("R4", lambda z1, z2, z3, z4: (-0.25 * z1, 0.25 * z2, 0.0, 0.0)),
]

_E1 = [
    _vf("e1", lambda z1, z2, z3, z4: (0.5 * z1 * z3, 0.0, -0.5 * z3 * z3, 0.0)),
    _vf(
        "e2",
        # the z4 coefficient is -z4/(z1 z2 z4) as displayed
        lambda z1, z2, z3, z4: (0.0, (1.0 + z1 * z2) / (z1 * z3), 1.0, -z4 / (z1 * z2 * z4)),
        lambda z1, z2, z3, z4: (z1 * z3, z1 * z2 * z4),
    ),
    _vf("e3", lambda z1, z2, z3, z4: (-0.5 * z1, -0.5 * z2, z3, 0.0)),
    _vf("e4", lambda z1, z2, z3, z4: (-0.25 * z1, -0.25 * z2, 0.0, 0.0)),
]

_E2 = [
    _vf(
        "f1",
        lambda z1, z2, z3, z4: ((1.0 + z1 * z2) / (2.0 * z2 * z4), 0.0, -z3 / (z1 * z2 * z4), 0.5),
        lambda z1, z2, z3, z4: (z2 * z4, z1 * z2 * z4),
    ),
    _vf("f2", lambda z1, z2, z3, z4: (0.0, z2 * z4, 0.0, -z4 * z4)),
    _vf("f3", lambda z1, z2, z3, z4: (0.5 * z1, -0.5 * z2, 0.0, z4)),
    _vf("f4", lambda z1, z2, z3, z4: (-0.5 * z1, 0.5 * z2, 0.0, 0.0)),
]


def _swap(z: np.ndarray) -> np.ndarray:
    return np.array([z[1], z[0], z[3], z[2]])


def _conjugate_by_swap(f: VField, name: str) -> VField:
    return VField(name, lambda z: _swap(f.fn(_swap(z))), lambda z: f.denominators(_swap(z)))


_RHO = [
    VField("rho1", lambda z: _R[0].fn(z) + 4.0 * _R[3].fn(z)),
    VField("rho2", _R[1].fn, _R[1].denominators),
    VField("rho3", _R[2].fn, _R[2].denominators),
]

_BASES = {
    "R": _R,
    "rho": _RHO,
    "E1": _E1,
    "E2": _E2,
    "Rx": [_conjugate_by_swap(f, f.name + "x") for f in _R],
}


def basis(name: str) -> list[VField]:
    """One of ``'R'``, ``'rho'``, ``'E1'``, ``'E2'``, ``'Rx'``."""
    try:
        return list(_BASES[name])
    except KeyError:
        raise ValueError(f"unknown basis {name!r}; expected one of {sorted(_BASES)}") from None


# --------------------------------------------------------------------------
# Brackets
# --------------------------------------------------------------------------


def _jacobian(f: VField, z: np.ndarray, h: float) -> np.ndarray:
    """Columns ``dF/dz_k`` by central differences refined with one Richardson step."""
    jac = np.empty((4, 4))
    for k in range(4):
        e = np.zeros(4)
        e[k] = 1.0
        coarse = (f(z + h * e) - f(z - h * e)) / (2.0 * h)
        fine = (f(z + 0.5 * h * e) - f(z - 0.5 * h * e)) / h
        jac[:, k] = (4.0 * fine - coarse) / 3.0
    return jac


def bracket(X: VField, Y: VField, z, h: float = JACOBIAN_STEP) -> np.ndarray:
    """``[X, Y](z) = J_Y(z) X(z) - J_X(z) Y(z)``; relative accuracy about 1e-8.

    Raises
    ------
    DomainError
        If ``z`` (or a differencing node) lies where a denominator is below 1e-8.
    """
    z = np.asarray(z, dtype=float)
    return _jacobian(Y, z, h) @ X(z) - _jacobian(X, z, h) @ Y(z)


def bracket_field(X: VField, Y: VField, h: float = JACOBIAN_STEP) -> VField:
    """The bracket as a field of its own (used for Jacobi-identity checks)."""
    return VField(
        f"[{X.name},{Y.name}]",
        lambda z: bracket(X, Y, z, h),
        lambda z: tuple(X.denominators(z)) + tuple(Y.denominators(z)),
    )


def jacobi_defect(X: VField, Y: VField, Z: VField, z) -> float:
    """Max-norm of ``[[X,Y],Z] + [[Y,Z],X] + [[Z,X],Y]`` at ``z``."""
    total = (
        bracket(bracket_field(X, Y), Z, z)
        + bracket(bracket_field(Y, Z), X, z)
        + bracket(bracket_field(Z, X), Y, z)
    )
    return float(np.abs(total).max())


@dataclass(frozen=True)
class Relation:
    """``[left, right] = sum(coefficient * field)`` between named basis members."""

    left: str
    right: str
    rhs: tuple[tuple[float, str], ...]
    printed: bool = True

    @property
    def text(self) -> str:
        if not self.rhs:
            combo = "0"
        else:
            parts = []
            for c, n in self.rhs:
                if c == 1:
                    parts.append(f"+{n}")
                elif c == -1:
                    parts.append(f"-{n}")
                else:
                    parts.append(f"{c:+g}*{n}")
            combo = " ".join(parts).lstrip("+")
        return f"[{self.left},{self.right}] = {combo}"


def _rel(left, right, *rhs, printed=True) -> Relation:
    return Relation(left, right, tuple(rhs), printed)


def _commuting_with_all(names: Sequence[str], central: str) -> list[Relation]:
    return [_rel(central, n, printed=False) for n in names if n != central]


_RELATIONS = {
    "R": [_rel("R1", "R2", (2.0, "R2")), _rel("R1", "R3", (-2.0, "R3")), _rel("R2", "R3", (1.0, "R1"))]
    + _commuting_with_all(["R1", "R2", "R3", "R4"], "R4"),
    "rho": [
        _rel("rho1", "rho2", (2.0, "rho2")),
        _rel("rho1", "rho3", (-2.0, "rho3")),
        _rel("rho2", "rho3", (1.0, "rho1")),
    ],
    "E1": [_rel("e1", "e2", (1.0, "e3")), _rel("e1", "e3", (1.0, "e1")), _rel("e2", "e3", (-1.0, "e2"))]
    + _commuting_with_all(["e1", "e2", "e3", "e4"], "e4"),
    "E2": [_rel("f1", "f2", (-1.0, "f3")), _rel("f1", "f3", (-1.0, "f1")), _rel("f2", "f3", (1.0, "f2"))]
    + _commuting_with_all(["f1", "f2", "f3", "f4"], "f4"),
    "Rx": [_rel("R1x", "R2x", (2.0, "R2x")), _rel("R1x", "R3x", (-2.0, "R3x")), _rel("R2x", "R3x", (1.0, "R1x"))]
    + _commuting_with_all(["R1x", "R2x", "R3x", "R4x"], "R4x"),
}


def structure_relations(name: str) -> list[Relation]:
    """Relations checked for a basis; ``printed=False`` marks implied-but-unstated ones."""
    basis(name)
    return list(_RELATIONS[name])


@dataclass(frozen=True)
class RelationResult:
    relation: Relation
    max_deviation: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.max_deviation <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "relation": self.relation.text,
            "printed": self.relation.printed,
            "max_deviation": self.max_deviation,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class StructureReport:
    name: str
    results: list[RelationResult]
    n_points: int

    @property
    def printed_max_deviation(self) -> float:
        vals = [r.max_deviation for r in self.results if r.relation.printed]
        return max(vals) if vals else 0.0

    @property
    def printed_hold(self) -> bool:
        return all(r.holds for r in self.results if r.relation.printed)

    @property
    def failures(self) -> list[RelationResult]:
        return [r for r in self.results if not r.holds]

    def as_dict(self) -> dict:
        return {
            "basis": self.name,
            "points": self.n_points,
            "printed_max_deviation": self.printed_max_deviation,
            "printed_relations_hold": self.printed_hold,
            "relations": [r.as_dict() for r in self.results],
        }


def _check(relations, fields: dict[str, VField], points, tol: float, name: str) -> StructureReport:
    points = [np.asarray(p, dtype=float) for p in points]
    results = []
    for rel in relations:
        worst = 0.0
        for z in points:
            lhs = bracket(fields[rel.left], fields[rel.right], z)
            rhs = sum((c * fields[n](z) for c, n in rel.rhs), np.zeros(4))
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        results.append(RelationResult(rel, worst, tol))
    return StructureReport(name, results, len(points))


def structure_check(name: str, points: Iterable, tol: float = 1e-6) -> StructureReport:
    """Deviation of every relation of basis ``name`` over ``points``.

    Printed relations and the commutation of the central-looking element
    (``R4``, ``e4``, ``f4``) are both reported; nothing is asserted here.
    """
    fields = {f.name: f for f in basis(name)}
    return _check(structure_relations(name), fields, points, tol, name)


def cross_commutation(first: str, second: str, points: Iterable, tol: float = 1e-6) -> StructureReport:
    """Deviation of ``[X, Y] = 0`` for every ``X`` in ``first`` and ``Y`` in ``second``."""
    a, b = basis(first), basis(second)
    fields = {f.name: f for f in a + b}
    printed = (first, second) == ("E1", "E2")
    relations = [_rel(x.name, y.name, printed=printed) for x, y in itertools.product(a, b)]
    return _check(relations, fields, points, tol, f"{first}x{second}")


# --------------------------------------------------------------------------
# Cauchy vector
# --------------------------------------------------------------------------


def cauchy_vector(k1: float, k2: float, z) -> np.ndarray:
    """``R^4`` part of ``d_y - (k2/4)(R1 + 4 R4) + (k1/2) R2 + R3/2`` at ``z``."""
    z = np.asarray(z, dtype=float)
    R1, R2, R3, R4 = _R
    return -0.25 * k2 * (R1(z) + 4.0 * R4(z)) + 0.5 * k1 * R2(z) + 0.5 * R3(z)


# --------------------------------------------------------------------------
# Group law
# --------------------------------------------------------------------------


class GroupLawError(ValueError):
    def __init__(self, message: str, component: int):
        super().__init__(message)
        self.component = component


@dataclass(frozen=True)
class GroupPoint:
    p1: float
    p2: float
    p3: float
    p4: float

    @classmethod
    def of(cls, values) -> "GroupPoint":
        if isinstance(values, GroupPoint):
            return values
        return cls(*map(float, values))

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3, self.p4])

    def distance(self, other: "GroupPoint") -> float:
        return float(np.abs(self.as_array() - other.as_array()).max())


IDENTITY = GroupPoint(1.0, 1.0, 1.0, 1.0)


def group_law(p, q, min_denominator: float = 1e-12) -> GroupPoint:
    """Composition ``m(p, q)`` given by the four rational components of the superposition map.

    Raises
    ------
    GroupLawError
        When a denominator is below ``min_denominator`` in magnitude; ``component``
        is the 1-based index of the first affected output.
    """
    p1, p2, p3, p4 = GroupPoint.of(p).as_array()
    q1, q2, q3, q4 = GroupPoint.of(q).as_array()
    d1 = 1.0 - p1 * p2 * p4 + 2.0 * p1 * p2 * p4 * q3 - p1 * p2 * q3 - q3 + p1 * p2
    d2 = 2.0 * p4 * q3 * q2 * q1 - q1 * q2 * q3 - p4 * q2 * q1 + q1 * q2 - p4 + 1.0
    c = 2.0 * p4 * q3 - q3 - p4 + 1.0
    for k, den in enumerate((p4 * p2, q3 * q1, d1, d2), start=1):
        if not abs(den) >= min_denominator:
            raise GroupLawError(f"component {k}: denominator {den:.3e} vanishes", k)
    return GroupPoint(d1 * q1 / (p4 * p2), p2 * d2 / (q3 * q1), c * p3 * p1 * p2 / d1, c * q1 * q2 * q4 / d2)
