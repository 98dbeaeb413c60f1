"""Command-line front end: ``wavemap solve|riccati|weierstrass|vessiot-check|verify``.

Configuration files hold one ``key = value`` per line; ``#`` starts a
comment, expressions are quoted strings and bare values are numbers or
words. Exit codes: 0 success, 2 a checked quantity breached its threshold,
1 hard error (bad config, characteristic data, invalid particular solution).
"""

from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import expr as ex
from .cauchy import CauchyData, CharacteristicDataError, Domain, SolutionGrid, solve_grid, verify
from .lie import (
    ProjectivePoint,
    ReductionError,
    assemble_reduced_solution,
    lie_reduce,
    reduced_quadrature_solution,
    riccati_matrix,
    solve_lie_ivp,
)
from .ode import IntegrationError
from .vessiot import IDENTITY, GroupPoint, cross_commutation, group_law, structure_check
from .weierstrass import GeneratingData, GeneratorDomainError, sample, verify_harmonic

__all__ = [
    "ConfigError",
    "read_config",
    "parse_config",
    "write_grid_csv",
    "read_grid_csv",
    "GRID_HEADER",
    "main",
]

GRID_HEADER = ("x", "y", "u", "v", "u1", "u2", "residual_u", "residual_v", "mask")
EXIT_OK, EXIT_ERROR, EXIT_BREACH = 0, 1, 2


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def _convert(raw: str, lineno: int) -> Any:
    raw = raw.strip()
    if not raw:
        raise ConfigError(f"line {lineno}: missing value")
    if raw[0] in "\"'":
        try:
            parts = shlex.split(raw)
        except ValueError as err:
            raise ConfigError(f"line {lineno}: {err}") from None
        if len(parts) != 1:
            raise ConfigError(f"line {lineno}: expected a single quoted string")
        return parts[0]
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_config(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines into a dict (later keys must not repeat earlier ones)."""
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(line).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key.replace("_", "").isalnum():
            raise ConfigError(f"line {lineno}: invalid key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _convert(value, lineno)
    return out


def bundled_config(name: str) -> Optional[Path]:
    path = resources.files("wavemap") / "configs" / name
    return Path(str(path)) if path.is_file() else None


def read_config(path: str) -> dict[str, Any]:
    """Read a config file; a bare bundled name such as ``example1.cfg`` also works."""
    p = Path(path)
    if not p.is_file():
        alt = bundled_config(p.name) if p.parent == Path(".") else None
        if alt is None:
            raise ConfigError(f"config file not found: {path}")
        p = alt
    try:
        return parse_config(p.read_text(encoding="utf-8"))
    except UnicodeDecodeError as err:
        raise ConfigError(f"{path}: not UTF-8 ({err})") from None


class _Keys:
    """Typed access to a config dict that remembers which keys were used."""

    def __init__(self, cfg: dict[str, Any], allowed: set[str]):
        unknown = sorted(set(cfg) - allowed)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        self.cfg = cfg

    def has(self, key: str) -> bool:
        return key in self.cfg

    def number(self, key: str, default: Optional[float] = None, positive: bool = False) -> float:
        if key not in self.cfg:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        v = self.cfg[key]
        if isinstance(v, str):
            try:
                v = float(ex.evaluate(ex.parse(v), 0.0))
            except (ex.ExpressionSyntaxError, ArithmeticError) as err:
                raise ConfigError(f"{key}: {err}") from None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        v = float(v)
        if positive and not v > 0:
            raise ConfigError(f"{key} must be positive (got {v:g})")
        return v

    def integer(self, key: str, default: int) -> int:
        v = self.cfg.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key}: expected an integer")
        return v

    def word(self, key: str, default: Optional[str], choices: Sequence[str]) -> Optional[str]:
        v = self.cfg.get(key, default)
        if v is None:
            return None
        v = str(v)
        if v not in choices:
            raise ConfigError(f"{key}: expected one of {', '.join(choices)} (got {v!r})")
        return v

    def flag(self, key: str, default: bool = False) -> bool:
        v = self.cfg.get(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{key}: expected true or false")
        return v

    def expression(self, key: str, variable: str, required: bool = True) -> Optional[ex.Expression]:
        if key not in self.cfg:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return None
        v = self.cfg[key]
        text = repr(float(v)) if isinstance(v, (int, float)) and not isinstance(v, bool) else str(v)
        try:
            return ex.parse(text, variable)
        except ex.ExpressionSyntaxError as err:
            raise ConfigError(f"{key}: {err}") from None


# --------------------------------------------------------------------------
# CSV helpers
# --------------------------------------------------------------------------


def write_grid_csv(path: Path, grid: SolutionGrid) -> None:
    """``x,y,u,v,u1,u2,residual_u,residual_v,mask`` with x varying slowest; 17 significant digits."""
    X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    res_u = grid.residual_u if grid.residual_u is not None else np.full(X.shape, np.nan)
    res_v = grid.residual_v if grid.residual_v is not None else np.full(X.shape, np.nan)
    cols = [X, Y, grid.u, grid.v, grid.u1, grid.u2, res_u, res_v]
    data = np.column_stack([c.ravel() for c in cols])
    mask = grid.mask.ravel().astype(int)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(GRID_HEADER) + "\n")
        for row, m in zip(data, mask):
            fh.write(",".join("%.17g" % v for v in row) + f",{m}\n")


@dataclass
class GridFile:
    xs: np.ndarray
    ys: np.ndarray
    layers: dict[str, np.ndarray]


def read_grid_csv(path: Path) -> GridFile:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != GRID_HEADER:
            raise ConfigError(f"{path}: unexpected header {header}")
        rows = np.array([[float(v) for v in line.split(",")] for line in fh if line.strip()])
    if rows.size == 0:
        raise ConfigError(f"{path}: no data rows")
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    if xs.size * ys.size != rows.shape[0]:
        raise ConfigError(f"{path}: rows do not form a full grid")
    layers = {name: rows[:, k].reshape(xs.size, ys.size) for k, name in enumerate(GRID_HEADER)}
    return GridFile(layers["x"][:, 0].copy(), layers["y"][0, :].copy(), layers)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _finite(v: float) -> Optional[float]:
    return float(v) if v is not None and math.isfinite(v) else None


def _gnuplot_script(csv_name: str, title: str) -> str:
    return (
        f"# gnuplot script for {csv_name}\n"
        'set datafile separator ","\n'
        "set xlabel 'x'\nset ylabel 'y'\nset zlabel 'u'\n"
        f"set title '{title}'\n"
        f"splot '{csv_name}' every ::1 using 1:2:($9 == 0 ? $3 : 1/0) with points pt 7 ps 0.3 title 'u'\n"
        "pause -1\n"
    )


# --------------------------------------------------------------------------
# Reference solutions
# --------------------------------------------------------------------------

_S2 = math.sqrt(2.0)


def _example1(X, Y, lam):
    w = _S2 * (X - Y) / 4.0
    u = np.log((np.cosh(w) + _S2 * np.sinh(w)) ** 2)
    return u, u


def _example2(X, Y, lam):
    e = np.exp
    u = 2.0 * np.log(lam * e((X + Y) / 4) * (e(-Y / 2) * (3 + 2 * _S2) - e(-X / 2)) / (2 * (1 + _S2)))
    v = 2.0 * np.log(
        (1 / (2 * lam))
        * e((X + Y) / 4)
        * (e(-Y) * (2 * _S2 + 3) - e(-X) * (2 * _S2 - 3) - 2 * e(-(X + Y) / 2))
        / (e(-Y / 2) * (1 + _S2) + e(-X / 2) * (1 - _S2))
    )
    return u, v


REFERENCES: dict[str, tuple[Callable, Callable[[float], tuple[str, str, str, str]]]] = {
    "example1": (_example1, lambda lam: ("0", "0", "sqrt2", "sqrt2")),
    "example2": (_example2, lambda lam: (f"2*ln({lam!r})", f"-2*ln({lam!r})", "1", "1")),
}


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

_SOLVE_KEYS = {
    "phi1", "phi2", "psi1", "psi2", "x_min", "x_max", "y_min", "y_max", "h", "rtol", "atol",
    "sweep", "normal_sign", "eps_char", "guard_threshold", "residual_threshold", "reference",
    "lambda", "gnuplot", "grid_csv", "summary_json",
}  # fmt: skip


def cmd_solve(cfg: dict, out: Path, flip_normal: bool = False) -> int:
    k = _Keys(cfg, _SOLVE_KEYS)
    reference = k.word("reference", None, tuple(REFERENCES))
    lam = k.number("lambda", 1.0, positive=True)
    names = ("phi1", "phi2", "psi1", "psi2")
    if reference and not any(k.has(n) for n in names):
        exprs = [ex.parse(t) for t in REFERENCES[reference][1](lam)]
    else:
        exprs = [k.expression(n, "x") for n in names]
    normal_sign = k.number("normal_sign", 1.0)
    if normal_sign not in (1.0, -1.0):
        raise ConfigError("normal_sign must be 1 or -1")
    if flip_normal:
        normal_sign = -normal_sign
    domain_vals = [k.number(n, d) for n, d in (("x_min", -1.0), ("x_max", 1.0), ("y_min", -1.0), ("y_max", 1.0))]
    h = k.number("h", 0.01, positive=True)
    rtol = k.number("rtol", 1e-10, positive=True)
    atol = k.number("atol", rtol, positive=True)
    threshold = k.number("residual_threshold", 1e-3, positive=True)
    try:
        domain = Domain(*domain_vals)
        domain.axes(h)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    data = CauchyData(*exprs, normal_sign=normal_sign, eps_char=k.number("eps_char", 1e-6, positive=True))
    start = time.perf_counter()
    grid = solve_grid(
        data,
        domain,
        h,
        rtol=rtol,
        atol=atol,
        sweep=k.word("sweep", "y", ("y", "x", "both")),
        guard_threshold=k.number("guard_threshold", 1e-8, positive=True),
    )
    wall = time.perf_counter() - start
    diag = grid.diagnostics
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / str(cfg.get("grid_csv", "grid.csv"))
    json_path = out / str(cfg.get("summary_json", "summary.json"))
    write_grid_csv(csv_path, grid)
    summary: dict[str, Any] = {
        "command": "solve",
        "data": {n: ex.to_text(e) for n, e in zip(names, exprs)},
        "normal_sign": normal_sign,
        "domain": dict(zip(("x_min", "x_max", "y_min", "y_max"), domain_vals)),
        "h": h,
        "nx": int(grid.xs.size),
        "ny": int(grid.ys.size),
        "rtol": rtol,
        "atol": atol,
        "sweep": grid.sweep,
        "max_residual_u": _finite(diag.max_residual_u),
        "max_residual_v": _finite(diag.max_residual_v),
        "max_residual": _finite(diag.max_residual),
        "residual_threshold": threshold,
        "beta1_deviation": _finite(diag.beta1_deviation),
        "alpha1_deviation": _finite(diag.alpha1_deviation),
        "masked_cells": grid.masked_count,
        "events": grid.events,
        "wall_time_s": wall,
        "outputs": {"grid_csv": str(csv_path), "summary_json": str(json_path)},
    }
    if "sweep_discrepancy" in grid.extra:
        summary["sweep_discrepancy"] = _finite(grid.extra["sweep_discrepancy"])
    if reference:
        X, Y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
        ru, rv = REFERENCES[reference][0](X, Y, lam)
        du, dv = np.abs(grid.u - ru), np.abs(grid.v - rv)
        summary["reference"] = {
            "name": reference,
            "lambda": lam,
            "max_deviation_u": _finite(np.nanmax(du)),
            "max_deviation_v": _finite(np.nanmax(dv)),
            "max_deviation": _finite(max(np.nanmax(du), np.nanmax(dv))),
        }
    if k.flag("gnuplot"):
        gp = csv_path.with_suffix(".gp")
        gp.write_text(_gnuplot_script(csv_path.name, "u(x, y)"), encoding="utf-8")
        summary["outputs"]["gnuplot"] = str(gp)
    ok = summary["max_residual"] is not None and summary["max_residual"] <= threshold
    summary["threshold_ok"] = ok
    _write_json(json_path, summary)
    print(f"max residual {diag.max_residual:.3e} (threshold {threshold:g}); wrote {csv_path} and {json_path}")
    return EXIT_OK if ok else EXIT_BREACH


_RICCATI_KEYS = {
    "k1", "k2", "alpha0", "alpha1", "alpha2", "y0", "gamma0", "y_end", "n_out", "tol",
    "particular", "gamma1_reference", "solution_reference", "tolerance", "path_csv", "summary_json",
}  # fmt: skip


def _expr_fn(e: ex.Expression) -> Callable:
    return lambda t: ex.evaluate(e, t)


def cmd_riccati(cfg: dict, out: Path) -> int:
    k = _Keys(cfg, _RICCATI_KEYS)
    if k.has("k1") or k.has("k2"):
        if any(k.has(n) for n in ("alpha0", "alpha1", "alpha2")):
            raise ConfigError("give either k1, k2 or alpha0, alpha1, alpha2, not both")
        k1, k2 = _expr_fn(k.expression("k1", "y")), _expr_fn(k.expression("k2", "y"))
        a0, a1, a2 = (lambda t: 0.5 * k1(t)), (lambda t: 0.25 * k2(t)), 0.5
    else:
        a0, a1, a2 = (_expr_fn(k.expression(n, "y")) for n in ("alpha0", "alpha1", "alpha2"))
    y0, y_end = k.number("y0"), k.number("y_end")
    if y_end == y0:
        raise ConfigError("y_end must differ from y0")
    raw0 = cfg.get("gamma0")
    if isinstance(raw0, str) and raw0.strip().lower() in ("inf", "infinity"):
        gamma0 = math.inf
    else:
        gamma0 = k.number("gamma0")
    n_out = k.integer("n_out", 301)
    if n_out < 2:
        raise ConfigError("n_out must be at least 2")
    tol = k.number("tol", 1e-11, positive=True)
    tolerance = k.number("tolerance", 1e-7, positive=True)
    A = riccati_matrix(a0, a1, a2)
    ys = np.linspace(y0, y_end, n_out)
    path = solve_lie_ivp(A, ProjectivePoint.from_value(gamma0), y0, y_end, tol=tol)
    gamma = path.values(ys)
    summary: dict[str, Any] = {"command": "riccati", "y0": y0, "gamma0": gamma0, "y_end": y_end, "tolerance": tolerance}
    columns = {"y": ys, "gamma": gamma}
    breaches = []
    part = k.expression("particular", "y", required=False)
    red = None
    if part is not None:
        x0, dx0 = _expr_fn(part), _expr_fn(ex.differentiate(part))
        g0, B = lie_reduce(A, x0, (min(y0, y_end), max(y0, y_end)), x0_derivative=dx0)
        red = reduced_quadrature_solution(B, y0, alpha2=a2)
        solution = assemble_reduced_solution(g0, red, y0, gamma0)
        reduced = np.array([solution(float(y)).value for y in ys])
        columns["gamma_reduced"] = reduced
        dist = max(path(float(y)).distance(solution(float(y))) for y in ys)
        finite = np.isfinite(gamma) & np.isfinite(reduced) & (np.abs(gamma) < 1e6)
        dev = float(np.max(np.abs(gamma[finite] - reduced[finite]))) if np.any(finite) else math.nan
        summary["reduction"] = {
            "particular": ex.to_text(part),
            "max_deviation": dev,
            "max_projective_distance": dist,
        }
        if not dev <= tolerance:
            breaches.append("reduction")
    g1_ref = k.expression("gamma1_reference", "y", required=False)
    if g1_ref is not None:
        if red is None:
            raise ConfigError("gamma1_reference needs a particular solution")
        g1 = np.array([red.gamma1(float(y)) for y in ys])
        dev = float(np.max(np.abs(g1 - ex.evaluate(g1_ref, ys))))
        summary["gamma1_max_deviation"] = dev
        columns["gamma1"] = g1
        if not dev <= tolerance:
            breaches.append("gamma1")
    ref = k.expression("solution_reference", "y", required=False)
    if ref is not None:
        with np.errstate(all="ignore"):
            rv = ex.evaluate(ref, ys)
        finite = np.isfinite(gamma) & np.isfinite(rv) & (np.abs(gamma) < 1e6)
        dev = float(np.max(np.abs(gamma[finite] - rv[finite])))
        summary["solution_reference_max_deviation"] = dev
        if not dev <= tolerance:
            breaches.append("solution_reference")
    poles = np.flatnonzero(np.diff(np.sign(path.homogeneous(ys)[:, 1])) != 0)
    summary["pole_intervals"] = [[float(ys[i]), float(ys[i + 1])] for i in poles]
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / str(cfg.get("path_csv", "gamma.csv"))
    json_path = out / str(cfg.get("summary_json", "riccati.json"))
    names = list(columns)
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*(columns[n] for n in names)):
            fh.write(",".join("%.17g" % v for v in row) + "\n")
    summary["breaches"] = breaches
    summary["outputs"] = {"path_csv": str(csv_path), "summary_json": str(json_path)}
    _write_json(json_path, summary)
    print(f"wrote {csv_path} and {json_path}" + (f"; breached: {', '.join(breaches)}" if breaches else ""))
    return EXIT_BREACH if breaches else EXIT_OK


_WEIERSTRASS_KEYS = {
    "f1", "f2", "g1", "g2", "s_min", "s_max", "t_min", "t_max", "n_s", "n_t", "refine",
    "residual_threshold", "sample_csv", "summary_json",
}  # fmt: skip


def cmd_weierstrass(cfg: dict, out: Path) -> int:
    k = _Keys(cfg, _WEIERSTRASS_KEYS)
    s_int = (k.number("s_min"), k.number("s_max"))
    t_int = (k.number("t_min"), k.number("t_max"))
    try:
        data = GeneratingData(
            k.expression("f1", "s"),
            k.expression("f2", "s"),
            k.expression("g1", "t"),
            k.expression("g2", "t"),
            s_int,
            t_int,
            k.integer("n_s", 41),
            k.integer("n_t", 41),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None
    threshold = k.number("residual_threshold", 1e-4, positive=True)
    smp = sample(data)
    report = verify_harmonic(smp, data, refine=k.flag("refine", True))
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / str(cfg.get("sample_csv", "weierstrass.csv"))
    json_path = out / str(cfg.get("summary_json", "weierstrass.json"))
    S, T = np.meshgrid(smp.s, smp.t, indexing="ij")
    cols = [S, T, smp.x, smp.y, smp.u, smp.v, smp.u1, smp.u2, report.residual_u, report.residual_v]
    header = "s,t,x,y,u,v,u1,u2,residual_u,residual_v"
    np.savetxt(csv_path, np.column_stack([c.ravel() for c in cols]), fmt="%.17g", delimiter=",", header=header, comments="")
    summary = {"command": "weierstrass", **report.summary(), "residual_threshold": threshold}
    summary["threshold_ok"] = report.max_residual <= threshold
    summary["outputs"] = {"sample_csv": str(csv_path), "summary_json": str(json_path)}
    _write_json(json_path, summary)
    print(f"max residual {report.max_residual:.3e}; wrote {csv_path} and {json_path}")
    return EXIT_OK if summary["threshold_ok"] else EXIT_BREACH


_VESSIOT_KEYS = {"seed", "n_points", "low", "high", "n_triples", "spread", "tolerance", "group_tolerance", "report_json"}


def cmd_vessiot_check(cfg: dict, out: Path) -> int:
    k = _Keys(cfg, _VESSIOT_KEYS)
    rng = np.random.default_rng(k.integer("seed", 0))
    low, high = k.number("low", 0.6), k.number("high", 1.8)
    tol = k.number("tolerance", 1e-6, positive=True)
    gtol = k.number("group_tolerance", 1e-9, positive=True)
    points = rng.uniform(low, high, (k.integer("n_points", 20), 4))
    reports = [structure_check(n, points, tol) for n in ("R", "rho", "E1", "E2", "Rx")]
    reports.append(cross_commutation("E1", "E2", points, tol))
    reports.append(cross_commutation("R", "Rx", points, tol))
    spread = k.number("spread", 0.2, positive=True)
    n_triples = k.integer("n_triples", 100)
    ident = assoc = 0.0
    for _ in range(n_triples):
        a, b, c = (GroupPoint.of(1.0 + rng.uniform(-spread, spread, 4)) for _ in range(3))
        ident = max(ident, group_law(IDENTITY, a).distance(a), group_law(a, IDENTITY).distance(a))
        assoc = max(assoc, group_law(group_law(a, b), c).distance(group_law(a, group_law(b, c))))
    group = {"identity": list(IDENTITY.as_array()), "identity_max_deviation": ident, "associativity_max_deviation": assoc}
    group["holds"] = ident <= gtol and assoc <= gtol
    printed_ok = all(r.printed_hold for r in reports)
    payload = {
        "command": "vessiot-check",
        "points": {"count": int(points.shape[0]), "low": low, "high": high},
        "tolerance": tol,
        "structure": [r.as_dict() for r in reports],
        "group_law": group,
        "printed_relations_hold": printed_ok,
    }
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / str(cfg.get("report_json", "vessiot.json"))
    _write_json(json_path, payload)
    failing = [res.relation.text for r in reports for res in r.results if res.relation.printed and not res.holds]
    print(f"wrote {json_path}; {len(failing)} printed relation(s) outside {tol:g}")
    return EXIT_OK if printed_ok and group["holds"] else EXIT_BREACH


_VERIFY_KEYS = {"grid", "summary", "residual_threshold", "agreement_tolerance", "report_json"}


def cmd_verify(cfg: dict, out: Path, grid_path: Optional[str] = None) -> int:
    k = _Keys(cfg, _VERIFY_KEYS)
    path = grid_path or cfg.get("grid")
    if not path:
        raise ConfigError("missing grid CSV (config key 'grid' or --grid)")
    gf = read_grid_csv(Path(path))
    h = None
    summary_path = cfg.get("summary")
    stored_summary = None
    if summary_path:
        stored_summary = json.loads(Path(summary_path).read_text(encoding="utf-8"))
        h = stored_summary.get("h")
    if h is None:
        h = (gf.xs[-1] - gf.xs[0]) / (gf.xs.size - 1)
    mask = gf.layers["mask"] != 0
    z = np.full((4,) + mask.shape, np.nan)
    grid = SolutionGrid(gf.xs, gf.ys, float(h), gf.layers["u"], gf.layers["v"], z, mask)
    diag = verify(grid)
    agree = 0.0
    for name, fresh in (("residual_u", diag.residual_u), ("residual_v", diag.residual_v)):
        stored = gf.layers[name]
        both = np.isfinite(stored) & np.isfinite(fresh)
        if np.any(np.isfinite(stored) != np.isfinite(fresh)):
            agree = math.inf
        elif np.any(both):
            agree = max(agree, float(np.max(np.abs(stored[both] - fresh[both]))))
    threshold = k.number("residual_threshold", 1e-3, positive=True)
    agreement_tol = k.number("agreement_tolerance", 1e-12, positive=True)
    report = {
        "command": "verify",
        "grid": str(path),
        "h": float(h),
        "max_residual_u": _finite(diag.max_residual_u),
        "max_residual_v": _finite(diag.max_residual_v),
        "max_residual": _finite(diag.max_residual),
        "stored_residual_max_difference": agree if math.isfinite(agree) else None,
        "residual_threshold": threshold,
        "alpha1_deviation": _finite(diag.alpha1_deviation),
    }
    if stored_summary is not None and stored_summary.get("max_residual") is not None:
        report["summary_max_residual_difference"] = abs(stored_summary["max_residual"] - diag.max_residual)
    ok = (
        report["max_residual"] is not None
        and report["max_residual"] <= threshold
        and math.isfinite(agree)
        and agree <= agreement_tol
    )
    report["threshold_ok"] = ok
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / str(cfg.get("report_json", "verify.json"))
    _write_json(json_path, report)
    print(f"max residual {diag.max_residual:.3e}; stored layers differ by {agree:.3e}; wrote {json_path}")
    return EXIT_OK if ok else EXIT_BREACH


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavemap", description="Cauchy problems and checks for wave maps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (
        ("solve", True),
        ("riccati", True),
        ("weierstrass", True),
        ("vessiot-check", False),
        ("verify", False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config, help="configuration file (key = value lines)")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        if name == "solve":
            p.add_argument("--flip-normal", action="store_true", help="reverse the orientation of the normal")
        if name == "verify":
            p.add_argument("--grid", help="grid CSV written by 'solve' (overrides the config key)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = read_config(args.config) if args.config else {}
        if args.command == "solve":
            return cmd_solve(cfg, out, args.flip_normal)
        if args.command == "riccati":
            return cmd_riccati(cfg, out)
        if args.command == "weierstrass":
            return cmd_weierstrass(cfg, out)
        if args.command == "vessiot-check":
            return cmd_vessiot_check(cfg, out)
        return cmd_verify(cfg, out, args.grid)
    except (
        ConfigError,
        CharacteristicDataError,
        ReductionError,
        GeneratorDomainError,
        IntegrationError,
        ex.ExpressionSyntaxError,
        ArithmeticError,
        OSError,
        ValueError,
    ) as err:
        print(f"wavemap {args.command}: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
