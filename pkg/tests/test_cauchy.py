import math

import numpy as np
import pytest

from problems import (
    EXAMPLE1,
    SQRT2,
    constant_data,
    constant_k,
    example1_u,
    example2_data,
    example2_uv,
    random_cubic_data,
)
from wavemap.cauchy import (
    CauchyData,
    CharacteristicDataError,
    Domain,
    Jet2,
    SolutionGrid,
    compute_coefficients,
    lie_rhs,
    lie_rhs_x,
    lift_state,
    paper_k_formulas,
    prolong,
    solve_grid,
    solve_riccati_path,
    verify,
)
from wavemap.vessiot import cauchy_vector

WORKED = CauchyData("0", "0", "-2*sqrt2", "2*sqrt2*x")
CUBIC = CauchyData("0.1*x - 0.2*x^3", "0.3*x^2", "1.2 + 0.2*x - 0.1*x^2", "-1.1 + 0.25*x^3")


def grid_from_layers(xs, ys, u, v):
    h = xs[1] - xs[0]
    z = np.stack([np.exp(u / 2), np.exp(v / 2), np.zeros_like(u), np.zeros_like(u)])
    return SolutionGrid(xs, ys, h, u, v, z, np.zeros(u.shape, bool))


# ---------------------------------------------------------------- prolong / lift_state


def test_prolong_example1():
    jet = prolong(EXAMPLE1, 0.3)
    assert (jet.u_x, jet.u_y, jet.v_x, jet.v_y) == pytest.approx((1.0, -1.0, 1.0, -1.0), abs=1e-15)


@pytest.mark.parametrize("x", [0.2, 0.7, 1.5])
def test_prolong_worked_data(x):
    assert prolong(WORKED, x).u_y == pytest.approx(2.0, abs=1e-15)


def test_prolong_zero_data_is_characteristic():
    with pytest.raises(CharacteristicDataError) as info:
        prolong(CauchyData(0, 0, 0, 0), 0.0)
    assert info.value.x == 0.0


def test_characteristic_margin_configurable():
    data = CauchyData("0", "0", "sqrt2", "1e-4*sqrt2")
    prolong(data, 0.0)
    with pytest.raises(CharacteristicDataError):
        prolong(CauchyData("0", "0", "sqrt2", "1e-4*sqrt2", eps_char=1e-3), 0.0)


@pytest.mark.parametrize("x", [-0.4, 0.0, 0.35])
def test_jet_satisfies_pde_and_chain_rule(x):
    jet = prolong(CUBIC, x)
    damping = 2.0 * (1.0 + math.exp(0.5 * (jet.u + jet.v)))
    assert jet.u_xy == pytest.approx(-jet.u_x * jet.u_y / damping, rel=1e-14)
    assert jet.v_xy == pytest.approx(-jet.v_x * jet.v_y / damping, rel=1e-14)
    h = 1e-5
    lo, hi = prolong(CUBIC, x - h), prolong(CUBIC, x + h)
    for first, pure, mixed in (("u_x", "u_xx", "u_xy"), ("u_y", "u_yy", "u_xy"), ("v_x", "v_xx", "v_xy"), ("v_y", "v_yy", "v_xy")):
        along = (getattr(hi, first) - getattr(lo, first)) / (2 * h)
        assert getattr(jet, pure) + getattr(jet, mixed) == pytest.approx(along, abs=1e-8)


def test_prolong_first_order_from_tangent_and_normal():
    x = 0.25
    jet = prolong(CUBIC, x)
    dphi1 = 0.1 - 0.6 * x**2
    psi1 = 1.2 + 0.2 * x - 0.1 * x**2
    assert jet.u_x + jet.u_y == pytest.approx(dphi1, abs=1e-15)
    assert (jet.u_x - jet.u_y) / SQRT2 == pytest.approx(psi1, abs=1e-15)


def test_flipped_normal_equals_negated_normal_data():
    flipped = CauchyData("0.1*x", "0.3*x^2", "-1.2", "1.1", normal_sign=-1.0)
    plain = CauchyData("0.1*x", "0.3*x^2", "1.2", "-1.1")
    assert prolong(flipped, 0.4) == prolong(plain, 0.4)


def test_lift_state_examples():
    assert lift_state(prolong(EXAMPLE1, 0.0)).as_array() == pytest.approx([1, 1, -1, 1], abs=1e-15)
    lam = 2.0
    z = lift_state(prolong(example2_data(lam), -0.5)).as_array()
    assert z == pytest.approx([lam, 1 / lam, -1 / SQRT2, 1 / SQRT2], abs=1e-15)
    jet = Jet2(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0, 0, 0, 0, 0, 0)
    assert lift_state(jet).as_array().tolist() == [1.0, 1.0, 1.0, 1.0]


# ---------------------------------------------------------------- coefficients


def test_coefficients_example1():
    c = compute_coefficients(EXAMPLE1)
    assert c.exact
    assert (c.k1(0.3), c.k2(0.3)) == pytest.approx((0.5, 0.0), abs=1e-15)


def test_coefficients_example2():
    c = compute_coefficients(example2_data(2.0))
    assert (c.k1(-0.9), c.k2(-0.9)) == pytest.approx((0.25, 0.0), abs=1e-15)


@pytest.mark.parametrize("l1,l2,a,b", [(0.5, 2.0, -1.0, 0.5), (1.0, 1.0, 1.0, 1.0), (2.0, 0.5, 1.0, -1.0)])
def test_coefficients_constant_formula(l1, l2, a, b):
    c = compute_coefficients(constant_data(l1, l2, a, b))
    k1, k2 = constant_k(l1, l2, a, b)
    assert abs(c.k1(0.0) - k1) <= 1e-12 and abs(c.k2(0.0) - k2) <= 1e-12


def test_coefficients_vectorised_and_b2():
    c = compute_coefficients(WORKED, (0.5, 2.0), 0.005)
    ys = np.linspace(0.5, 2.0, 40)
    assert np.max(np.abs(c.k1(ys) + 2 * ys)) <= 1e-12
    # jet consistency gives k2 = y + 1 for these data (the printed value is -y - 1)
    assert np.max(np.abs(c.k2(ys) - (ys + 1))) <= 1e-10
    assert np.max(np.abs(c.b2(ys) + 2.0)) <= 1e-10
    assert np.max(np.abs(c.zeta(ys) - 2.0)) <= 1e-12


def test_coefficients_interpolation_accuracy():
    c = compute_coefficients(CUBIC, (-0.5, 0.5), 0.005)
    assert not c.exact
    for y in np.linspace(-0.5, 0.5, 37):
        jet = prolong(CUBIC, y)
        k1 = jet.u_y * jet.v_y / (1 + math.exp(-(jet.u + jet.v) / 2))
        k2 = (2 * jet.u_yy - k1 + jet.u_y**2) / jet.u_y
        a1 = jet.u_x * jet.v_x / (1 + math.exp(-(jet.u + jet.v) / 2))
        a3 = (2 * jet.v_xx - a1 + jet.v_x**2) / jet.v_x
        assert c.k1(y) == pytest.approx(k1, abs=1e-9)
        assert c.k2(y) == pytest.approx(k2, abs=1e-9)
        assert c.a1(y) == pytest.approx(a1, abs=1e-9)
        assert c.a3(y) == pytest.approx(a3, abs=1e-9)


def test_k2_makes_column_equation_hold_on_jet():
    c = compute_coefficients(CUBIC, (-0.5, 0.5), 0.005)
    for y in (-0.3, 0.1, 0.4):
        jet = prolong(CUBIC, y)
        z3p = 0.5 * (c.k1(y) + c.k2(y) * jet.u_y - jet.u_y**2)
        assert z3p == pytest.approx(jet.u_yy, abs=1e-9)


def test_coefficients_reject_characteristic_interval():
    with pytest.raises(CharacteristicDataError):
        compute_coefficients(WORKED, (-1.0, 1.0))


# ---------------------------------------------------------------- printed k formulas


def test_printed_k_formulas_example1():
    rep = paper_k_formulas(EXAMPLE1, np.linspace(-1, 1, 11))
    assert np.max(np.abs(rep.k1 - 0.5)) <= 1e-14
    assert rep.max_deviation["k1"] <= 1e-14


def test_printed_k_formulas_worked_data():
    mesh = np.linspace(0.5, 2.0, 13)
    rep = paper_k_formulas(WORKED, mesh)
    assert np.max(np.abs(rep.k1 + 2 * mesh)) <= 1e-13
    assert rep.max_deviation["k1"] <= 1e-13
    # the printed k2 formula disagrees with the jet value on these data
    assert rep.max_deviation["k2"] > 1.0
    assert np.max(np.abs(rep.k2 - (2 * mesh**2 + mesh - 1))) <= 1e-12


# ---------------------------------------------------------------- Lie system right-hand sides


def test_lie_rhs_example():
    assert lie_rhs(0.5, 0.0)(0.0, np.array([1.0, 1.0, -1.0, 1.0])) == pytest.approx([-0.5, -0.5, -0.25, 0.25])


def test_lie_rhs_without_k1(rng):
    f = lie_rhs(0.0, lambda y: 3 * y)
    for _ in range(10):
        z = rng.uniform(0.5, 2.0, 4)
        out = f(rng.uniform(-1, 1), z)
        assert out[1] == 0.0 and out[3] == 0.0


def test_lie_rhs_matches_cauchy_vector(rng):
    for _ in range(100):
        k1, k2 = rng.uniform(-2, 2, 2)
        z = rng.uniform(0.5, 2.0, 4) * rng.choice([-1, 1], 4) * [1, 1, 1, 1]
        z[:2] = np.abs(z[:2])
        assert np.max(np.abs(lie_rhs(k1, k2)(0.0, z) - cauchy_vector(k1, k2, z))) <= 1e-12


def test_row_system_is_swapped_column_system(rng):
    swap = [1, 0, 3, 2]
    for _ in range(20):
        a1, a3 = rng.uniform(-2, 2, 2)
        z = rng.uniform(0.5, 2.0, 4)
        row = lie_rhs_x(a1, a3)(0.0, z)
        col = lie_rhs(a1, a3)(0.0, z[swap])
        assert np.max(np.abs(row - col[swap])) <= 1e-15


# ---------------------------------------------------------------- solve_grid


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain(1.0, -1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Domain(-1, 1, -1, 1).axes(0.0)
    with pytest.raises(ValueError):
        Domain(-1, 1, -1, 1).axes(0.3)


def test_example1_grid_matches_closed_form(example1_grid):
    g = example1_grid
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    ref = example1_u(X, Y)
    assert g.masked_count == 0
    assert np.max(np.abs(g.u - ref)) <= 1e-6
    assert np.max(np.abs(g.v - g.u)) <= 1e-6


def test_example2_grid_matches_closed_form(example2_grid):
    g = example2_grid
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    u, v = example2_uv(X, Y, 2.0)
    assert np.max(np.abs(g.u - u)) <= 1e-6
    assert np.max(np.abs(g.v - v)) <= 1e-6


def test_grid_layer_identities(example2_grid):
    g = example2_grid
    assert np.array_equal(g.u1, g.u + g.v) and np.array_equal(g.u2, g.u - g.v)
    assert np.array_equal(g.u, 2 * np.log(g.z[0])) and np.array_equal(g.v, 2 * np.log(g.z[1]))


def test_diagonal_reproduces_data():
    g = solve_grid(CUBIC, (-0.5, 0.5, -0.5, 0.5), 0.02)
    on_diag = np.isclose(g.xs[:, None], g.ys[None, :], rtol=0, atol=0)
    i, j = np.nonzero(on_diag)
    assert i.size == g.xs.size
    x = g.xs[i]
    # u passes through z1 = exp(u/2) and back, so allow a few ulp
    eps = 4 * np.finfo(float).eps
    assert np.max(np.abs(g.u[i, j] - (0.1 * x - 0.2 * x**3))) <= eps
    assert np.max(np.abs(g.v[i, j] - 0.3 * x**2)) <= eps


def test_one_sided_differences_reproduce_normal_derivative():
    # psi1 = (u_x - u_y)/sqrt2 from the node pair (x+h, x) and (x, x+h) is accurate to O(h)
    errs = []
    for h in (0.04, 0.02):
        g = solve_grid(CUBIC, (-0.5, 0.5, -0.5, 0.5), h)
        k = np.arange(2, g.xs.size - 2)
        u = g.u
        # (u(x+h, x) - u(x, x+h)) / h approximates u_x - u_y at (x, x)
        psi = (u[k + 1, k] - u[k, k + 1]) / h / SQRT2
        x = g.xs[k]
        errs.append(np.max(np.abs(psi - (1.2 + 0.2 * x - 0.1 * x**2))))
    assert errs[1] <= 0.6 * errs[0] and errs[1] <= 0.05


def test_row_sweep_agrees_with_column_sweep(example1_grid, example2_grid):
    for g in (example1_grid, example2_grid):
        assert g.sweep == "both"
        assert g.extra["sweep_discrepancy"] <= 1e-6
        assert g.extra["row_grid"].sweep == "x"


def test_parallel_columns_identical():
    serial = solve_grid(CUBIC, (-0.5, 0.5, -0.5, 0.5), 0.05, workers=1)
    parallel = solve_grid(CUBIC, (-0.5, 0.5, -0.5, 0.5), 0.05, workers=2)
    assert np.array_equal(serial.u, parallel.u) and np.array_equal(serial.v, parallel.v)


def test_blow_up_masks_cells_and_records_events():
    g = solve_grid(EXAMPLE1, (-1.5, 1.5, -1.5, 1.5), 0.1)
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    # the closed form has z1 = 0 at x - y = -2 atanh(1/sqrt2) / (sqrt2/4) ~ -2.49
    beyond = (X - Y) < -2.49
    assert g.masked_count > 0
    assert np.array_equal(g.mask, beyond)
    assert np.all(np.isnan(g.u[g.mask])) and np.all(np.isfinite(g.u[~g.mask]))
    assert len(g.events) == int(np.any(beyond, axis=1).sum())
    assert np.max(np.abs(g.u[~g.mask] - example1_u(X, Y)[~g.mask])) <= 1e-5


def test_guard_threshold_masks_small_z3():
    # |u_y| = 1/sqrt2 throughout, so a threshold of 0.9 trips at the first step
    g = solve_grid(example2_data(2.0), (-0.5, 0.5, -0.5, 0.5), 0.1, guard_threshold=0.9)
    assert g.masked_count > 0
    assert any("GuardAbort" in e for e in g.events)


def test_sweep_argument_validated():
    with pytest.raises(ValueError):
        solve_grid(EXAMPLE1, (-0.5, 0.5, -0.5, 0.5), 0.1, sweep="z")


# ---------------------------------------------------------------- Riccati route


@pytest.fixture(scope="module")
def riccati_example1(example1_grid):
    return solve_riccati_path(EXAMPLE1, (-1, 1, -1, 1), 0.01, reference=example1_grid)


def test_riccati_route_u_matches_grid(riccati_example1, example1_grid):
    r = riccati_example1
    inner = (slice(2, -2), slice(2, -2))
    assert np.max(np.abs(r.u[inner] - example1_grid.u[inner])) <= 1e-5
    assert r.extra["path_discrepancy"] <= 1e-5


def test_riccati_route_recovers_v_equal_u(riccati_example1):
    r = riccati_example1
    inner = (slice(2, -2), slice(2, -2))
    assert np.all(np.isfinite(r.v[inner]))
    assert np.max(np.abs(r.v[inner] - r.u[inner])) <= 1e-4


def test_riccati_route_initial_gamma(riccati_example1):
    r = riccati_example1
    i = np.arange(r.xs.size)
    assert np.max(np.abs(r.z[2][i, i] + 1.0)) <= 1e-15


def test_riccati_route_masks_beyond_pole():
    r = solve_riccati_path(EXAMPLE1, (-1.5, 1.5, -1.5, 1.5), 0.1)
    X, Y = np.meshgrid(r.xs, r.ys, indexing="ij")
    assert not np.any(r.extra["u_valid"][(X - Y) < -2.49])
    assert any("pole" in e for e in r.events)


def test_path_equivalence_on_cubic_data():
    dom = (-0.5, 0.5, -0.5, 0.5)
    g = solve_grid(CUBIC, dom, 0.02, rtol=1e-11)
    r = solve_riccati_path(CUBIC, dom, 0.02, rtol=1e-11, quad_tol=1e-12, reference=g)
    assert r.extra["path_discrepancy"] <= 10 * (1e-11 + 1e-12) * 100  # the u layer is O(1) in size


# ---------------------------------------------------------------- verify


def test_verify_closed_form_convergence():
    res = []
    for h in (0.02, 0.01):
        xs = np.round(np.arange(-0.5, 0.5 + h / 2, h), 12)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        u = example1_u(X, Y)
        res.append(verify(grid_from_layers(xs, xs, u, u)).max_residual)
    assert res[0] / res[1] >= 3.5


def test_verify_constant_fields():
    xs = np.linspace(0, 1, 11)
    c = np.full((11, 11), 0.37)
    d = verify(grid_from_layers(xs, xs, c, c))
    assert d.max_residual == 0.0
    assert d.alpha1_deviation == 0.0


def test_verify_needs_five_nodes():
    xs = np.linspace(0, 1, 4)
    c = np.zeros((4, 4))
    with pytest.raises(ValueError):
        verify(grid_from_layers(xs, xs, c, c))


def test_first_integrals_example1(example1_grid):
    d = example1_grid.diagnostics
    assert d.beta1_deviation <= 1e-6
    assert d.alpha1_deviation <= 1e-6
    assert d.beta1_row_spread <= 1e-6


def test_first_integral_alpha1_equals_a1():
    g = solve_grid(CUBIC, (-0.5, 0.5, -0.5, 0.5), 0.01, rtol=1e-11)
    c = compute_coefficients(CUBIC, (-0.5, 0.5), 0.005)
    h = g.h
    u, v = g.u, g.v
    d1 = lambda f: (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)  # noqa: E731
    alpha1 = d1(u) * d1(v) / (1 + np.exp(-(u[2:-2] + v[2:-2]) / 2))
    assert np.max(np.abs(alpha1 - c.a1(g.xs[2:-2])[:, None])) <= 1e-6
    assert g.diagnostics.beta1_deviation <= 1e-6
    assert g.diagnostics.alpha1_deviation <= 1e-6


def test_residual_second_order_on_cubic_data():
    dom = (-0.5, 0.5, -0.5, 0.5)
    coarse = solve_grid(CUBIC, dom, 0.02, rtol=1e-12).diagnostics.max_residual
    fine = solve_grid(CUBIC, dom, 0.01, rtol=1e-12).diagnostics.max_residual
    assert 3.2 <= coarse / fine <= 4.8


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3))
def test_residual_convergence_random_cubic(seed):
    data = random_cubic_data(np.random.default_rng(1000 + seed))
    dom = (-0.5, 0.5, -0.5, 0.5)
    coarse = solve_grid(data, dom, 0.02, rtol=1e-12).diagnostics.max_residual
    fine = solve_grid(data, dom, 0.01, rtol=1e-12).diagnostics.max_residual
    assert 3.2 <= coarse / fine <= 4.8
