import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavemap.ode import (
    ERFI_MAX_ARG,
    GuardAbort,
    IvpProblem,
    QuadratureError,
    StepBudgetExceeded,
    StepSizeUnderflow,
    cumulative_quad,
    dawson,
    erfi,
    integrate,
    quad,
)

# erfi at 30 significant digits (mpmath), rounded to double
ERFI_ORACLE = {
    0.1: 0.1132151741695998,
    0.5: 0.614952094696511,
    1.0: 1.6504257587975428,
    2.0: 18.564802414575553,
    3.0: 1629.9946226015657,
    5.0: 8298273880.676804,
    10.0: 1.5243074227086696e42,
    20.0: 1.4747975396287862e172,
}
# int_0^1 exp(t^2) dt (mpmath quadrature)
EXP_SQUARE_INTEGRAL = 1.4626517459071815
# Lotka-Volterra y1' = y1 - y1 y2, y2' = y1 y2 - y2 from (2, 1) to t = 5 (mpmath Taylor integrator)
LOTKA_VOLTERRA_T5 = (1.0051293088899067, 0.40638471486782757)


def solve(f, y0, t0, t1, tol=1e-10, **kw):
    return integrate(IvpProblem(f, t0, y0, t1, rtol=tol, atol=tol, **kw))


# ---------------------------------------------------------------- integrate


def test_exponential_flow():
    path = solve(lambda t, y: y, [1.0], 0.0, 1.0)
    assert abs(path(1.0)[0] - math.e) <= 1e-9


def test_zero_field_gives_constant_path():
    path = solve(lambda t, y: np.zeros_like(y), [3.5, -1.0], 0.0, 4.0)
    ts = np.linspace(0.0, 4.0, 17)
    assert np.array_equal(path(ts), np.tile([3.5, -1.0], (17, 1)))


def test_pole_reports_underflow_near_singularity():
    with pytest.raises(StepSizeUnderflow) as info:
        solve(lambda t, y: 1.0 / (1.0 - t) ** 2, [1.0], 0.0, 2.0)
    assert abs(info.value.t - 1.0) < 1e-6
    assert info.value.path.t_end == pytest.approx(info.value.t)


def test_nonlinear_system_against_high_precision_oracle():
    path = solve(lambda t, y: np.array([y[0] - y[0] * y[1], y[0] * y[1] - y[1]]), [2.0, 1.0], 0.0, 5.0, tol=1e-11)
    assert np.max(np.abs(path(5.0) - LOTKA_VOLTERRA_T5)) <= 1e-8


def test_backward_integration():
    path = solve(lambda t, y: -2.0 * t * y, [1.0], 1.0, -1.0)
    assert path.direction == -1.0
    ts = np.linspace(1.0, -1.0, 9)
    assert np.max(np.abs(path(ts)[:, 0] - np.exp(1.0 - ts**2))) <= 1e-9


def test_knots_reproduce_stored_states_exactly():
    path = solve(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], 0.0, 3.0)
    assert np.array_equal(path(path.ts), path.ys)


def test_dense_output_fourth_order_accurate_between_knots():
    path = solve(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], 0.0, 6.0, tol=1e-10)
    ts = np.linspace(0.0, 6.0, 1001)
    assert np.max(np.abs(path(ts)[:, 0] - np.cos(ts))) <= 1e-8


def test_query_outside_span_rejected():
    path = solve(lambda t, y: y, [1.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        path(1.5)


def test_guard_abort_reports_time_and_state():
    with pytest.raises(GuardAbort) as info:
        solve(lambda t, y: np.array([-1.0]), [1.0], 0.0, 3.0, guard=lambda t, y: y[0] > 0)
    err = info.value
    assert err.y[0] <= 0 and 0.9 < err.t <= 3.0
    assert np.all(err.path.ys[:-1, 0] > 0)


def test_step_budget():
    with pytest.raises(StepBudgetExceeded):
        solve(lambda t, y: np.array([y[1], -400.0 * y[0]]), [1.0, 0.0], 0.0, 50.0, max_steps=20)


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        IvpProblem(lambda t, y: y, 0.0, [1.0], 1.0, rtol=0.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_reversibility(t1, a, b):
    tol = 1e-10

    def f(t, y):
        return np.array([y[1], -math.sin(y[0]) + 0.1 * math.cos(t)])

    y0 = np.array([a, b])
    forward = solve(f, y0, 0.0, t1, tol)
    back = solve(f, forward(t1), t1, 0.0, tol)
    assert np.max(np.abs(back(0.0) - y0)) <= 10 * tol * max(1.0, np.abs(y0).max())


def test_oscillator_energy_drift():
    path = solve(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], 0.0, 20.0, tol=1e-10)
    ts = np.linspace(0.0, 20.0, 2001)
    ys = path(ts)
    assert np.max(np.abs(ys[:, 0] ** 2 + ys[:, 1] ** 2 - 1.0)) < 1e-8


def test_projection_applied_to_accepted_states():
    path = solve(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], 0.0, 5.0, project=lambda y: y / np.linalg.norm(y))
    assert np.max(np.abs(np.linalg.norm(path.ys, axis=1) - 1.0)) <= 1e-15


# ---------------------------------------------------------------- quad


def test_quad_examples():
    assert quad(lambda x: np.ones_like(x), 0.0, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert quad(lambda x: x, 0.0, 1.0) == pytest.approx(0.5, abs=1e-14)


def test_quad_exp_square_against_erfi_route():
    value = quad(lambda t: np.exp(t * t), 0.0, 1.0, tol=1e-14)
    assert abs(value - EXP_SQUARE_INTEGRAL) <= 1e-14
    assert abs(value - 0.5 * math.sqrt(math.pi) * erfi(1.0)) <= 1e-14


def test_quad_reversed_limits_and_scalar_integrand():
    assert quad(math.sin, math.pi, 0.0, tol=1e-13) == pytest.approx(-2.0, abs=1e-13)


def test_quad_hard_integrand():
    assert quad(lambda x: np.sqrt(x), 0.0, 1.0, tol=1e-10) == pytest.approx(2.0 / 3.0, abs=1e-10)


def test_quad_non_convergence():
    with pytest.raises(QuadratureError):
        quad(lambda x: 1.0 / x, 0.0, 1.0, tol=1e-12, max_intervals=50)


def test_cumulative_quad_matches_single_integrals():
    knots = np.linspace(0.0, 3.0, 31)
    run = cumulative_quad(lambda t: np.exp(t * t / 4) * np.cos(3 * t), knots, tol=1e-12)
    assert run[0] == 0.0
    for k in (5, 17, 30):
        assert run[k] == pytest.approx(quad(lambda t: np.exp(t * t / 4) * np.cos(3 * t), 0.0, knots[k], 1e-13), abs=1e-11)


def test_cumulative_quad_backwards():
    knots = np.linspace(1.0, -1.0, 11)
    run = cumulative_quad(lambda t: t**2, knots)
    assert np.max(np.abs(run - (knots**3 - 1.0) / 3.0)) <= 1e-14


# ---------------------------------------------------------------- erfi


def test_erfi_zero():
    assert erfi(0.0) == 0.0


@pytest.mark.parametrize("x", sorted(ERFI_ORACLE))
def test_erfi_against_high_precision_values(x):
    assert erfi(x) == pytest.approx(ERFI_ORACLE[x], rel=1e-12)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.0, 3.0, 5.0])
def test_erfi_against_quadrature_of_definition(x):
    value = 2.0 / math.sqrt(math.pi) * quad(lambda t: np.exp(t * t), 0.0, x, tol=1e-14 * max(1.0, ERFI_ORACLE[x]))
    assert erfi(x) == pytest.approx(value, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, ERFI_MAX_ARG))
def test_erfi_odd(x):
    assert erfi(-x) == -erfi(x)


def test_erfi_against_scipy_oracle():
    special = pytest.importorskip("scipy.special")
    xs = np.concatenate([np.linspace(-26.0, 26.0, 2000), 3.0 + np.linspace(-1e-6, 1e-6, 21)])
    assert np.max(np.abs(erfi(xs) / special.erfi(xs) - 1.0)) <= 1e-12
    assert np.max(np.abs(dawson(xs) - special.dawsn(xs))) <= 1e-14


def test_erfi_continuous_across_series_switch():
    # the jump over a 2e-12 gap is the slope 2 exp(9)/sqrt(pi) times the gap
    lo, hi = erfi(3.0 - 1e-12), erfi(3.0 + 1e-12)
    slope = 2.0 * math.exp(9.0) / math.sqrt(math.pi)
    assert abs((hi - lo) - 2e-12 * slope) / lo < 1e-11


def test_erfi_overflow():
    assert math.isfinite(erfi(ERFI_MAX_ARG))
    with pytest.raises(OverflowError):
        erfi(27.0)
