import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpkverify.errors import NonIntegrableDriftError
from fpkverify.fpk import (
    TestFunction as BumpTestFunction,
    default_battery,
    l1_distance,
    lyapunov_check,
    residual_check,
    solve,
    solve_1d_explicit,
    solve_grid,
)
from fpkverify.measure import (
    DensityFn,
    build_grid,
    constant_drift,
    gaussian_density,
    GaussianSpec,
    integrate,
    linear_drift,
    make_drift,
    piecewise_drift,
    saturating_drift,
    shift_to_precision,
    sine_drift,
    zero_drift,
)

GH80 = build_grid(1, 80)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def test_zero_drift_gives_constant_density():
    sol = solve_1d_explicit(zero_drift(1), GH80)
    assert np.all(sol.f.values == 1.0) and sol.v_l1_mu == 0.0
    assert sol.residual <= 1e-12


def test_shift_solution_closed_form():
    c = 0.5
    sol = solve_1d_explicit(constant_drift([c]), GH80)
    x = GH80.nodes[:, 0]
    assert np.allclose(sol.f.values, np.exp(c * x - c * c / 2), rtol=1e-12)
    assert sol.residual <= 1e-10
    assert sol.v_l1_mu == pytest.approx(c, abs=1e-12)


def test_linear_solution_closed_form():
    sol = solve_1d_explicit(linear_drift([[1.0]]), GH80)
    x = GH80.nodes[:, 0]
    assert np.allclose(sol.f.values, math.sqrt(2.0) * np.exp(-x * x / 2), rtol=1e-12)
    # |x| under N(0, 1/2)
    assert sol.v_l1_mu == pytest.approx(SQRT_2_OVER_PI / math.sqrt(2.0), abs=1e-12)


def test_frozen_v_l1_oracles():
    # frozen from independent adaptive quadrature of |v| exp(P) against the Gaussian
    assert solve_1d_explicit(saturating_drift(2.0), GH80).v_l1_mu == pytest.approx(0.6268, abs=5e-5)
    assert solve_1d_explicit(piecewise_drift(), GH80).v_l1_mu == pytest.approx(0.7781, abs=5e-5)


def test_v_l1_against_scipy_quad():
    from scipy.integrate import quad

    v = sine_drift(1.0, 1.0)
    sol = solve_1d_explicit(v, GH80)
    # P(x) = 1 - cos(x) is the potential of sin
    w = lambda x: math.exp(1.0 - math.cos(x) - x * x / 2)  # noqa: E731
    mass = quad(w, -np.inf, np.inf)[0]
    val = quad(lambda x: abs(math.sin(x)) * w(x), -np.inf, np.inf, limit=200)[0] / mass
    assert sol.v_l1_mu == pytest.approx(val, abs=1e-8)


def test_non_integrable_drift_is_rejected():
    with pytest.raises(NonIntegrableDriftError):
        solve_1d_explicit(linear_drift([[-2.0]]), GH80)


def test_mass_and_residual_invariants():
    for v in (constant_drift([1.0]), linear_drift([[3.0]]), piecewise_drift(), saturating_drift(2.0)):
        sol = solve_1d_explicit(v, GH80)
        assert np.all(sol.f.values >= 0)
        assert abs(sol.f.mass() - 1.0) <= max(1e-10, sol.f.tolerance)
        assert sol.residual <= 1e-10


def test_scaling_drift_to_zero_gives_one():
    sol = solve_1d_explicit(saturating_drift(2.0).scaled(0.0), GH80)
    assert np.all(sol.f.values == 1.0)


def test_test_function_derivatives_match_finite_differences():
    phi = BumpTestFunction((2,), 3.0, (0.5,))
    x = np.linspace(-2, 3, 11)[:, None]
    h = 1e-5
    val, grad, lap = phi.derivatives(x)
    vp, _, _ = phi.derivatives(x + h)
    vm, _, _ = phi.derivatives(x - h)
    assert np.allclose(grad[:, 0], (vp - vm) / (2 * h), atol=1e-6)
    assert np.allclose(lap, (vp - 2 * val + vm) / h**2, atol=1e-3)


def test_battery_sizes():
    assert len(default_battery(1)) == 25
    assert len(default_battery(2)) == 25


def test_residual_of_wrong_density_is_large():
    sol = solve_1d_explicit(constant_drift([0.5]), GH80)
    wrong = solve_1d_explicit(constant_drift([0.7]), GH80)
    mixed = type(sol)(wrong.f, sol.v, sol.v_l1_mu, 0.0, "explicit")
    assert residual_check(mixed) > 1e-3


def test_grid_matches_explicit_with_refinement():
    errs = []
    for n in (81, 161, 321):
        grid = build_grid(1, n, "uniform-truncated", 8.0)
        v = saturating_drift(2.0)
        g = solve_grid(v, grid)
        e = solve_1d_explicit(v, grid, compute_residual=False)
        errs.append(l1_distance(g.f, e.f.values))
    assert errs[1] <= 1e-3
    assert errs[1] <= errs[0] / 2 and errs[2] <= errs[1] / 2


def test_grid_exact_for_constant_drift():
    grid = build_grid(1, 161, "uniform-truncated", 8.0)
    g = solve_grid(constant_drift([0.5]), grid)
    assert integrate(grid, np.abs(g.f.values - np.exp(0.5 * grid.nodes[:, 0] - 0.125))) < 1e-9


def test_grid_2d_zero_and_linear_and_shift():
    grid = build_grid(2, 161, "uniform-truncated", 8.0)
    zero = solve_grid(zero_drift(2), grid)
    assert integrate(grid, np.abs(zero.f.values - 1.0)) < 1e-6

    B = np.diag([1.0, 2.0])
    lin = solve_grid(shift_to_precision(B), grid)
    exact = gaussian_density(GaussianSpec.from_precision(B), grid.nodes) / gaussian_density(
        GaussianSpec.standard(2), grid.nodes
    )
    assert integrate(grid, np.abs(lin.f.values - exact)) <= 1e-3
    assert lin.residual <= 1e-5
    assert abs(lin.f.mass() - 1.0) <= 1e-6

    shift = solve_grid(constant_drift([0.3, 0.0]), grid)
    exact = np.exp(0.3 * grid.nodes[:, 0] - 0.045)
    assert integrate(grid, np.abs(shift.f.values - exact)) <= 1e-6
    assert shift.residual <= 1e-5


def test_grid_with_precision_reference():
    B = GaussianSpec.from_precision(np.diag([2.0, 3.0]))
    grid = build_grid(2, 161, "uniform-truncated", 8.0, gaussian=B)
    sol = solve_grid(constant_drift([0.3, 0.0]), grid)
    x = grid.nodes
    # mu = N(B^{-1} c, B^{-1}) relative to gamma_B: exp(<c, x> - <c, B^{-1} c>/2)
    exact = np.exp(0.3 * x[:, 0] - 0.5 * 0.09 / 2.0)
    assert integrate(grid, np.abs(sol.f.values - exact)) <= 1e-6


def test_solve_dispatch_and_serialization_round_trip():
    sol = solve(constant_drift([0.5]), GH80)
    assert sol.solver.startswith("explicit")
    data = json.loads(json.dumps(sol.to_dict()))
    f = DensityFn.from_dict(data)
    v = constant_drift([0.5])
    again = integrate(f.grid, np.linalg.norm(v(f.grid.nodes), axis=1) * f.values)
    assert again == pytest.approx(sol.v_l1_mu, abs=1e-8)


def test_lyapunov_examples():
    sample = build_grid(1, 401, "uniform-truncated", 8.0)
    assert not lyapunov_check(zero_drift(1), sample).valid
    cert = lyapunov_check(saturating_drift(2.0), sample)
    assert cert.valid and math.isfinite(cert.C)
    sol = solve_1d_explicit(saturating_drift(2.0), GH80)
    assert sol.v_l1_mu <= cert.C + 1e-6


@given(st.floats(0.5, 5.0))
def test_lyapunov_certificate_consistency(k):
    sample = build_grid(1, 401, "uniform-truncated", 8.0)
    v = linear_drift([[k]])
    cert = lyapunov_check(v, sample)
    if cert.valid:
        x = sample.nodes
        G = (1.0 + v(x)[:, 0] * x[:, 0]) * np.exp(x[:, 0] ** 2 / 2) + np.abs(v(x)[:, 0])
        assert np.all(G <= cert.C * (1 + 1e-12))
        assert solve_1d_explicit(v, GH80).v_l1_mu <= cert.C + 1e-6


def test_make_drift_solves_in_product_form():
    d = make_drift("product", factors=[{"family": "constant", "c": [0.25]}, {"family": "constant", "c": [0.5]}])
    grid = build_grid(2, 81, "uniform-truncated", 8.0)
    sol = solve_grid(d, grid, compute_residual=False)
    exact = np.exp(0.25 * grid.nodes[:, 0] + 0.5 * grid.nodes[:, 1] - (0.25**2 + 0.25) / 2)
    assert integrate(grid, np.abs(sol.f.values - exact)) < 1e-8
