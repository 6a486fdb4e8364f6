import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.stats import norm

from fpkverify.entropy import (
    OrliczContext,
    entropy_alpha,
    entropy_sqrt_J,
    holder_interpolation_bound,
    luxemburg_norm,
    orlicz,
    tail_distribution,
)
from fpkverify.errors import BracketError, DomainError
from fpkverify.measure import DensityFn, build_grid, integrate
from fpkverify.semigroup import SemigroupParams, apply_Tt

GRID = build_grid(1, 80)
SHIFT1 = DensityFn.from_callable(GRID, lambda x: np.exp(x[:, 0] - 0.5), probability=True)


def shift(c):
    return DensityFn.from_callable(GRID, lambda x: np.exp(c * x[:, 0] - 0.5 * c * c), probability=True)


def test_entropy_constants():
    one = DensityFn.constant(GRID, 1.0)
    for a in (0.1, 0.2, 0.5):
        assert entropy_alpha(one, a) == pytest.approx(math.log(2.0) ** a, abs=1e-14)
    assert entropy_alpha(DensityFn.constant(GRID, 0.0), 0.2) == 0.0


def test_entropy_rejects_negative_values():
    with pytest.raises(DomainError):
        entropy_alpha(np.array([1.0, -0.5] + [1.0] * 78), 0.2, GRID)


def test_entropy_shift_monte_carlo():
    rng = np.random.default_rng(11)
    z = rng.standard_normal(10_000_000)
    f = np.exp(z - 0.5)
    s = orlicz(f, 0.2)
    est, se = s.mean(), s.std() / math.sqrt(z.size)
    assert abs(entropy_alpha(SHIFT1, 0.2) - est) <= 3 * se


def test_J_examples():
    one = DensityFn.constant(GRID, 1.0)
    assert entropy_sqrt_J(one, 0.3) == pytest.approx(math.sqrt(math.log(2.0)), abs=1e-14)
    J = entropy_sqrt_J(shift(0.5), 0.25)
    assert J < math.sqrt(math.log(2.0)) + 0.5 / (2 * math.sqrt(0.25))
    with pytest.raises(ValueError):
        entropy_sqrt_J(one, 1.5)


def test_luxemburg_zero_and_oracle():
    ctx = OrliczContext(0.2, GRID)
    assert luxemburg_norm(np.zeros(GRID.size), ctx) == 0.0
    oracle = brentq(lambda s: (1 / s) * math.log(1 / s + 1) ** 0.2 - 1.0, 0.1, 10.0, xtol=1e-15)
    assert luxemburg_norm(np.ones(GRID.size), ctx) == pytest.approx(oracle, rel=1e-9)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_luxemburg_homogeneity(lam):
    ctx = OrliczContext(0.2, GRID)
    base = luxemburg_norm(SHIFT1, ctx)
    assert luxemburg_norm(lam * SHIFT1.values, ctx) == pytest.approx(lam * base, rel=1e-9)


def test_luxemburg_handles_huge_far_field_values():
    big = shift(2.0)
    ctx = OrliczContext(0.2, GRID)
    val = luxemburg_norm(big, ctx)
    w = GRID.weights
    assert np.dot(w, orlicz(big.values / val, 0.2)) == pytest.approx(1.0, abs=1e-8)


def test_user_bracket_expansion_and_failure():
    g = np.ones(GRID.size)
    ctx = OrliczContext(0.2, GRID, bracket=(1.0, 2.0))  # gauge below 1: lower end must expand
    assert luxemburg_norm(g, ctx) == pytest.approx(luxemburg_norm(g, OrliczContext(0.2, GRID)), rel=1e-9)
    far = OrliczContext(0.2, GRID, bracket=(1e9, 2e9))
    with pytest.raises(BracketError):
        luxemburg_norm(g, far)


def test_context_validation():
    with pytest.raises(ValueError):
        OrliczContext(0.0, GRID)
    with pytest.raises(ValueError):
        OrliczContext(0.6, GRID)
    with pytest.raises(ValueError):
        OrliczContext(0.2, GRID, bracket=(2.0, 1.0))


def test_orlicz_function_is_convex():
    u = np.logspace(-8, 4, 4001)
    for a in (0.05, 0.2, 0.5):
        phi = orlicz(u, a)
        # discrete convexity on the nonuniform mesh: slopes increase
        slopes = np.diff(phi) / np.diff(u)
        assert np.all(np.diff(slopes) >= -1e-12 * np.abs(slopes[1:]))


@given(
    st.lists(st.floats(0.0, 50.0), min_size=GRID.size, max_size=GRID.size),
    st.lists(st.floats(0.0, 50.0), min_size=GRID.size, max_size=GRID.size),
    st.sampled_from([0.1, 0.2, 0.24, 0.5]),
)
def test_luxemburg_triangle(g1, g2, a):
    g1, g2 = np.array(g1), np.array(g2)
    ctx = OrliczContext(a, GRID)
    assert luxemburg_norm(g1 + g2, ctx) <= luxemburg_norm(g1, ctx) + luxemburg_norm(g2, ctx) + 1e-8


def test_holder_examples():
    assert holder_interpolation_bound(0.0, 5.0, 0.2) == 0.0
    assert holder_interpolation_bound(1.0, 1.0, 0.2) == 1.0
    with pytest.raises(ValueError):
        holder_interpolation_bound(1.0, 1.0, 0.5)
    T1 = apply_Tt(SHIFT1, SemigroupParams(0.5)).values
    T2 = apply_Tt(SHIFT1, SemigroupParams(0.1)).values
    g = np.abs(T2 - T1)
    for a in (0.1, 0.2, 0.24):
        lhs = entropy_alpha(g, a, GRID)
        rhs = holder_interpolation_bound(integrate(GRID, g), entropy_alpha(g, 0.5, GRID), a)
        assert lhs <= rhs + 1e-8


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_pointwise_domination_subadditivity(c1, c2):
    f1, f2 = shift(c1).values, shift(c2).values
    lhs = entropy_alpha(np.abs(f1 - f2), 0.5, GRID)
    assert lhs <= entropy_alpha(f1, 0.5, GRID) + entropy_alpha(f2, 0.5, GRID) + 1e-12


def test_entropy_monotone_in_alpha_where_f_large():
    big = np.full(GRID.size, 5.0)  # log(6) > 1, so the power grows with alpha
    vals = [entropy_alpha(big, a, GRID) for a in (0.05, 0.1, 0.2, 0.3, 0.5)]
    assert vals == sorted(vals)
    fine = [entropy_alpha(SHIFT1, a) for a in np.linspace(0.1, 0.2, 11)]
    assert max(abs(a - b) for a, b in zip(fine[:-1], fine[1:])) < 0.01


def test_tail_examples():
    one = DensityFn.constant(GRID, 1.0)
    assert tail_distribution(one, 2.0) == 0.0
    assert tail_distribution(one, 0.5) == pytest.approx(1.0, abs=1e-14)
    for lam in (0.5, 2.0, 10.0, 100.0):
        exact = norm.sf(math.log(lam) + 0.5)
        assert tail_distribution(SHIFT1, lam) == pytest.approx(exact, rel=1e-10, abs=1e-15)


@given(st.floats(0.1, 1000.0), st.floats(-2.0, 2.0))
def test_markov_inequality(lam, c):
    f = shift(c)
    assert tail_distribution(f, lam) * lam <= integrate(GRID, f.values) + 1e-10
