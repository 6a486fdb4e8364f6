import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpkverify.errors import UnbalancedInputError, UnsupportedInputError
from fpkverify.measure import DensityFn, build_grid, constant_drift
from fpkverify.semigroup import regularized_divergence
from fpkverify.transport import (
    SignedMeasureRepr,
    coarse_masses,
    exact_lp,
    sinkhorn,
    w1_oracle_crosscheck,
    w1_probability,
    w1_signed,
)

GH1 = build_grid(1, 80)
GH2 = build_grid(2, 24)


def shift_density(c, grid):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return DensityFn.from_callable(grid, lambda x: np.exp(x @ c - 0.5 * c @ c), probability=True)


def scale_density(sigma, grid):
    # N(0, sigma^2) relative to the standard Gaussian
    def f(x):
        z = x[:, 0]
        return np.exp(-0.5 * z * z * (1.0 / sigma**2 - 1.0)) / sigma

    return DensityFn.from_callable(grid, f, probability=True)


ONE1 = DensityFn.constant(GH1, 1.0, probability=True)


def test_identical_measures():
    assert w1_probability(ONE1, ONE1).value == pytest.approx(0.0, abs=1e-14)


@given(st.floats(-2.0, 2.0))
def test_shift_oracle_1d(c):
    r = w1_probability(shift_density(c, GH1), ONE1)
    assert abs(r.value - abs(c)) <= 1e-6
    assert r.method == "cdf-1d"


def test_scale_oracle_1d():
    sigma = 0.7071
    r = w1_probability(scale_density(sigma, GH1), ONE1)
    assert r.value == pytest.approx(abs(sigma - 1.0) * math.sqrt(2.0 / math.pi), abs=1e-7)
    assert r.value == pytest.approx(0.23370, abs=1e-5)


def test_unbalanced_probability_input_rejected():
    half = DensityFn.constant(GH1, 0.5, probability=True)
    with pytest.raises(UnbalancedInputError):
        w1_probability(half, ONE1)


def test_signed_zero_and_dipole():
    zero = SignedMeasureRepr.from_values(lambda x: np.zeros(len(x)), 1, 0.0)
    assert w1_signed(zero).value == 0.0
    a, eps = 1.0, 0.02

    def dipole(x):
        z = x[:, 0]
        bump = lambda m: np.exp(-0.5 * ((z - m) / eps) ** 2) / (eps * math.sqrt(2 * math.pi))  # noqa: E731
        gauss = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        return (bump(a) - bump(-a)) / gauss

    r = w1_signed(SignedMeasureRepr.from_values(dipole, 1, 0.0))
    assert r.value == pytest.approx(2 * a, abs=1e-6)


def test_signed_unbalanced_rejected():
    sig = SignedMeasureRepr.from_values(lambda x: np.ones(len(x)), 1, 1.0)
    with pytest.raises(UnsupportedInputError):
        w1_signed(sig)


@pytest.mark.parametrize("s", [0.1, 0.5, 1.0])
def test_regularized_divergence_kantorovich_bound(s):
    R = regularized_divergence(constant_drift([1.0]), s, GH1)
    r = w1_signed(SignedMeasureRepr.from_values(R.evaluate, 1, 0.0))
    assert math.exp(-s) * 1.0 - r.value >= -1e-6


@given(st.floats(0.1, 5.0))
def test_signed_scaling_is_linear(c):
    sig = SignedMeasureRepr.difference(shift_density(0.4, GH1), ONE1)
    base = w1_signed(sig).value
    assert w1_signed(sig.scaled(c)).value == pytest.approx(c * base, rel=1e-10)


def test_triangle_inequality_1d():
    mus = [shift_density(c, GH1) for c in (-0.3, 0.2, 0.9)]
    d = lambda p, q: w1_probability(p, q)  # noqa: E731
    ab, bc, ac = d(mus[0], mus[1]), d(mus[1], mus[2]), d(mus[0], mus[2])
    assert ac.value <= ab.value + bc.value + 2 * (ab.error_estimate + bc.error_estimate + ac.error_estimate) + 1e-12


def test_sinkhorn_and_lp_on_small_problem():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, size=(30, 2))
    a = rng.uniform(size=30)
    b = rng.uniform(size=30)
    a /= a.sum()
    b /= b.sum()
    C = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    from scipy.optimize import linprog

    n = 30
    A_eq = np.vstack([np.kron(np.eye(n), np.ones(n)), np.kron(np.ones(n), np.eye(n))])
    ref = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs").fun
    lp = exact_lp(a, b, C)
    assert lp.value == pytest.approx(ref, abs=1e-8)
    sk = sinkhorn(a, b, C)
    assert sk.value >= sk.lower_bound - 1e-12
    assert sk.lower_bound <= ref + 1e-9 and sk.value >= ref - 1e-9
    assert abs(sk.value - ref) <= sk.error_estimate + 1e-9


def test_sinkhorn_handles_empty_cells():
    a = np.array([0.5, 0.0, 0.5])
    b = np.array([0.0, 1.0, 0.0])
    C = np.abs(np.subtract.outer(np.arange(3.0), np.arange(3.0)))
    r = sinkhorn(a, b, C)
    assert r.value == pytest.approx(1.0, abs=1e-6)


def test_sinkhorn_unbalanced_rejected():
    with pytest.raises(UnbalancedInputError):
        sinkhorn(np.array([1.0]), np.array([0.5]), np.zeros((1, 1)))


def test_coarse_masses_sum_to_one():
    pts, m, H = coarse_masses(lambda x: np.exp(-0.5 * (x * x).sum(1)) / (2 * math.pi), 2, 40, 5.0)
    assert m.sum() == pytest.approx(1.0, abs=1e-5)
    assert H == pytest.approx(0.25)


@pytest.mark.slow
def test_crosscheck_shift_2d():
    mu = shift_density([0.3, 0.0], GH2)
    nu = DensityFn.constant(GH2, 1.0, probability=True)
    out = w1_oracle_crosscheck(mu, nu, 40)
    assert out["passed"]
    assert abs(out["sinkhorn"] - 0.3) <= 1e-3
    same = w1_oracle_crosscheck(nu, nu, 20)
    assert same["sinkhorn"] == pytest.approx(0.0, abs=1e-6) and same["exact"] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.slow
def test_crosscheck_anisotropic_pair():
    def aniso(x):
        s1, s2 = 0.8, 1.2
        return np.exp(-0.5 * (x[:, 0] ** 2 * (1 / s1**2 - 1) + x[:, 1] ** 2 * (1 / s2**2 - 1))) / (s1 * s2)

    mu = DensityFn.from_callable(GH2, aniso, probability=True)
    nu = shift_density([0.2, -0.1], GH2)
    out = w1_oracle_crosscheck(mu, nu, 24)
    assert out["passed"], out
