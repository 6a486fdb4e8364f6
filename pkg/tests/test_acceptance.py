"""The acceptance criteria, each at its stated tolerance and runtime limit.

Every criterion appends one PASS/FAIL line to the terminal summary.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fpkverify.checks import (
    GridSettings,
    _default_b_cases,
    check_B_variant,
    check_duhamel,
    check_hll,
    check_lemma1,
    check_lemma2,
    check_main_theorem,
    check_prop1_kantorovich,
    check_prop1_semigroup,
    check_projection_product,
    check_wang,
    default_drift_suite,
    default_u_suite,
    main_theorem_pipeline,
    solve_case,
)
from fpkverify.fpk import l1_distance, solve_1d_explicit, solve_grid
from fpkverify.measure import (
    DensityFn,
    GaussianSpec,
    build_grid,
    constant_drift,
    gaussian_density,
    integrate,
    saturating_drift,
    shift_to_precision,
)
from fpkverify.transport import w1_oracle_crosscheck

pytestmark = pytest.mark.slow

SETTINGS = GridSettings()
SUITE = default_drift_suite()
SUITE_1D = [c for c in SUITE if c.dim == 1]


@contextmanager
def criterion(number, title, limit_s):
    info = {}
    started = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        elapsed = time.perf_counter() - started
        in_time = elapsed <= limit_s
        status = "PASS" if ok and in_time else "FAIL"
        extra = info.get("summary", "")
        ACCEPTANCE_LINES.append(f"{status} criterion {number:>2}: {title} [{elapsed:.1f}s / {limit_s:.0f}s] {extra}")
    assert in_time, f"criterion {number} took {elapsed:.1f}s, limit {limit_s}s"


def test_criterion_01_kantorovich_bound():
    with criterion(1, "Kantorovich bound across the drift suite", 60) as info:
        assert len(SUITE) >= 9
        worst_1d, worst_2d, tight = math.inf, math.inf, []
        for case in SUITE:
            rep = check_prop1_kantorovich(solve_case(case, SETTINGS), case.name, SETTINGS)
            if case.dim == 1:
                worst_1d = min(worst_1d, rep.margin)
                if case.name.startswith("shift"):
                    tight.append(abs(rep.margin))
            else:
                worst_2d = min(worst_2d, rep.margin)
        info["summary"] = f"min 1D {worst_1d:.2e}, min 2D {worst_2d:.2e}, max shift |margin| {max(tight):.2e}"
        assert worst_1d >= -1e-6
        assert worst_2d >= -1e-3
        assert max(tight) <= 1e-6


def test_criterion_02_semigroup_bound():
    with criterion(2, "semigroup L1 bound at t in {0.01..1}", 30) as info:
        worst = math.inf
        for case in SUITE_1D:
            rep = check_prop1_semigroup(solve_case(case, SETTINGS), (0.01, 0.05, 0.1, 0.5, 1.0), case.name)
            worst = min(worst, rep.margin)
        info["summary"] = f"min margin {worst:.2e}"
        assert worst >= -1e-6


def test_criterion_03_entropy_decay():
    with criterion(3, "square-root entropy of T_t f, g = f and g = 2f", 30) as info:
        worst = math.inf
        for case in SUITE_1D:
            rep = check_lemma1(solve_case(case, SETTINGS), (0.04, 0.1, 0.25, 1.0), case.name)
            assert {r["g_scale"] for r in rep.details["per_case"]} == {1.0, 2.0}
            worst = min(worst, rep.margin)
        info["summary"] = f"min margin {worst:.2e}"
        assert worst >= -1e-6


def test_criterion_04_regularized_divergence():
    with criterion(4, "regularized divergence bounds and weak identity", 60) as info:
        suite = default_u_suite()
        assert len(suite) >= 6
        rep = check_lemma2(suite, n_test=20)
        rows = rep.details["rows"]
        u_margin = min(min(r["u1_margin"], r["u2_margin"]) for r in rows)
        gap = max(r["identity_gap"] for r in rows)
        mean_ok = all(r["mean"] <= r["mean_tol"] for r in rows)
        info["summary"] = f"min (u1,u2) margin {u_margin:.2e}, max identity gap {gap:.2e}"
        assert mean_ok
        assert u_margin >= -1e-6
        assert gap <= 1e-6


def test_criterion_05_log_harnack():
    with criterion(5, "log-Harnack inequality, 1e4 pairs x 3 t x 3 densities", 60) as info:
        names = ("zero", "shift_0.5", "linear_1")
        g_suite = [(c.name, solve_case(c, SETTINGS).f) for c in SUITE if c.name in names]
        assert len(g_suite) == 3
        rep = check_wang(g_suite, (0.05, 0.2, 1.0), pair_sample_size=10_000, seed=0)
        info["summary"] = f"min margin {rep.margin:.2e}"
        assert rep.margin >= -1e-8


def test_criterion_06_duhamel():
    with criterion(6, "Duhamel reconstruction, relative L1 mismatch", 120) as info:
        worst = 0.0
        for case in SUITE_1D:
            if not case.name.startswith(("shift", "linear")):
                continue
            rep = check_duhamel(solve_case(case, SETTINGS), (0.1, 0.2), time_nodes=24)
            worst = max(worst, rep.lhs)
            assert all(r["halving"] for r in rep.details["rows"]), case.name
        info["summary"] = f"max mismatch {worst:.2e}"
        assert worst <= 5e-4


def test_criterion_07_main_bound_pipeline():
    with criterion(7, "entropy bound proof steps and C(alpha) stability", 300) as info:
        worst, drift = math.inf, 0.0
        for case in SUITE_1D:
            fine = solve_case(case, SETTINGS, 80)
            coarse = solve_case(case, SETTINGS, 40)
            for alpha in (0.1, 0.2, 0.24):
                rep = check_main_theorem(fine, alpha, case.name)
                worst = min(worst, min(rep.details["margins"].values()))
                assert math.isfinite(rep.details["entropy"])
                r40 = main_theorem_pipeline(coarse, alpha)["ratio"]
                drift = max(drift, abs(r40 / rep.details["ratio"] - 1.0))
        info["summary"] = f"min step margin {worst:.2e}, max ratio change {drift:.2e}"
        assert worst >= -1e-5
        assert drift <= 0.02


def test_criterion_08_l1_kantorovich_interpolation():
    with criterion(8, "L1 deviation squared vs 2 K V vs 2 V^2", 30) as info:
        worst_1d, raw_2d = math.inf, {}
        for case in SUITE:
            rep = check_hll(solve_case(case, SETTINGS), case.name, settings=SETTINGS)
            if case.dim == 1:
                worst_1d = min(worst_1d, rep.margin)
            else:
                # the coarse-lattice transport value carries its own error estimate
                raw_2d[case.name] = rep.margin
                assert rep.passed, case.name
        info["summary"] = f"min 1D margin {worst_1d:.2e}, 2D " + ", ".join(f"{k} {m:.1e}" for k, m in raw_2d.items())
        assert worst_1d >= -1e-6


def test_criterion_09_solver_oracles():
    with criterion(9, "grid solver and transport oracles", 300) as info:
        errs = []
        v = saturating_drift(2.0)
        for n in (81, 161, 321):
            grid = build_grid(1, n, "uniform-truncated", 8.0)
            errs.append(l1_distance(solve_grid(v, grid).f, solve_1d_explicit(v, grid, compute_residual=False).f.values))
        assert errs[1] <= 1e-3
        assert errs[1] <= errs[0] / 2 and errs[2] <= errs[1] / 2

        grid2 = build_grid(2, 161, "uniform-truncated", 8.0)
        B = np.diag([1.0, 2.0])
        lin = solve_grid(shift_to_precision(B), grid2)
        exact = gaussian_density(GaussianSpec.from_precision(B), grid2.nodes) / gaussian_density(
            GaussianSpec.standard(2), grid2.nodes)
        err2 = integrate(grid2, np.abs(lin.f.values - exact))
        assert err2 <= 1e-3

        shift = solve_grid(constant_drift([0.3, 0.0]), grid2, compute_residual=False)
        one = DensityFn.constant(grid2, 1.0, probability=True)
        cross = w1_oracle_crosscheck(shift.f, one, 40)
        assert cross["passed"], cross
        info["summary"] = (f"1D errors {errs[0]:.1e}/{errs[1]:.1e}/{errs[2]:.1e}, 2D Gaussian {err2:.1e}, "
                           f"Sinkhorn-LP {cross['difference']:.1e} <= {cross['tolerance']:.1e}")


def test_criterion_10_general_precision():
    with criterion(10, "precision-B variant, beta_1 >= 1 and beta_1 < 1", 120) as info:
        margins = []
        for name, B, v in _default_b_cases():
            rep = check_B_variant(B, v, name, SETTINGS)
            assert all(p["margin"] >= -1e-4 for p in rep.details["parts"].values()), name
            margins.append(rep.margin)
        assert {B.min_eigenvalue >= 1.0 for _, B, _ in _default_b_cases()} == {True, False}
        info["summary"] = "margins " + ", ".join(f"{m:.2e}" for m in margins)


def test_criterion_11_projection_product():
    with criterion(11, "2D product solution factorizes into 1D solutions", 60) as info:
        rep = check_projection_product([constant_drift([0.25]), constant_drift([0.5])], "product_2d", SETTINGS)
        info["summary"] = f"L1 error {rep.lhs:.2e}"
        assert rep.lhs <= 1e-6
