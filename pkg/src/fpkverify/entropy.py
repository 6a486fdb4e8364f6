"""Entropy-type functionals and the Luxemburg gauge of ``u (log(1+u))^alpha``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import BracketError, DomainError
from .measure import DensityFn, QuadratureGrid, integrate
from .semigroup import SemigroupParams, apply_Tt

Values = Union[DensityFn, np.ndarray]


def _nodal(g: Values, grid: Optional[QuadratureGrid]) -> tuple[np.ndarray, QuadratureGrid]:
    if isinstance(g, DensityFn):
        grid = grid or g.grid
        vals = g.values if grid is g.grid else g(grid.nodes)
    else:
        if grid is None:
            raise ValueError("a grid is required for raw nodal values")
        vals = np.asarray(g, dtype=float).reshape(-1)
    if np.any(vals < -1e-12):
        i = int(np.argmin(vals))
        raise DomainError(f"negative value {vals[i]:.3e} at node {grid.nodes[i].tolist()}")
    return np.maximum(vals, 0.0), grid


def orlicz(u: np.ndarray, alpha: float) -> np.ndarray:
    """``u (log(1+u))^alpha`` for ``u >= 0``."""
    return u * np.log1p(u) ** alpha


def entropy_alpha(f: Values, alpha: float, grid: Optional[QuadratureGrid] = None) -> float:
    """``int f (log(f+1))^alpha d gamma``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    vals, grid = _nodal(f, grid)
    return integrate(grid, orlicz(vals, alpha))


def entropy_sqrt_J(g: Values, t: float, grid: Optional[QuadratureGrid] = None,
                   inner_order: Optional[int] = None) -> float:
    """``int T_t g (log(T_t g + 1))^{1/2} d gamma``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return entropy_alpha(apply_Tt(g, SemigroupParams(t, inner_order), grid), 0.5)


@dataclass(frozen=True)
class OrliczContext:
    alpha: float
    grid: QuadratureGrid
    bracket: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError("alpha must lie in (0, 1/2]")
        if self.bracket is not None:
            lo, hi = self.bracket
            if not 0.0 < lo < hi:
                raise ValueError("bracket must satisfy 0 < s_lo < s_hi")


def _gauge_integral(vals: np.ndarray, weights: np.ndarray, s: float, alpha: float) -> float:
    return float(np.dot(weights, orlicz(vals / s, alpha)))


def luxemburg_norm(g: Values, ctx: OrliczContext, rtol: float = 1e-10, max_expansions: int = 6) -> float:
    """``inf{s > 0 : int (g/s)(log(g/s + 1))^alpha d gamma <= 1}`` by bisection in ``log s``.

    The defining integral is strictly decreasing in ``s`` for nonzero ``g``.  A
    bracket that fails to straddle 1 is widened by a factor 10 at each end,
    at most ``max_expansions`` times.
    """
    vals, grid = _nodal(g, ctx.grid)
    if not np.any(vals > 0):
        return 0.0
    w = grid.weights
    alpha = ctx.alpha
    def F(s):
        return _gauge_integral(vals, w, s, alpha) - 1.0

    if ctx.bracket is None:
        # geometric walk from the mass; the integral is monotone in s
        lo = hi = max(float(np.dot(w, vals)), float(vals.max()) * 1e-300)
        for _ in range(700):
            if F(hi) <= 0.0:
                break
            lo, hi = hi, hi * 10.0
        for _ in range(700):
            if F(lo) >= 0.0:
                break
            lo, hi = lo / 10.0, min(hi, lo)
        return _bisect_log(F, lo, hi, rtol)
    lo, hi = map(float, ctx.bracket)

    for _ in range(max_expansions + 1):
        if F(lo) >= 0.0 and F(hi) <= 0.0:
            break
        if F(lo) < 0.0:
            lo /= 10.0
        if F(hi) > 0.0:
            hi *= 10.0
    else:
        raise BracketError(f"no bracket found around the gauge (last [{lo:.3e}, {hi:.3e}])")
    return _bisect_log(F, lo, hi, rtol)


def _bisect_log(F, lo: float, hi: float, rtol: float) -> float:
    a, b = math.log(lo), math.log(hi)
    while b - a > rtol * 0.1:
        mid = 0.5 * (a + b)
        if F(math.exp(mid)) > 0.0:
            a = mid
        else:
            b = mid
    return math.exp(b)


def holder_interpolation_bound(int_g: float, int_g_sqrt: float, alpha: float) -> float:
    """``int_g^{1-2 alpha} * int_g_sqrt^{2 alpha}``: Holder between exponents 0 and 1/2."""
    if int_g < 0 or int_g_sqrt < 0:
        raise ValueError("integrals must be nonnegative")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if int_g == 0.0:
        return 0.0
    return int_g ** (1.0 - 2.0 * alpha) * int_g_sqrt ** (2.0 * alpha)


def tail_distribution(f: Values, lam: float, grid: Optional[QuadratureGrid] = None,
                      refine: bool = True) -> float:
    """``gamma(f > lam)``.

    Sums quadrature weights over the superlevel set.  For one-dimensional
    densities with an evaluator and a standard reference the superlevel set is
    located by root-finding between nodes and measured with the normal CDF.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    vals, grid = _nodal(f, grid)
    if not (refine and grid.dim == 1 and isinstance(f, DensityFn) and grid.gaussian.is_standard):
        return float(np.sum(grid.weights[vals > lam]))
    x = grid.nodes[:, 0]
    order = np.argsort(x)
    x = x[order]
    above = vals[order] > lam
    fn = lambda z: float(f(np.array([[z]]))[0]) - lam  # noqa: E731
    total = 0.0
    i = 0
    n = x.size
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        left = -math.inf if i == 0 else brentq(fn, x[i - 1], x[i], xtol=1e-14)
        right = math.inf if j == n - 1 else brentq(fn, x[j], x[j + 1], xtol=1e-14)
        total += float(ndtr(right) - ndtr(left))
        i = j + 1
    return total
