"""Stationary solutions of ``Lap(mu) - div(b mu) = 0`` with ``b = -Bx + v``.

In one dimension the zero-flux solution is explicit: relative to the reference
Gaussian the density is proportional to ``exp(int_0^x v)``.  In two and three
dimensions the equation is discretized with a conservative finite-volume
scheme (Scharfetter-Gummel fluxes, zero-flux boundary) and the discrete
stationary vector is the kernel of the resulting M-matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial import hermite_e as He
from scipy import integrate as sciint

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    NonIntegrableDriftError,
    SchemeViolationError,
)
from .measure import (
    DensityFn,
    DriftField,
    GaussianSpec,
    QuadratureGrid,
    as_points,
    build_grid,
    integrate,
)

TOL_RESIDUAL_EXPLICIT = 1e-10
TOL_RESIDUAL_GRID = 1e-5
_LEGENDRE_NODES = 256


@dataclass(frozen=True, eq=False)
class StationarySolution:
    f: DensityFn
    v: DriftField
    v_l1_mu: float
    residual: float
    solver: str
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def reference(self) -> GaussianSpec:
        return self.f.grid.gaussian

    def to_dict(self) -> dict:
        out = self.f.to_dict()
        out["metadata"] = {
            **self.v.describe(),
            "solver": self.solver,
            "residual": self.residual,
            "v_l1_mu": self.v_l1_mu,
            **self.metadata,
        }
        return out


@dataclass(frozen=True, eq=False)
class LyapunovCertificate:
    V_name: str
    C: float
    valid: bool
    check_points: np.ndarray
    values: np.ndarray = field(repr=False)


# --------------------------------------------------------------------------
# Test-function battery
# --------------------------------------------------------------------------


def _bump(z):
    """``exp(-1/(1-z^2))`` on ``|z| < 1`` and its first two derivatives."""
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) < 1.0
    q = np.where(inside, 1.0 - z * z, 1.0)
    b = np.where(inside, np.exp(-1.0 / q), 0.0)
    d1 = b * (-2.0 * z / q**2)
    d2 = b * (4.0 * z * z / q**4 - (2.0 + 6.0 * z * z) / q**3)
    return b, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """``prod_k He_{n_k}(x_k) * bump((x_k - c_k) / R)`` with exact derivatives."""

    degrees: tuple
    radius: float
    center: tuple

    def _factors(self, x):
        vals, d1s, d2s = [], [], []
        for k, n in enumerate(self.degrees):
            z = x[:, k]
            coef = np.zeros(n + 1)
            coef[n] = 1.0
            p = He.hermeval(z, coef)
            p1 = He.hermeval(z, He.hermeder(coef, 1))
            p2 = He.hermeval(z, He.hermeder(coef, 2))
            b, b1, b2 = _bump((z - self.center[k]) / self.radius)
            R = self.radius
            vals.append(p * b)
            d1s.append(p1 * b + p * b1 / R)
            d2s.append(p2 * b + 2.0 * p1 * b1 / R + p * b2 / R**2)
        return np.array(vals), np.array(d1s), np.array(d2s)

    def derivatives(self, x):
        """Value, gradient ``(n, d)`` and Laplacian at the rows of ``x``."""
        g, g1, g2 = self._factors(x)
        d = g.shape[0]
        value = np.prod(g, axis=0)
        grad = np.empty((x.shape[0], d))
        lap = np.zeros(x.shape[0])
        for k in range(d):
            others = np.prod(np.delete(g, k, axis=0), axis=0) if d > 1 else 1.0
            grad[:, k] = g1[k] * others
            lap += g2[k] * others
        return value, grad, lap

    def c2_norm(self) -> float:
        """Sup of value + |gradient| + |Hessian| estimated on a dense sample."""
        d = len(self.degrees)
        ax = np.linspace(-1.0, 1.0, 401 if d == 1 else 61)
        axes = [c + self.radius * ax for c in self.center]
        pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
        g, g1, g2 = self._factors(pts)
        value = np.abs(np.prod(g, axis=0))
        grad = np.zeros(pts.shape[0])
        hess = np.zeros(pts.shape[0])
        for k in range(d):
            others = np.prod(np.delete(g, k, axis=0), axis=0) if d > 1 else 1.0
            grad += (g1[k] * others) ** 2
            hess += (g2[k] * others) ** 2
            for j in range(k + 1, d):
                rest = np.prod(np.delete(g, [k, j], axis=0), axis=0) if d > 2 else 1.0
                hess += 2.0 * (g1[k] * g1[j] * rest) ** 2
        return float(np.max(value) + np.max(np.sqrt(grad)) + np.max(np.sqrt(hess)))


def default_battery(dim: int, size: int = 25) -> list[TestFunction]:
    """Tensor Hermite-polynomial-times-bump test functions."""
    if dim == 1:
        out = [
            TestFunction((n,), R, (c,))
            for n in range(5)
            for R, c in [(2.0, 0.0), (3.0, 0.5), (4.0, 0.0), (5.0, -0.5), (6.0, 0.0)]
        ]
        return out[:size]
    multi = sorted(itertools.product(range(5), repeat=dim), key=lambda m: (sum(m), m))
    return [TestFunction(m, 4.0, (0.0,) * dim) for m in multi[:size]]


# --------------------------------------------------------------------------
# Residual and Lyapunov checks
# --------------------------------------------------------------------------


def _drift_b(v: DriftField, ref: GaussianSpec):
    B = ref.precision
    return lambda x: -x @ B.T + v(x)


_NODES_PER_AXIS = {1: _LEGENDRE_NODES, 2: 128, 3: 48}


def _support_rule(phi: TestFunction, breakpoints=()):
    """Tensor Gauss-Legendre nodes and weights on the support box of ``phi``.

    In one dimension the interval is split at kinks of the drift.
    """
    d = len(phi.degrees)
    z, w = np.polynomial.legendre.leggauss(_NODES_PER_AXIS[d])
    axes, wts = [], []
    for k in range(d):
        c, R = phi.center[k], phi.radius
        cuts = [c - R] + (sorted(p for p in breakpoints if c - R < p < c + R) if d == 1 else []) + [c + R]
        xs, ws = [], []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (hi - lo)
            xs.append(0.5 * (lo + hi) + half * z)
            ws.append(half * w)
        axes.append(np.concatenate(xs))
        wts.append(np.concatenate(ws))
    x = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
    wt = np.prod(np.stack([m.ravel() for m in np.meshgrid(*wts, indexing="ij")], axis=-1), axis=-1)
    return x, wt


def _weak_form_quad(sol: StationarySolution, phi: TestFunction, cache: dict) -> float:
    """``int (Lap phi + <b, grad phi>) f d gamma_ref`` over the support of ``phi``."""
    key = (phi.radius, phi.center)
    if key not in cache:
        x, wt = _support_rule(phi, sol.v.breakpoints if sol.dim == 1 else ())
        b = _drift_b(sol.v, sol.reference)(x)
        dens = sol.reference.density(x) * sol.f(x)
        cache[key] = (x, wt * dens, b)
    x, wd, b = cache[key]
    _, grad, lap = phi.derivatives(x)
    return float(np.dot(wd, lap + np.sum(b * grad, axis=1)))


def _weak_form_nodal(sol: StationarySolution, phi: TestFunction) -> float:
    grid = sol.f.grid
    x = grid.nodes
    _, grad, lap = phi.derivatives(x)
    b = _drift_b(sol.v, sol.reference)(x)
    return float(np.dot(grid.weights, (lap + np.sum(b * grad, axis=1)) * sol.f.values))


def residual_check(
    sol: StationarySolution,
    test_battery: Optional[Sequence[TestFunction]] = None,
    nodal: bool = False,
) -> float:
    """Largest normalized weak-form residual ``|int (L phi + <v, grad phi>) f| / (1 + |phi|_C2)``.

    By default the integral is taken with Gauss-Legendre quadrature on each
    test function's support, evaluating ``f`` off-grid; ``nodal=True`` uses the
    grid's own nodes and weights instead.
    """
    battery = list(test_battery) if test_battery is not None else default_battery(sol.dim)
    if not battery:
        raise ValueError("test battery must be nonempty")
    cache: dict = {}
    worst = 0.0
    for phi in battery:
        r = _weak_form_nodal(sol, phi) if nodal else _weak_form_quad(sol, phi, cache)
        worst = max(worst, abs(r) / (1.0 + phi.c2_norm()))
    return worst


def lyapunov_check(v: DriftField, sample: QuadratureGrid) -> LyapunovCertificate:
    """Test ``V = exp(|x|^2/2)`` as a Lyapunov function for ``b = -x + v``.

    ``G = Lap V + <b, grad V> + |v| = (d + <v, x>) V + |v|``; the certificate is
    valid when the maximum of ``G`` is attained away from the sample boundary
    and ``G`` decreases across the outer shell.
    """
    x = sample.nodes
    d = sample.dim
    vx = v(x)
    r2 = np.sum(x * x, axis=1)
    G = (d + np.sum(vx * x, axis=1)) * np.exp(0.5 * r2) + np.linalg.norm(vx, axis=1)
    r = np.sqrt(r2)
    rmax = r.max()
    C = float(np.max(G))
    finite = math.isfinite(C)
    outer = r >= 0.9 * rmax
    interior_max = float(np.max(G[~outer])) if np.any(~outer) else -math.inf
    shell_max = float(np.max(G[outer]))
    edge = r >= rmax - 1e-12
    decreasing = float(np.max(G[edge])) < float(np.min(G[outer & ~edge])) if np.any(outer & ~edge) else False
    valid = bool(finite and interior_max >= shell_max and decreasing)
    return LyapunovCertificate("exp-half-square", C, valid, x, G)


# --------------------------------------------------------------------------
# Explicit one-dimensional solutions
# --------------------------------------------------------------------------


def _potential_fn(v: DriftField):
    if v.potential is not None:
        return lambda x: np.asarray(v.potential(as_points(x, 1)), dtype=float)
    pts = sorted(set(v.breakpoints))

    def pot(x):
        x = as_points(x, 1)[:, 0]
        out = np.empty_like(x)
        for i, z in enumerate(x):
            brk = [p for p in pts if min(0.0, z) < p < max(0.0, z)] or None
            out[i] = sciint.quad(lambda s: v(np.array([[s]]))[0, 0], 0.0, z, points=brk, limit=200)[0]
        return out

    return pot


def _log_mass(log_integrand, breakpoints) -> tuple[float, float]:
    """``log int exp(log_integrand)`` over the line, with the peak factored out."""
    probe = np.linspace(-40.0, 40.0, 8001)
    lv = log_integrand(probe)
    if not np.all(np.isfinite(lv[np.abs(probe) <= 20])):
        raise NonIntegrableDriftError("the stationary density is not finite on the domain")
    if lv[0] > -60.0 + lv.max() or lv[-1] > -60.0 + lv.max():
        raise NonIntegrableDriftError("the stationary density does not decay; the drift is not integrable")
    peak = float(lv.max())
    lo, hi = probe[lv > peak - 80.0][[0, -1]]
    pts = sorted({p for p in breakpoints if lo < p < hi} | {float(probe[np.argmax(lv)])})
    fn = lambda s: math.exp(float(log_integrand(np.array([s]))[0]) - peak)  # noqa: E731
    val, err = sciint.quad(fn, lo, hi, points=[p for p in pts if lo < p < hi] or None, limit=400,
                           epsabs=0.0, epsrel=1e-13)
    return peak + math.log(val), err / val


def solve_1d_explicit(v: DriftField, grid: QuadratureGrid, compute_residual: bool = True) -> StationarySolution:
    """Exact zero-flux solution: ``f ~ exp(int_0^x v)`` relative to the grid's Gaussian."""
    if grid.dim != 1 or v.dim != 1:
        raise ValueError("solve_1d_explicit works in one dimension")
    ref = grid.gaussian
    if v.is_zero:
        f = DensityFn.constant(grid, 1.0, probability=True, tag="explicit-1d")
        sol = StationarySolution(f, v, 0.0, 0.0, "explicit-1d")
        return _with_residual(sol, compute_residual)

    pot = _potential_fn(v)
    bprec = float(ref.precision[0, 0])
    log_norm = -0.5 * math.log(2.0 * math.pi / bprec)
    log_integrand = lambda s: pot(s) - 0.5 * bprec * np.asarray(s) ** 2 + log_norm  # noqa: E731
    log_mass, _ = _log_mass(log_integrand, v.breakpoints)

    def density(x):
        return np.exp(pot(x) - log_mass)

    f = DensityFn.from_callable(grid, density, probability=True, tag="explicit-1d")
    if not np.all(np.isfinite(f.values)):
        raise NonIntegrableDriftError("density overflows on the grid")
    # the normalization is exact; record how well this grid reproduces it
    f = replace(f, tolerance=max(1e-10, abs(integrate(grid, f.values) - 1.0)))

    def l1_integrand(s):
        return abs(v(np.array([[s]]))[0, 0]) * math.exp(float(log_integrand(np.array([s]))[0]) - log_mass)

    l1 = _l1_quad(l1_integrand, v.breakpoints, log_integrand, log_mass)
    sol = StationarySolution(f, v, l1, math.nan, "explicit-1d", {"log_mass": log_mass})
    return _with_residual(sol, compute_residual)


def _l1_quad(fn, breakpoints, log_integrand, log_mass) -> float:
    probe = np.linspace(-40.0, 40.0, 8001)
    keep = probe[log_integrand(probe) - log_mass > -80.0]
    lo, hi = float(keep[0]), float(keep[-1])
    pts = [p for p in sorted(set(breakpoints) | {0.0}) if lo < p < hi]
    return float(sciint.quad(fn, lo, hi, points=pts or None, limit=400, epsabs=1e-15, epsrel=1e-13)[0])


def _with_residual(sol: StationarySolution, compute: bool) -> StationarySolution:
    if not compute:
        return sol
    res = residual_check(sol)
    return StationarySolution(sol.f, sol.v, sol.v_l1_mu, res, sol.solver, sol.metadata)


def solve(v: DriftField, grid: QuadratureGrid, **kw) -> StationarySolution:
    """Dispatch to the explicit solver in 1D and the grid solver otherwise."""
    if grid.dim == 1 and grid.kind != "uniform-truncated":
        return solve_1d_explicit(v, grid)
    if grid.dim == 1 and not kw.pop("grid_mode", False):
        return solve_1d_explicit(v, grid)
    return solve_grid(v, grid, **kw)


# --------------------------------------------------------------------------
# Finite-volume solver
# --------------------------------------------------------------------------


def _bernoulli(z):
    """``z / (e^z - 1)`` with the removable singularity at 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    out = safe / np.expm1(safe)
    return np.where(small, 1.0 - 0.5 * z + z * z / 12.0, out)


def assemble_operator(v: DriftField, grid: QuadratureGrid) -> sp.csr_matrix:
    """Discrete adjoint operator ``A`` with ``(A rho)_i`` = net inflow into cell ``i``.

    Edge fluxes ``J = (B(-P) rho_i - B(P) rho_j) / h`` with ``P = h * b(midpoint)``
    are exact for drifts that are linear along each edge.
    """
    if grid.kind != "uniform-truncated":
        raise ValueError("the grid solver needs a uniform-truncated grid")
    d = grid.dim
    shape = grid.shape
    h = grid.spacing
    n = grid.size
    b = _drift_b(v, grid.gaussian)
    idx = np.arange(n).reshape(shape)
    rows, cols, vals = [], [], []
    for k in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[k] = slice(0, -1)
        hi[k] = slice(1, None)
        i = idx[tuple(lo)].ravel()
        j = idx[tuple(hi)].ravel()
        mid = 0.5 * (grid.nodes[i] + grid.nodes[j])
        P = h * b(mid)[:, k]
        out_i = _bernoulli(-P) / h  # coefficient of rho_i in the flux i -> j
        in_j = _bernoulli(P) / h  # coefficient of rho_j in the flux i -> j
        # flux J leaves cell i and enters cell j
        rows += [i, i, j, j]
        cols += [i, j, i, j]
        vals += [-out_i, in_j, out_i, -in_j]
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return A


def _kernel_vector(A: sp.csr_matrix, max_iters: int, tol: float) -> np.ndarray:
    """Nonnegative kernel vector of a singular M-matrix by shifted inverse iteration."""
    n = A.shape[0]
    scale = float(abs(A).sum(axis=1).max())
    shift = 1e-9 * scale
    absA = abs(A)
    lu = spla.splu((A - shift * sp.identity(n, format="csc")).tocsc())
    x = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        y = lu.solve(x)
        y /= y[np.argmax(np.abs(y))]
        # componentwise backward error of A y = 0
        rel = float(np.max(np.abs(A @ y) / (absA @ np.abs(y))))
        x = y
        if rel <= tol:
            return x
    raise ConvergenceError(f"inverse iteration did not reach the residual tolerance (last {rel:.3e})")


def solve_grid(
    v: DriftField,
    grid: QuadratureGrid,
    B: Optional[GaussianSpec] = None,
    max_iters: int = 200,
    tol: float = 1e-12,
    compute_residual: bool = True,
) -> StationarySolution:
    """Finite-volume stationary solution on a uniform grid (dimension 1-3).

    ``B`` selects the reference ``gamma_B`` (drift ``-Bx + v``); the grid is
    rebuilt for that reference if needed.  The returned density is relative to
    the reference and normalized against the grid weights.
    """
    if grid.kind != "uniform-truncated":
        raise ValueError("solve_grid requires a uniform-truncated grid")
    if B is not None and (grid.reference is None or grid.reference is not B):
        grid = build_grid(grid.dim, grid.order, grid.kind, grid.truncation_radius, gaussian=B)
    ref = grid.gaussian
    if v.is_zero:
        f = DensityFn.constant(grid, 1.0, probability=True, tag="grid-kernel")
        return _with_residual(StationarySolution(f, v, 0.0, math.nan, "grid-kernel"), compute_residual)

    A = assemble_operator(v, grid)
    # similarity transform D^{-1} A D with D = gamma density: its kernel is f = rho / gamma
    # directly and neighbouring entries stay comparable, so the far field keeps
    # full relative accuracy
    log_g = -0.5 * np.einsum("ni,ij,nj->n", grid.nodes, ref.precision, grid.nodes)
    A = A.tocoo()
    ratio = np.exp(log_g[A.col] - log_g[A.row])
    scaled = sp.csr_matrix((A.data * ratio, (A.row, A.col)), shape=A.shape)
    fvec = _kernel_vector(scaled, max_iters, tol)
    if np.any(fvec < -1e-12 * np.max(np.abs(fvec))):
        raise SchemeViolationError("kernel vector has negative entries")
    if not np.all(np.isfinite(fvec)):
        raise ConvergenceError("kernel vector is not finite")
    fvec = np.maximum(fvec, np.finfo(float).tiny)
    mass = integrate(grid, fvec)
    if not mass > 0:
        raise DegenerateInputError("discrete stationary vector has no mass")
    f = DensityFn(grid, fvec / mass, probability=True, tag="grid-kernel", log_interp=True)
    vnorm = np.linalg.norm(v(grid.nodes), axis=1)
    l1 = integrate(grid, vnorm * f.values)
    sol = StationarySolution(f, v, l1, math.nan, "grid-kernel", {"order": grid.order})
    return _with_residual(sol, compute_residual)


def l1_distance(f: DensityFn, g, grid: Optional[QuadratureGrid] = None) -> float:
    """``int |f - g| d gamma`` on ``grid`` (default: the grid of ``f``)."""
    grid = grid or f.grid
    fv = f.values if grid is f.grid else f(grid.nodes)
    gv = g(grid.nodes) if callable(g) else np.asarray(g)
    return integrate(grid, np.abs(fv - gv))
