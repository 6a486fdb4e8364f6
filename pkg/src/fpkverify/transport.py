"""Kantorovich (Wasserstein-1) distances between measures given by densities.

One dimension uses the exact formula ``int |S(x)| dx`` with ``S`` the
cumulative mass of the signed difference.  In two and three dimensions the
measures are binned onto a coarse cell-centred lattice and the transport
problem is solved either by annealed, stabilized Sinkhorn iterations or
exactly as a linear program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ConvergenceError, UnbalancedInputError, UnsupportedInputError
from .measure import DensityFn, GaussianSpec, as_points

CDF_RADIUS = 16.0
CDF_STEP = 1e-3
COARSE_RADIUS = 5.0
COARSE_CELLS = {2: 40, 3: 12}
BALANCE_TOL = 1e-8


@dataclass(frozen=True)
class KantorovichResult:
    value: float
    method: str
    error_estimate: float
    epsilon: Optional[float] = None
    lower_bound: Optional[float] = None
    details: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SignedMeasureRepr:
    """Signed measure ``density * gamma_ref`` with its total mass."""

    dim: int
    density: Callable[[np.ndarray], np.ndarray]
    reference: GaussianSpec
    total_mass: float
    tag: str = ""

    def lebesgue_density(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        return np.asarray(self.density(pts), dtype=float) * self.reference.density(pts)

    def scaled(self, c: float) -> "SignedMeasureRepr":
        base = self.density
        return SignedMeasureRepr(self.dim, lambda x: c * base(x), self.reference, c * self.total_mass, self.tag)

    @classmethod
    def difference(cls, mu: DensityFn, nu: DensityFn) -> "SignedMeasureRepr":
        """``mu - nu`` for densities relative to the same reference."""
        if mu.dim != nu.dim:
            raise ValueError("measures live in different dimensions")
        ref = mu.reference
        if not np.allclose(ref.precision, nu.reference.precision):
            raise ValueError("densities are relative to different Gaussians")
        return cls(mu.dim, lambda x: mu(x) - nu(x), ref, mu.mass() - nu.mass(), "difference")

    @classmethod
    def from_values(cls, density: Callable, dim: int, total_mass: float,
                    reference: Optional[GaussianSpec] = None, tag: str = "") -> "SignedMeasureRepr":
        return cls(dim, density, reference or GaussianSpec.standard(dim), total_mass, tag)


# --------------------------------------------------------------------------
# One dimension
# --------------------------------------------------------------------------


def _cell_masses_1d(sigma: SignedMeasureRepr, edges: np.ndarray) -> np.ndarray:
    z, w = np.polynomial.legendre.leggauss(4)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    pts = (mid[:, None] + half[:, None] * z[None, :]).ravel()
    vals = sigma.lebesgue_density(pts[:, None]).reshape(mid.size, 4)
    return half * (vals @ w)


def _abs_cumulative_integral(masses: np.ndarray, h: float) -> float:
    S = np.concatenate([[0.0], np.cumsum(masses)])
    a = np.abs(S)
    return float(h * (a.sum() - 0.5 * (a[0] + a[-1])))


def w1_signed_1d(sigma: SignedMeasureRepr, radius: float = CDF_RADIUS, step: float = CDF_STEP) -> KantorovichResult:
    """``int |sigma((-inf, x])| dx`` on a fine uniform grid.

    Cell masses use 4-point Gauss-Legendre; the error estimate compares the
    result with the same computation at double spacing.
    """
    n = int(round(2 * radius / step))
    n += n % 2
    edges = np.linspace(-radius, radius, n + 1)
    h = edges[1] - edges[0]
    m = _cell_masses_1d(sigma, edges)
    total = float(m.sum())
    if abs(total) > BALANCE_TOL:
        raise UnsupportedInputError(f"signed measure is not balanced (mass {total:.3e})")
    fine = _abs_cumulative_integral(m, h)
    coarse = _abs_cumulative_integral(m[0::2] + m[1::2], 2 * h)
    # cumulative mass never crosses the box edge; what leaks out is bounded by the
    # mass seen in the outermost cells times the box size
    tail = float(abs(m[0]) + abs(m[-1])) * radius
    err = abs(fine - coarse) / 3.0 + tail
    return KantorovichResult(fine, "signed-cdf-1d", err, details={"step": h, "radius": radius})


# --------------------------------------------------------------------------
# Coarse lattice discretization (2-3D)
# --------------------------------------------------------------------------


def coarse_masses(sigma_density: Callable[[np.ndarray], np.ndarray], dim: int,
                  cells: int, radius: float = COARSE_RADIUS) -> tuple[np.ndarray, np.ndarray, float]:
    """Cell centres and cell integrals of a Lebesgue density on ``[-R, R]^d``.

    Each cell integral uses a tensor 3-point Gauss-Legendre rule.
    """
    H = 2.0 * radius / cells
    centres1 = -radius + H * (np.arange(cells) + 0.5)
    z, w = np.polynomial.legendre.leggauss(3)
    sub = 0.5 * H * z
    subw = 0.5 * H * w
    offs = np.stack([m.ravel() for m in np.meshgrid(*([sub] * dim), indexing="ij")], axis=-1)
    offw = np.prod(np.stack([m.ravel() for m in np.meshgrid(*([subw] * dim), indexing="ij")], axis=-1), axis=-1)
    centres = np.stack([m.ravel() for m in np.meshgrid(*([centres1] * dim), indexing="ij")], axis=-1)
    pts = (centres[:, None, :] + offs[None, :, :]).reshape(-1, dim)
    vals = np.asarray(sigma_density(pts), dtype=float).reshape(centres.shape[0], -1)
    return centres, vals @ offw, H


def _pairwise(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


# --------------------------------------------------------------------------
# Sinkhorn
# --------------------------------------------------------------------------


def _round_plan(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Project a nonnegative matrix onto the transport polytope (Altschuler et al.)."""
    r = P.sum(axis=1)
    X = P * np.minimum(1.0, a / np.where(r > 0, r, 1.0))[:, None]
    c = X.sum(axis=0)
    X = X * np.minimum(1.0, b / np.where(c > 0, c, 1.0))[None, :]
    ea = a - X.sum(axis=1)
    eb = b - X.sum(axis=0)
    s = ea.sum()
    if s > 0:
        X = X + np.outer(ea, eb) / s
    return X


def sinkhorn(
    a: np.ndarray,
    b: np.ndarray,
    C: np.ndarray,
    eps_start: float = 1.0,
    eps_final: float = 1e-3,
    eps_factor: float = 0.5,
    max_iters: int = 10_000,
    tol: float = 1e-9,
    round_tol: float = 1e-3,
    truncation: float = 40.0,
    absorb: float = 20.0,
) -> KantorovichResult:
    """Entropic transport with epsilon annealing and log-absorption.

    Dual potentials ``f, g`` carry the large scalings; the kernel
    ``exp((f + g - C)/eps)`` is dropped where it is negligible against both its
    row and its column maximum, and is stored sparse.  At the final epsilon the plan is rounded onto the exact
    marginals; the reported value is its cost, and a feasible dual obtained by
    a c-transform gives the lower bound.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(a.sum() - b.sum()) > BALANCE_TOL:
        raise UnbalancedInputError("marginals have different masses")
    # empty cells carry no mass and would make the dual potentials infinite
    keep_a = a > 0
    keep_b = b > 0
    if not (keep_a.all() and keep_b.all()):
        a, b, C = a[keep_a], b[keep_b], C[np.ix_(keep_a, keep_b)]
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    eps = eps_start

    def kernel():
        Z = (f[:, None] + g[None, :] - C) / eps
        # keep entries near their row or column maximum so no marginal loses its support
        far = (Z < Z.max(axis=1, keepdims=True) - truncation) & (Z < Z.max(axis=0, keepdims=True) - truncation)
        Z[far] = -np.inf
        K = sparse.csr_matrix(np.exp(Z))
        return K, K.T.tocsr()

    history = []
    while True:
        K, KT = kernel()
        u = np.ones_like(a)
        v = np.ones_like(b)
        err = math.inf
        it = 0
        with np.errstate(divide="ignore"):
            for it in range(max_iters):
                u = a / (K @ v)
                v = b / (KT @ u)
                if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                    raise ConvergenceError(f"Sinkhorn scalings overflowed at eps={eps:g}")
                if max(np.abs(np.log(u)).max(), np.abs(np.log(v)).max()) > absorb:
                    f += eps * np.log(u)
                    g += eps * np.log(v)
                    K, KT = kernel()
                    u[:] = 1.0
                    v[:] = 1.0
                if it % 10 == 0:
                    err = float(np.abs(u * (K @ v) - a).sum())
                    if err < tol:
                        break
        f += eps * np.log(u)
        g += eps * np.log(v)
        history.append((eps, it + 1, err))
        if eps <= eps_final:
            break
        eps = max(eps * eps_factor, eps_final)

    if err > round_tol:
        raise ConvergenceError(f"Sinkhorn marginal error {err:.3e} exceeds {round_tol:g} at eps={eps:g}")
    P = np.exp(np.minimum((f[:, None] + g[None, :] - C) / eps, 700.0))
    P = _round_plan(P, a, b)
    upper = float(np.sum(P * C))
    fc = np.min(C - g[None, :], axis=1)
    lower = float(a @ fc + b @ g)
    return KantorovichResult(
        upper,
        "sinkhorn",
        max(upper - lower, 0.0),
        epsilon=eps,
        lower_bound=lower,
        details={"marginal_error": err, "stages": history, "converged": err < tol},
    )


# --------------------------------------------------------------------------
# Exact linear program
# --------------------------------------------------------------------------


def exact_lp(a: np.ndarray, b: np.ndarray, C: np.ndarray, radius_cut: float = 1.5,
             scale: float = 1e6, max_rounds: int = 20) -> KantorovichResult:
    """Exact transport LP by column generation.

    The LP starts from the pairs with cost <= ``radius_cut``; pairs whose
    reduced cost under the current duals is negative are added until none
    remain, which certifies optimality for the full problem.  Masses are
    scaled by ``scale`` to keep the simplex tolerances meaningful.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(a.sum() - b.sum()) > BALANCE_TOL:
        raise UnbalancedInputError("marginals have different masses")
    n, k = a.size, b.size
    active = C <= radius_cut
    for round_ in range(max_rounds):
        I, J = np.nonzero(active)
        m = I.size
        rows = sparse.csr_matrix((np.ones(m), (I, np.arange(m))), shape=(n, m))
        cols = sparse.csr_matrix((np.ones(m), (J, np.arange(m))), shape=(k, m))
        # the last column constraint is implied by the others
        A_eq = sparse.vstack([rows, cols]).tocsr()[:-1].tocsc()
        b_eq = scale * np.r_[a, b[:-1]]
        res = linprog(C[I, J], A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
        if res.status != 0:
            # infeasible restriction: widen it
            active = C <= 2.0 * radius_cut * (round_ + 2)
            continue
        y = res.eqlin.marginals
        phi = y[:n]
        psi = np.r_[y[n:], 0.0]
        reduced = C - phi[:, None] - psi[None, :]
        violating = (reduced < -1e-12 * max(1.0, float(C.max()))) & ~active
        if not violating.any():
            value = res.fun / scale
            # c-transformed duals give an independent feasible lower bound
            u = np.min(C - psi[None, :], axis=1)
            w = np.min(C - u[:, None], axis=0)
            lower = float(a @ u + b @ w)
            # every pair has nonnegative reduced cost, so the LP optimum is exact up to
            # the simplex feasibility tolerance
            return KantorovichResult(value, "dual-lp", 1e-9 * max(1.0, value), lower_bound=lower,
                                     details={"pairs": int(m), "rounds": round_ + 1})
        active |= violating
    raise ConvergenceError("column generation did not certify the transport LP")


# --------------------------------------------------------------------------
# Public entry points
# --------------------------------------------------------------------------


def _check_probabilities(mu: DensityFn, nu: DensityFn):
    if mu.dim != nu.dim:
        raise ValueError("measures live in different dimensions")
    mm, mn = mu.mass(), nu.mass()
    tol = max(BALANCE_TOL, mu.tolerance, nu.tolerance)
    if abs(mm - mn) > tol:
        raise UnbalancedInputError(f"masses differ: {mm:.12g} vs {mn:.12g}")


def _lebesgue(f: DensityFn):
    ref = f.reference
    return lambda x: np.asarray(f(x), dtype=float) * ref.density(x)


def w1_probability(
    mu: DensityFn,
    nu: DensityFn,
    method: str = "sinkhorn",
    cells: Optional[int] = None,
    radius: float = COARSE_RADIUS,
    **solver_kw,
) -> KantorovichResult:
    """Kantorovich distance between two probability densities.

    One dimension is exact up to quadrature; otherwise the measures are binned
    and ``method`` selects ``sinkhorn`` or ``dual-lp``.
    """
    _check_probabilities(mu, nu)
    if mu.dim == 1:
        sig = SignedMeasureRepr(1, lambda x: mu(x) - nu(x), mu.reference, 0.0)
        r = w1_signed_1d(sig, **{k: v for k, v in solver_kw.items() if k in ("radius", "step")})
        return KantorovichResult(r.value, "cdf-1d", r.error_estimate, details=r.details)
    cells = cells or COARSE_CELLS[mu.dim]
    pts, ma, H = coarse_masses(_lebesgue(mu), mu.dim, cells, radius)
    _, mb, _ = coarse_masses(_lebesgue(nu), nu.dim, cells, radius)
    lost = abs(1.0 - ma.sum()) + abs(1.0 - mb.sum())
    ma = ma / ma.sum()
    mb = mb / mb.sum()
    C = _pairwise(pts)
    if method == "sinkhorn":
        r = sinkhorn(ma, mb, C, **solver_kw)
    elif method == "dual-lp":
        r = exact_lp(ma, mb, C, **solver_kw)
    else:
        raise ValueError(f"unknown method {method!r}")
    diam = 2.0 * radius * math.sqrt(mu.dim)
    details = {**r.details, "cells": cells, "cell_size": H, "truncated_mass": lost}
    return KantorovichResult(r.value, r.method, r.error_estimate + lost * diam, r.epsilon, r.lower_bound, details)


def w1_signed(sigma: SignedMeasureRepr, cells: Optional[int] = None, radius: float = COARSE_RADIUS,
              balance_tol: float = BALANCE_TOL, **kw) -> KantorovichResult:
    """Kantorovich norm of a balanced signed measure."""
    if abs(sigma.total_mass) > balance_tol:
        raise UnsupportedInputError(f"signed measure has total mass {sigma.total_mass:.3e}")
    if sigma.dim == 1:
        return w1_signed_1d(sigma, **kw)
    cells = cells or COARSE_CELLS[sigma.dim]
    pts, m, H = coarse_masses(sigma.lebesgue_density, sigma.dim, cells, radius)
    pos = np.maximum(m, 0.0)
    neg = np.maximum(-m, 0.0)
    total = 0.5 * (pos.sum() + neg.sum())
    if total == 0.0:
        return KantorovichResult(0.0, "dual-lp", 0.0, lower_bound=0.0)
    imbalance = pos.sum() - neg.sum()
    # spread the binning imbalance proportionally; its cost is bounded by mass * diameter
    pos_n = pos / pos.sum() * total
    neg_n = neg / neg.sum() * total
    keep_a = pos_n > 0
    keep_b = neg_n > 0
    C = np.sqrt(np.sum((pts[keep_a][:, None, :] - pts[keep_b][None, :, :]) ** 2, axis=-1))
    r = exact_lp(pos_n[keep_a] / total, neg_n[keep_b] / total, C, **kw)
    diam = 2.0 * radius * math.sqrt(sigma.dim)
    err = total * r.error_estimate + abs(imbalance) * diam
    return KantorovichResult(total * r.value, "dual-lp", err, lower_bound=total * r.lower_bound,
                             details={**r.details, "cells": cells, "cell_size": H})


def w1_oracle_crosscheck(mu: DensityFn, nu: DensityFn, coarse_size: int = 40,
                         radius: float = COARSE_RADIUS) -> dict:
    """Compare Sinkhorn with the exact LP on the same coarse lattice."""
    out = {"coarse_size": coarse_size}
    try:
        sk = w1_probability(mu, nu, "sinkhorn", coarse_size, radius)
        lp = w1_probability(mu, nu, "dual-lp", coarse_size, radius)
    except Exception as exc:  # surfaced in the report, never raised
        out.update(passed=False, error=f"{type(exc).__name__}: {exc}")
        return out
    diff = abs(sk.value - lp.value)
    tol = max(1e-3, 3.0 * sk.error_estimate)
    out.update(sinkhorn=sk.value, exact=lp.value, difference=diff, tolerance=tol,
               sinkhorn_error=sk.error_estimate, passed=bool(diff <= tol))
    return out
