"""Gaussian reference measures, quadrature grids, densities and drift fields.

Everything downstream integrates against a centred Gaussian measure through a
:class:`QuadratureGrid`.  Two grid kinds exist:

* ``gauss-hermite-tensor``: tensor products of the probabilists' Gauss-Hermite
  rule (nodes from the Golub-Welsch eigenproblem), the default for smooth
  integrands;
* ``uniform-truncated``: equispaced nodes on ``[-R, R]^d`` with trapezoid
  weights multiplied by the Gaussian density, used where operations must share
  nodes (finite-volume solver, transport).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .errors import (
    DegenerateInputError,
    DomainError,
    GridSizeError,
    NumericError,
)

GridKind = Literal["gauss-hermite-tensor", "uniform-truncated"]
ScalarField = Callable[[np.ndarray], np.ndarray]

SCHEMA_VERSION = 1
DEFAULT_MAX_SIZE = 2_000_000
DEFAULT_RADIUS = 8.0


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to an ``(n, dim)`` float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


# --------------------------------------------------------------------------
# Gaussian reference measures
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Centred Gaussian with precision matrix ``B`` (covariance ``B^{-1}``)."""

    precision: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @classmethod
    def from_precision(cls, B) -> "GaussianSpec":
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if B.shape[0] != B.shape[1]:
            raise ValueError("precision matrix must be square")
        if not np.allclose(B, B.T, atol=1e-12, rtol=0.0):
            raise ValueError("precision matrix must be symmetric")
        B = 0.5 * (B + B.T)
        lam, U = np.linalg.eigh(B)
        if lam.min() <= 0.0:
            raise ValueError("precision matrix must be positive definite")
        B.setflags(write=False)
        return cls(precision=B, eigenvalues=lam, eigenvectors=U)

    @classmethod
    def standard(cls, dim: int) -> "GaussianSpec":
        return cls.from_precision(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.precision.shape[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def is_standard(self) -> bool:
        return bool(np.array_equal(self.precision, np.eye(self.dim)))

    def matrix_function(self, fn) -> np.ndarray:
        """Apply a scalar function to ``B`` through its eigendecomposition."""
        U = self.eigenvectors
        return (U * fn(self.eigenvalues)) @ U.T

    @property
    def inv_sqrt(self) -> np.ndarray:
        return self.matrix_function(lambda lam: lam ** -0.5)

    @property
    def covariance(self) -> np.ndarray:
        return self.matrix_function(lambda lam: 1.0 / lam)

    def density(self, x) -> np.ndarray:
        return gaussian_density(self, x)

    def to_dict(self) -> dict:
        return {"precision": self.precision.tolist()}


def gaussian_density(spec: GaussianSpec, x) -> np.ndarray:
    """Lebesgue density ``(2 pi)^{-d/2} det(B)^{1/2} exp(-<Bx, x>/2)``."""
    pts = as_points(x, spec.dim)
    quad = np.einsum("ni,ij,nj->n", pts, spec.precision, pts)
    logdet = float(np.sum(np.log(spec.eigenvalues)))
    return np.exp(-0.5 * quad + 0.5 * logdet - 0.5 * spec.dim * math.log(2.0 * math.pi))


# --------------------------------------------------------------------------
# Quadrature grids
# --------------------------------------------------------------------------


def hermite_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite rule for the standard normal weight (Golub-Welsch).

    The Jacobi matrix of the monic probabilists' Hermite polynomials has zero
    diagonal and off-diagonal ``sqrt(k)``; nodes are its eigenvalues and the
    weights are the squared first eigenvector components.
    """
    if order < 1:
        raise ValueError("order must be positive")
    if order == 1:
        return np.zeros(1), np.ones(1)
    off = np.sqrt(np.arange(1, order, dtype=float))
    nodes, vecs = eigh_tridiagonal(np.zeros(order), off)
    weights = vecs[0, :] ** 2
    # symmetrize away the last-bit asymmetry of the eigensolver
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights / weights.sum()


def _uniform_axis(order: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    nodes = np.linspace(-radius, radius, order)
    h = nodes[1] - nodes[0]
    w = np.full(order, h)
    w[[0, -1]] *= 0.5
    w = w * np.exp(-0.5 * nodes**2)
    return nodes, w / w.sum()


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor-product nodes and probability weights for a Gaussian measure.

    ``axis_nodes``/``axis_weights`` hold the one-dimensional factors in the
    coordinates of the standard Gaussian; ``nodes`` are mapped by
    ``B^{-1/2}`` when the grid represents a non-standard reference.
    """

    dim: int
    kind: str
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    axis_nodes: tuple
    axis_weights: tuple
    truncation_radius: Optional[float] = None
    reference: Optional[GaussianSpec] = None

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axis_nodes)

    @property
    def spacing(self) -> float:
        if self.kind != "uniform-truncated":
            raise ValueError("spacing is defined for uniform grids only")
        a = self.axis_nodes[0]
        return float(a[1] - a[0])

    @property
    def gaussian(self) -> GaussianSpec:
        return self.reference if self.reference is not None else GaussianSpec.standard(self.dim)

    def lebesgue_weights(self) -> np.ndarray:
        """Cell volumes of a uniform grid (``h^d`` per node)."""
        return np.full(self.size, self.spacing**self.dim)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "dim": self.dim,
            "kind": self.kind,
            "order": self.order,
            "truncation_radius": self.truncation_radius,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
        }
        if self.reference is not None and not self.reference.is_standard:
            out["precision"] = self.reference.precision.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureGrid":
        ref = None
        if "precision" in data:
            ref = GaussianSpec.from_precision(data["precision"])
        grid = build_grid(
            data["dim"], data["order"], data["kind"], data.get("truncation_radius"), gaussian=ref
        )
        nodes = np.asarray(data["nodes"], dtype=float).reshape(grid.nodes.shape)
        weights = np.asarray(data["weights"], dtype=float)
        # stored numbers are authoritative; the rebuilt tensor structure is kept
        return replace(grid, nodes=nodes, weights=weights)


def build_grid(
    dim: int,
    order: int,
    kind: GridKind = "gauss-hermite-tensor",
    truncation_radius: Optional[float] = None,
    *,
    gaussian: Optional[GaussianSpec] = None,
    max_size: int = DEFAULT_MAX_SIZE,
) -> QuadratureGrid:
    """Build a tensor quadrature grid for a centred Gaussian in dimension 1-3."""
    if dim not in (1, 2, 3):
        raise ValueError("dim must be 1, 2 or 3")
    if order < 2:
        raise ValueError("order must be at least 2")
    if order**dim > max_size:
        raise GridSizeError(f"grid of {order}^{dim} nodes exceeds the cap of {max_size}")
    if gaussian is not None and gaussian.dim != dim:
        raise ValueError("gaussian reference has the wrong dimension")

    if kind == "gauss-hermite-tensor":
        x1, w1 = hermite_rule(order)
        radius = None
    elif kind == "uniform-truncated":
        radius = DEFAULT_RADIUS if truncation_radius is None else float(truncation_radius)
        if radius <= 0:
            raise ValueError("truncation radius must be positive")
        x1, w1 = _uniform_axis(order, radius)
    else:
        raise ValueError(f"unknown grid kind {kind!r}")

    mesh = np.meshgrid(*([x1] * dim), indexing="ij")
    z = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([w1] * dim), indexing="ij")
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    w = w / w.sum()

    if gaussian is not None and not gaussian.is_standard:
        if kind == "uniform-truncated":
            # uniform grids keep physical nodes; reweight by the gamma_B density
            lam = gaussian.eigenvalues
            if not np.allclose(gaussian.precision, np.diag(np.diag(gaussian.precision))):
                raise ValueError("uniform grids support diagonal precision matrices only")
            axis_w = []
            for b in np.diag(gaussian.precision):
                ww = np.full(order, x1[1] - x1[0])
                ww[[0, -1]] *= 0.5
                ww = ww * np.exp(-0.5 * b * x1**2)
                axis_w.append(ww / ww.sum())
            wmesh = np.meshgrid(*axis_w, indexing="ij")
            w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
            w = w / w.sum()
            del lam
            return QuadratureGrid(dim, kind, order, z, w, (x1,) * dim, tuple(axis_w), radius, gaussian)
        nodes = z @ gaussian.inv_sqrt.T
    else:
        nodes = z
    return QuadratureGrid(dim, kind, order, nodes, w, (x1,) * dim, (w1,) * dim, radius, gaussian)


def integrate(grid: QuadratureGrid, phi) -> float:
    """``sum(weights * phi(nodes))``; ``phi`` is a callable or nodal values."""
    vals = phi(grid.nodes) if callable(phi) else phi
    vals = np.asarray(vals, dtype=float).reshape(-1)
    if vals.shape[0] != grid.size:
        raise ValueError("nodal values do not match the grid")
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NumericError(f"non-finite integrand at node {grid.nodes[i].tolist()}", node=grid.nodes[i])
    return float(np.dot(grid.weights, vals))


# --------------------------------------------------------------------------
# Densities
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityFn:
    """Nodal values of a function on a grid, optionally with an exact evaluator.

    Off-grid evaluation prefers ``closed_form``; otherwise it interpolates the
    nodal values with cubic splines and extrapolates by the boundary value.
    With ``log_interp`` the logarithm of strictly positive values is
    interpolated instead.
    """

    grid: QuadratureGrid
    values: np.ndarray
    closed_form: Optional[ScalarField] = None
    probability: bool = False
    tolerance: float = 1e-10
    tag: str = ""
    log_interp: bool = False
    extrapolate: bool = True
    _interp: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.shape[0] != self.grid.size:
            raise ValueError("values do not match grid size")
        if self.probability and vals.size and vals.min() < 0.0:
            i = int(np.argmin(vals))
            raise DomainError(f"negative density value {vals[i]:.3e} at node {self.grid.nodes[i].tolist()}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: QuadratureGrid, fn: ScalarField, **kw) -> "DensityFn":
        return cls(grid=grid, values=np.asarray(fn(grid.nodes), dtype=float), closed_form=fn, **kw)

    @classmethod
    def constant(cls, grid: QuadratureGrid, c: float = 1.0, **kw) -> "DensityFn":
        return cls.from_callable(grid, lambda x: np.full(np.shape(x)[0], float(c)), **kw)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def reference(self) -> GaussianSpec:
        return self.grid.gaussian

    def mass(self) -> float:
        return integrate(self.grid, self.values)

    def __call__(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        if self.closed_form is not None:
            return np.asarray(self.closed_form(pts), dtype=float)
        return self._interpolate(pts)

    def _interpolate(self, pts: np.ndarray) -> np.ndarray:
        g = self.grid
        axes = [np.sort(np.unique(a)) for a in self._physical_axes()]
        lo = np.array([a[0] for a in axes])
        hi = np.array([a[-1] for a in axes])
        outside = np.any((pts < lo) | (pts > hi), axis=1)
        if outside.any() and not self.extrapolate:
            raise DomainError("evaluation point outside the grid support")
        pts = np.clip(pts, lo, hi)
        if not self._interp:
            vals = self.values.reshape(g.shape)
            if self.log_interp:
                vals = np.log(vals)
            if g.dim == 1:
                self._interp.append(CubicSpline(axes[0], vals))
            else:
                self._interp.append(RegularGridInterpolator(tuple(axes), vals, method="cubic"))
        fn = self._interp[0]
        out = fn(pts[:, 0]) if g.dim == 1 else fn(pts)
        return np.exp(out) if self.log_interp else out

    def _physical_axes(self):
        g = self.grid
        if g.reference is None or g.reference.is_standard or g.kind == "uniform-truncated":
            return g.axis_nodes
        # Gauss-Hermite grids for diagonal gamma_B are still rectilinear
        scale = np.sqrt(1.0 / np.diag(g.reference.precision))
        if not np.allclose(g.reference.precision, np.diag(np.diag(g.reference.precision))):
            raise DomainError("interpolation on rotated grids is not supported; supply closed_form")
        return tuple(a * s for a, s in zip(g.axis_nodes, scale))

    def with_values(self, values, closed_form=None, **kw) -> "DensityFn":
        return replace(self, values=np.asarray(values, dtype=float), closed_form=closed_form, _interp=[], **kw)

    def to_dict(self) -> dict:
        out = self.grid.to_dict()
        out["values"] = self.values.tolist()
        out["tag"] = self.tag
        out["probability"] = self.probability
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "DensityFn":
        grid = QuadratureGrid.from_dict(data)
        return cls(
            grid=grid,
            values=np.asarray(data["values"], dtype=float),
            probability=bool(data.get("probability", False)),
            tag=data.get("tag", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "DensityFn":
        return cls.from_dict(json.loads(text))


def normalize(f: DensityFn) -> DensityFn:
    """Rescale ``f`` so that it integrates to one on its grid."""
    m = f.mass()
    if not m > 0.0:
        raise DegenerateInputError(f"cannot normalize a density of mass {m}")
    if m == 1.0:
        return replace(f, probability=True)
    cf = None
    if f.closed_form is not None:
        base = f.closed_form
        cf = lambda x: base(x) / m  # noqa: E731
    return replace(f, values=f.values / m, closed_form=cf, probability=True, _interp=[])


# --------------------------------------------------------------------------
# Drift fields
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DriftField:
    """A vector field ``v: R^d -> R^d`` with descriptive metadata.

    ``potential`` is set for gradient fields (``v = grad P`` with ``P(0) = 0``);
    ``breakpoints`` lists coordinates where ``v`` is not smooth (1D only).
    ``jacobian_divergence`` gives the classical divergence when known.
    """

    dim: int
    family: str
    params: dict
    func: Callable[[np.ndarray], np.ndarray]
    potential: Optional[ScalarField] = None
    divergence: Optional[ScalarField] = None
    breakpoints: tuple = ()
    separable: bool = False

    def __call__(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        out = np.asarray(self.func(pts), dtype=float)
        return out.reshape(pts.shape[0], self.dim)

    def norm(self, x) -> np.ndarray:
        return np.linalg.norm(self(x), axis=1)

    @property
    def is_zero(self) -> bool:
        return self.family == "zero"

    def scaled(self, lam: float) -> "DriftField":
        if lam == 0.0:
            return zero_drift(self.dim)
        base = self
        pot = None if base.potential is None else (lambda x: lam * base.potential(x))
        div = None if base.divergence is None else (lambda x: lam * base.divergence(x))
        return DriftField(
            self.dim,
            self.family,
            {**self.params, "scale": lam * self.params.get("scale", 1.0)},
            lambda x: lam * base(x),
            pot,
            div,
            self.breakpoints,
            self.separable,
        )

    def describe(self) -> dict:
        return {"family": self.family, "dim": self.dim, "parameters": _jsonable(self.params)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def zero_drift(dim: int) -> DriftField:
    return DriftField(
        dim,
        "zero",
        {},
        lambda x: np.zeros_like(x),
        potential=lambda x: np.zeros(x.shape[0]),
        divergence=lambda x: np.zeros(x.shape[0]),
        separable=True,
    )


def constant_drift(c: Sequence[float]) -> DriftField:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if not np.any(c):
        return zero_drift(c.size)
    return DriftField(
        c.size,
        "constant",
        {"c": c.tolist()},
        lambda x: np.broadcast_to(c, x.shape).copy(),
        potential=lambda x: x @ c,
        divergence=lambda x: np.zeros(x.shape[0]),
        separable=True,
    )


def linear_drift(K) -> DriftField:
    """``v(x) = -K x``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    sym = np.allclose(K, K.T)
    pot = (lambda x: -0.5 * np.einsum("ni,ij,nj->n", x, K, x)) if sym else None
    diag = np.allclose(K, np.diag(np.diag(K)))
    return DriftField(
        K.shape[0],
        "linear",
        {"K": K.tolist()},
        lambda x: -x @ K.T,
        potential=pot,
        divergence=lambda x: np.full(x.shape[0], -np.trace(K)),
        separable=diag,
    )


def polynomial_drift(coeffs: Sequence[float]) -> DriftField:
    """1D ``v(x) = sum_k a_k x^k``."""
    a = np.asarray(coeffs, dtype=float)
    poly = np.polynomial.Polynomial(a)
    anti = poly.integ(lbnd=0.0)
    der = poly.deriv()
    return DriftField(
        1,
        "polynomial",
        {"coeffs": a.tolist()},
        lambda x: poly(x[:, 0])[:, None],
        potential=lambda x: anti(x[:, 0]),
        divergence=lambda x: der(x[:, 0]),
        separable=True,
    )


def piecewise_drift(cap: float = 1.0, slope: float = 1.0) -> DriftField:
    """1D ``v(x) = slope * sign(x) * min(|x|, cap)``."""
    cap = float(cap)
    slope = float(slope)

    def pot(x):
        s = np.abs(x[:, 0])
        return slope * np.where(s <= cap, 0.5 * s**2, cap * s - 0.5 * cap**2)

    return DriftField(
        1,
        "piecewise",
        {"cap": cap, "slope": slope},
        lambda x: slope * (np.sign(x) * np.minimum(np.abs(x), cap)),
        potential=pot,
        divergence=lambda x: slope * (np.abs(x[:, 0]) < cap).astype(float),
        breakpoints=(-cap, cap),
        separable=True,
    )


def saturating_drift(kappa: float = 2.0) -> DriftField:
    """1D ``v(x) = -kappa x / (1 + |x|)``, bounded by ``kappa``."""
    kappa = float(kappa)

    def pot(x):
        s = np.abs(x[:, 0])
        return -kappa * (s - np.log1p(s))

    return DriftField(
        1,
        "saturating",
        {"kappa": kappa},
        lambda x: -kappa * x / (1.0 + np.abs(x)),
        potential=pot,
        divergence=lambda x: -kappa / (1.0 + np.abs(x[:, 0])) ** 2,
        breakpoints=(0.0,),
        separable=True,
    )


def sine_drift(amplitude: float = 1.0, frequency: float = 1.0, dim: int = 1) -> DriftField:
    """``v(x)_i = amplitude * sin(frequency * x_i)``."""
    A, k = float(amplitude), float(frequency)
    return DriftField(
        dim,
        "sine",
        {"amplitude": A, "frequency": k},
        lambda x: A * np.sin(k * x),
        potential=lambda x: np.sum(A * (1.0 - np.cos(k * x)) / k, axis=1),
        divergence=lambda x: np.sum(A * k * np.cos(k * x), axis=1),
        separable=True,
    )


def bump_drift(center: Sequence[float], width: float = 1.0, amplitude: Sequence[float] = (1.0,)) -> DriftField:
    """Gaussian bump ``amplitude * exp(-|x - center|^2 / (2 width^2))``."""
    m = np.atleast_1d(np.asarray(center, dtype=float))
    A = np.broadcast_to(np.atleast_1d(np.asarray(amplitude, dtype=float)), m.shape).copy()
    w2 = float(width) ** 2

    def func(x):
        e = np.exp(-0.5 * np.sum((x - m) ** 2, axis=1) / w2)
        return e[:, None] * A

    def div(x):
        e = np.exp(-0.5 * np.sum((x - m) ** 2, axis=1) / w2)
        return -e * ((x - m) @ A) / w2

    return DriftField(m.size, "bump", {"center": m.tolist(), "width": float(width), "amplitude": A.tolist()},
                      func, divergence=div)


def tabulated_drift(nodes: Sequence[float], values: Sequence[float]) -> DriftField:
    """1D piecewise-linear interpolation of tabulated values, constant outside."""
    xs = np.asarray(nodes, dtype=float)
    vs = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != vs.shape or np.any(np.diff(xs) <= 0):
        raise ValueError("tabulated drift needs increasing 1D nodes with matching values")
    # exact antiderivative of the piecewise-linear interpolant, anchored at 0
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vs[1:] + vs[:-1]) * np.diff(xs))])

    def antiderivative(z):
        k = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, len(xs) - 2)
        zc = np.clip(z, xs[0], xs[-1])
        dz = zc - xs[k]
        slope = (vs[k + 1] - vs[k]) / (xs[k + 1] - xs[k])
        inside = cum[k] + vs[k] * dz + 0.5 * slope * dz**2
        return inside + vs[0] * np.minimum(z - xs[0], 0.0) + vs[-1] * np.maximum(z - xs[-1], 0.0)

    offset = float(antiderivative(np.zeros(1))[0])
    return DriftField(
        1,
        "tabulated",
        {"nodes": xs.tolist(), "values": vs.tolist()},
        lambda x: np.interp(x[:, 0], xs, vs)[:, None],
        potential=lambda x: antiderivative(x[:, 0]) - offset,
        breakpoints=tuple(xs.tolist()),
        separable=True,
    )


def product_drift(factors: Sequence[DriftField]) -> DriftField:
    """Diagonal product ``v(x) = (v_1(x_1), ..., v_d(x_d))`` of 1D drifts."""
    factors = list(factors)
    if any(f.dim != 1 for f in factors):
        raise ValueError("product factors must be one-dimensional")
    d = len(factors)

    def func(x):
        return np.stack([f(x[:, [i]])[:, 0] for i, f in enumerate(factors)], axis=1)

    pot = None
    if all(f.potential is not None for f in factors):
        pot = lambda x: sum(f.potential(x[:, [i]]) for i, f in enumerate(factors))  # noqa: E731
    div = None
    if all(f.divergence is not None for f in factors):
        div = lambda x: sum(f.divergence(x[:, [i]]) for i, f in enumerate(factors))  # noqa: E731
    return DriftField(
        d,
        "product",
        {"factors": [f.describe() for f in factors]},
        func,
        potential=pot,
        divergence=div,
        separable=True,
    )


def shift_to_precision(B) -> DriftField:
    """``v(x) = (I - B) x`` so that ``b(x) = -Bx``."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return linear_drift(B - np.eye(B.shape[0]))


DRIFT_FAMILIES = {
    "zero": lambda dim=1: zero_drift(dim),
    "constant": lambda c: constant_drift(c),
    "linear": lambda K: linear_drift(K),
    "polynomial": lambda coeffs: polynomial_drift(coeffs),
    "piecewise": lambda cap=1.0, slope=1.0: piecewise_drift(cap, slope),
    "saturating": lambda kappa=2.0: saturating_drift(kappa),
    "sine": lambda amplitude=1.0, frequency=1.0, dim=1: sine_drift(amplitude, frequency, dim),
    "bump": lambda center, width=1.0, amplitude=(1.0,): bump_drift(center, width, amplitude),
    "tabulated": lambda nodes, values: tabulated_drift(nodes, values),
    "gaussian_precision": lambda B: shift_to_precision(B),
}


def make_drift(family: str, **params) -> DriftField:
    """Build a drift from a family name and keyword parameters."""
    if family == "product":
        return product_drift([make_drift(**f) for f in params["factors"]])
    try:
        builder = DRIFT_FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown drift family {family!r}") from None
    return builder(**params)
