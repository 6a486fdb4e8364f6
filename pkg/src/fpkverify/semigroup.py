"""Ornstein-Uhlenbeck semigroup by Mehler-kernel quadrature.

All operators here evaluate

    T_t phi(x) = E[ phi(e^{-t} x - sqrt(1 - e^{-2t}) Y) ],   Y ~ N(0, I)

with a Gauss-Hermite rule in ``Y``.  Results are returned as
:class:`~fpkverify.measure.DensityFn` objects carrying nodal values on the
output grid and an exact evaluator (the same quadrature at arbitrary points),
so semigroup outputs can be fed back into the semigroup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from .errors import UnsupportedInputError
from .measure import (
    DensityFn,
    DriftField,
    GaussianSpec,
    QuadratureGrid,
    as_points,
    hermite_rule,
    integrate,
)

Field = Union[DensityFn, Callable[[np.ndarray], np.ndarray]]

DEFAULT_INNER_ORDER = {1: 64, 2: 32, 3: 16}
DUHAMEL_NODES = 24
AVERAGE_NODES = 16
_CHUNK = 400_000


@dataclass(frozen=True)
class SemigroupParams:
    t: float
    inner_order: Optional[int] = None
    B: Optional[GaussianSpec] = None

    def __post_init__(self):
        if not (self.t >= 0.0) or not math.isfinite(self.t):
            raise ValueError(f"time must be a nonnegative real, got {self.t}")
        if self.inner_order is not None and self.inner_order < 2:
            raise ValueError("inner_order must be at least 2")

    def order_for(self, dim: int) -> int:
        return self.inner_order or DEFAULT_INNER_ORDER[dim]


def decay_factors(t: float) -> tuple[float, float]:
    """``(e^{-t}, sqrt(1 - e^{-2t}))`` accurate for small ``t``."""
    return math.exp(-t), math.sqrt(-math.expm1(-2.0 * t))


@lru_cache(maxsize=32)
def _inner_rule(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x1, w1 = hermite_rule(order)
    mesh = np.meshgrid(*([x1] * dim), indexing="ij")
    y = np.stack([m.ravel() for m in mesh], axis=-1)
    wm = np.meshgrid(*([w1] * dim), indexing="ij")
    w = np.prod(np.stack([m.ravel() for m in wm], axis=-1), axis=-1)
    y.setflags(write=False)
    w.setflags(write=False)
    return y, w / w.sum()


def _evaluator(f: Field) -> Callable[[np.ndarray], np.ndarray]:
    return f if callable(f) else (lambda x: f(x))


def _field_dim(f: Field, grid: Optional[QuadratureGrid]) -> int:
    if isinstance(f, DensityFn):
        return f.dim
    if grid is None:
        raise ValueError("a grid is required when the input is a plain callable")
    return grid.dim


def _output_grid(f: Field, grid: Optional[QuadratureGrid]) -> QuadratureGrid:
    if grid is not None:
        return grid
    if isinstance(f, DensityFn):
        return f.grid
    raise ValueError("a grid is required when the input is a plain callable")


def kernel_average(
    phi: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    contraction: np.ndarray,
    spread: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    weight_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """``sum_j w_j * phi(M x - S y_j) * weight_fn(x, y_j)`` for every row of ``x``.

    ``contraction``/``spread`` are the matrices ``M``/``S``; ``weight_fn`` may
    return extra trailing axes (used for gradient kernels).
    """
    n, d = x.shape
    m = y.shape[0]
    mx = x @ contraction.T
    sy = y @ spread.T
    out = None
    step = max(1, _CHUNK // m)
    for start in range(0, n, step):
        xs = mx[start : start + step]
        pts = (xs[:, None, :] - sy[None, :, :]).reshape(-1, d)
        vals = np.asarray(phi(pts), dtype=float)
        vals = vals.reshape(xs.shape[0], m, *vals.shape[1:])
        if weight_fn is not None:
            extra = weight_fn(x[start : start + step], y)
            vals = vals[..., None] * extra if vals.ndim < extra.ndim else vals * extra
        block = np.tensordot(w, vals, axes=([0], [1]))
        if out is None:
            out = np.empty((n,) + block.shape[1:])
        out[start : start + step] = block
    if out is None:
        out = np.empty((0,))
    return out


def _mehler_matrices(t: float, dim: int, B: Optional[GaussianSpec]):
    """Contraction, spread and inner-sample transform for ``T_t`` or ``T_t^B``."""
    if B is None:
        a, r = decay_factors(t)
        eye = np.eye(dim)
        return a * eye, r * eye, eye
    M = B.matrix_function(lambda lam: np.exp(-t * lam))
    S = B.matrix_function(lambda lam: np.sqrt(-np.expm1(-2.0 * t * lam)))
    return M, S, B.inv_sqrt


def _apply(f: Field, t: float, params: SemigroupParams, grid: Optional[QuadratureGrid]) -> DensityFn:
    out_grid = _output_grid(f, grid)
    dim = _field_dim(f, out_grid)
    phi = _evaluator(f)
    if t == 0.0:
        if isinstance(f, DensityFn) and f.grid is out_grid:
            return f
        vals = phi(out_grid.nodes)
        return DensityFn(out_grid, vals, closed_form=phi)

    B = params.B
    if B is not None and B.dim != dim:
        raise ValueError("B has the wrong dimension")
    M, S, to_ref = _mehler_matrices(t, dim, B)
    y0, w = _inner_rule(dim, params.order_for(dim))
    y = y0 @ to_ref.T

    def evaluate(x):
        return kernel_average(phi, as_points(x, dim), M, S, y, w)

    return DensityFn(out_grid, evaluate(out_grid.nodes), closed_form=evaluate, tag=f"T_{t:g}")


def apply_Tt(f: Field, params: SemigroupParams, grid: Optional[QuadratureGrid] = None) -> DensityFn:
    """Apply the Ornstein-Uhlenbeck semigroup (``T_t^B`` when ``params.B`` is set).

    At ``t = 0`` the input is returned unchanged.
    """
    return _apply(f, params.t, params, grid)


def apply_Tt_B(f: Field, params: SemigroupParams, grid: Optional[QuadratureGrid] = None) -> DensityFn:
    """``T_t^B`` with matrix exponentials computed from the eigendecomposition of ``B``."""
    if params.B is None:
        raise ValueError("apply_Tt_B needs params.B")
    return _apply(f, params.t, params, grid)


def grad_Tt(
    phi: Field,
    params: SemigroupParams,
    grid: Optional[QuadratureGrid] = None,
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
):
    """Gradient of ``T_t phi`` as an evaluator returning ``(n, d)`` arrays.

    With ``gradient`` supplied this commutes the derivative through the
    semigroup (``e^{-t} T_t grad phi``); otherwise it differentiates the
    Mehler kernel, which needs ``t > 0`` but no smoothness of ``phi``.
    Returns ``(nodal_values, evaluator)``.
    """
    t = params.t
    out_grid = _output_grid(phi, grid)
    dim = _field_dim(phi, out_grid)
    if params.B is not None:
        raise UnsupportedInputError("gradients are implemented for the standard semigroup only")
    y, w = _inner_rule(dim, params.order_for(dim))
    a, r = decay_factors(t)
    eye = np.eye(dim)
    fn = _evaluator(phi)

    if gradient is not None:
        def evaluate(x):
            x = as_points(x, dim)
            if t == 0.0:
                return np.asarray(gradient(x), dtype=float).reshape(-1, dim)
            g = lambda p: np.asarray(gradient(p), dtype=float).reshape(-1, dim)  # noqa: E731
            return a * kernel_average(g, x, a * eye, r * eye, y, w)
    else:
        if t == 0.0:
            raise UnsupportedInputError("kernel gradient at t = 0 needs an explicit gradient")

        def evaluate(x):
            x = as_points(x, dim)
            # d/dx phi(a x - r y) against gamma(dy) integrates by parts to -(a/r) E[phi(.) y]
            return -(a / r) * kernel_average(fn, x, a * eye, r * eye, y, w, weight_fn=lambda xs, ys: ys[None, :, :])

    return evaluate(out_grid.nodes), evaluate


# --------------------------------------------------------------------------
# Regularized divergence and Duhamel formula
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegularizedDivergence:
    """Nodal values of the Gaussian divergence of ``u`` smoothed by ``T_s``."""

    s: float
    u: object
    grid: QuadratureGrid
    values: np.ndarray
    l1_norm: float
    evaluate: Callable[[np.ndarray], np.ndarray]

    def mean(self) -> float:
        return integrate(self.grid, self.values)

    def as_density(self) -> DensityFn:
        return DensityFn(self.grid, self.values, closed_form=self.evaluate, tag=f"divergence_s={self.s:g}")


def divergence_evaluator(u, s: float, dim: int, inner_order: Optional[int] = None):
    """Pointwise evaluator of ``T_s div_gamma u``.

    ``div_gamma u = div u - <x, u>`` is the adjoint of the gradient in
    ``L^2(gamma)``.  Writing ``T_s div_gamma u(x) = E[div_gamma u(a x - r Y)]``
    and integrating by parts in ``Y`` removes every derivative of ``u``:

        T_s div_gamma u(x) = -(a/r) E[ <u(a x - r Y), a Y + r x> ],

    which only needs point values of ``u``.
    """
    if not s > 0.0:
        raise ValueError("the smoothing time s must be positive")
    a, r = decay_factors(s)
    y, w = _inner_rule(dim, inner_order or DEFAULT_INNER_ORDER[dim])
    eye = np.eye(dim)
    ufn = u if callable(u) else u.__call__

    def evaluate(x):
        x = as_points(x, dim)

        def weight(xs, ys):
            return a * ys[None, :, :] + r * xs[:, None, :]

        vec = lambda p: np.asarray(ufn(p), dtype=float).reshape(-1, dim)  # noqa: E731
        vals = kernel_average(vec, x, a * eye, r * eye, y, w, weight_fn=weight)
        return -(a / r) * vals.sum(axis=-1)

    return evaluate


def regularized_divergence(
    u: Union[DriftField, Callable[[np.ndarray], np.ndarray]],
    s: float,
    grid: QuadratureGrid,
    inner_order: Optional[int] = None,
) -> RegularizedDivergence:
    """``T_s div_gamma u`` on ``grid`` together with its ``L^1(gamma)`` norm."""
    evaluate = divergence_evaluator(u, s, grid.dim, inner_order)
    vals = evaluate(grid.nodes)
    return RegularizedDivergence(s, u, grid, vals, integrate(grid, np.abs(vals)), evaluate)


def vector_l1(grid: QuadratureGrid, u) -> float:
    """``int |u| d gamma`` for a vector field ``u``."""
    vals = np.asarray(u(grid.nodes), dtype=float).reshape(grid.size, -1)
    return integrate(grid, np.linalg.norm(vals, axis=1))


def _product_field(f: Field, v: DriftField):
    fn = _evaluator(f)
    return lambda x: fn(x)[:, None] * v(x)


def duhamel_reconstruct(
    f: Field,
    v: DriftField,
    t: float,
    grid: Optional[QuadratureGrid] = None,
    time_nodes: int = DUHAMEL_NODES,
    inner_order: Optional[int] = None,
) -> DensityFn:
    """``int_0^t T_s div_gamma(f v) ds`` via ``s = tau^2`` and Gauss-Legendre in ``tau``.

    The substitution cancels the ``s^{-1/2}`` growth of the integrand near 0.
    """
    if not t > 0.0:
        raise ValueError("t must be positive")
    out_grid = _output_grid(f, grid)
    dim = out_grid.dim
    if v.is_zero:
        zero = lambda x: np.zeros(as_points(x, dim).shape[0])  # noqa: E731
        return DensityFn(out_grid, np.zeros(out_grid.size), closed_form=zero, tag="duhamel")
    tau, wt = np.polynomial.legendre.leggauss(time_nodes)
    root = math.sqrt(t)
    tau = 0.5 * root * (tau + 1.0)
    wt = 0.5 * root * wt
    w_field = _product_field(f, v)
    evaluators = [divergence_evaluator(w_field, float(ti * ti), dim, inner_order) for ti in tau]
    coeffs = 2.0 * tau * wt

    def evaluate(x):
        x = as_points(x, dim)
        total = np.zeros(x.shape[0])
        for c, ev in zip(coeffs, evaluators):
            total += c * ev(x)
        return total

    return DensityFn(out_grid, evaluate(out_grid.nodes), closed_form=evaluate, tag="duhamel")


def apply_At(
    f: Field,
    t: float,
    grid: Optional[QuadratureGrid] = None,
    time_nodes: int = AVERAGE_NODES,
    inner_order: Optional[int] = None,
) -> DensityFn:
    """Time average ``(1/t) int_0^t T_s f ds`` by Gauss-Legendre in ``s``."""
    if not t > 0.0:
        raise ValueError("t must be positive")
    out_grid = _output_grid(f, grid)
    s, ws = np.polynomial.legendre.leggauss(time_nodes)
    s = 0.5 * t * (s + 1.0)
    ws = 0.5 * ws  # already divided by t
    parts = [apply_Tt(f, SemigroupParams(float(si), inner_order), out_grid) for si in s]

    def evaluate(x):
        total = None
        for c, p in zip(ws, parts):
            term = c * p(x)
            total = term if total is None else total + term
        return total

    vals = sum(c * p.values for c, p in zip(ws, parts))
    return DensityFn(out_grid, vals, closed_form=evaluate, tag=f"A_{t:g}")
