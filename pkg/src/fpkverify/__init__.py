"""Numerical verification of entropy and Kantorovich bounds for stationary Fokker-Planck-Kolmogorov equations."""

from .checks import VerificationReport, run_suite
from .config import RunConfig, load_config
from .entropy import OrliczContext, entropy_alpha, luxemburg_norm, tail_distribution
from .fpk import StationarySolution, residual_check, solve, solve_1d_explicit, solve_grid
from .measure import DensityFn, DriftField, GaussianSpec, QuadratureGrid, build_grid, integrate, make_drift
from .semigroup import SemigroupParams, apply_At, apply_Tt, duhamel_reconstruct, regularized_divergence
from .transport import KantorovichResult, SignedMeasureRepr, w1_probability, w1_signed

__version__ = "0.1.0"

__all__ = [
    "DensityFn", "DriftField", "GaussianSpec", "KantorovichResult", "OrliczContext", "QuadratureGrid",
    "RunConfig", "SemigroupParams", "SignedMeasureRepr", "StationarySolution", "VerificationReport",
    "apply_At", "apply_Tt", "build_grid", "duhamel_reconstruct", "entropy_alpha", "integrate", "load_config",
    "luxemburg_norm", "make_drift", "regularized_divergence", "residual_check", "run_suite", "solve",
    "solve_1d_explicit", "solve_grid", "tail_distribution", "w1_probability", "w1_signed",
]
