"""Harmonic analysis of the group-averaging and ultrahyperbolic operators
on S3 x S3, verified in exact rational arithmetic per spectral block and
in floating point by independent quadrature."""

__version__ = "0.1.0"

from .rational import Q, rat
from .quaternion import Quaternion, haar_sample
from .poly import (
    MultiPoly,
    euclidean_laplacian,
    homogeneous_component,
    monomial_sphere_integral,
    reduce_on_sphere,
    sphere_integral,
    substitute_linear,
)
from .harmonics import (
    HarmonicBasis,
    ZonalKernel,
    harmonic_basis,
    harmonic_decompose,
    laplace_beltrami_check,
    project_Ek,
    zonal,
    zonal_identity_suite,
)
from .product import (
    SpectralCoeffs,
    analyze,
    bipoly,
    project_Ekl,
    sobolev_norm,
    synthesize,
)
from .operators import (
    BlockOperatorReport,
    box_apply,
    contraction_and_smoothing_check,
    exactness_report,
    extract_reflection,
    kernel_invariance_check,
    solve_box,
    xi_spectral,
    xi_symbolic,
    xi_zonal_kernel,
)
from .quadrature import QuadratureRule, mc_integrate, product_rule

__all__ = [
    "Q", "rat", "Quaternion", "haar_sample", "MultiPoly",
    "euclidean_laplacian", "homogeneous_component", "monomial_sphere_integral",
    "reduce_on_sphere", "sphere_integral", "substitute_linear",
    "HarmonicBasis", "ZonalKernel", "harmonic_basis", "harmonic_decompose",
    "laplace_beltrami_check", "project_Ek", "zonal", "zonal_identity_suite",
    "SpectralCoeffs", "analyze", "bipoly", "project_Ekl", "sobolev_norm",
    "synthesize", "BlockOperatorReport", "box_apply",
    "contraction_and_smoothing_check", "exactness_report", "extract_reflection",
    "kernel_invariance_check", "solve_box", "xi_spectral", "xi_symbolic",
    "xi_zonal_kernel", "QuadratureRule", "mc_integrate", "product_rule",
]
