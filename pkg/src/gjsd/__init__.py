"""Skew-geometric Jensen-Shannon divergences for Gaussians.

Closed forms, Monte Carlo and quadrature oracles, a bivariate mixture-fitting
harness, and a small VAE trainer that uses the divergences as latent-space
regularizers.
"""

from .divergence import (
    DivergenceSpec,
    Family,
    gjs_diag,
    gjs_dual_diag,
    gjs_dual_full,
    gjs_full,
    gjs_primed_quadratic,
    kl_diag_forward,
    kl_diag_reverse,
    kl_full,
    mmd,
)
from .gaussian import (
    DiagonalGaussian,
    FullGaussian,
    SkewConvention,
    intermediate_diag,
    intermediate_full,
    log_pdf,
    sample,
)
from .oracle import (
    DensityHandle,
    McEstimate,
    adaptive_simpson,
    mc_gjs,
    mc_js,
    mc_kl,
    mc_lambda,
    quad_divergence_1d,
)

__version__ = "0.1.0"

__all__ = [
    "DiagonalGaussian",
    "FullGaussian",
    "SkewConvention",
    "DivergenceSpec",
    "Family",
    "log_pdf",
    "sample",
    "intermediate_full",
    "intermediate_diag",
    "kl_full",
    "kl_diag_reverse",
    "kl_diag_forward",
    "gjs_full",
    "gjs_dual_full",
    "gjs_diag",
    "gjs_dual_diag",
    "gjs_primed_quadratic",
    "mmd",
    "DensityHandle",
    "McEstimate",
    "mc_kl",
    "mc_js",
    "mc_lambda",
    "mc_gjs",
    "adaptive_simpson",
    "quad_divergence_1d",
    "__version__",
]
