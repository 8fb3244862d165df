"""Closed-form divergences between Gaussians.

Families:

    kl_full             KL between two full-covariance Gaussians
    kl_diag_reverse     KL(N(mu, diag s) || N(0, I)), the standard VAE term
    kl_diag_forward     KL(N(0, I) || N(mu, diag s)), the zero-avoiding direction
    gjs_full/diag       skew-geometric Jensen-Shannon divergence
    gjs_dual_full/diag  its dual (intermediate on the left of each KL)
    gjs_primed_quadratic  the quadratic combination (1-a)^2 KLf + a^2 KLr
    mmd                 unbiased squared maximum mean discrepancy from samples

The geometric family takes an explicit SkewConvention; there is no implicit
default. All diag variants measure against the standard normal and accept
either a DiagonalGaussian or raw (mu, log_var) arrays of any matching shape,
reducing over the last axis; this is what the VAE losses call per example.

Note on gjs_primed_quadratic: it is exactly the stated quadratic combination.
It is NOT equal to gjs_full(..., Primed) for distinct inputs: the weighted-KL
composition against the normalized intermediate carries the intermediate's
log-normalizer, so gjs_full(g1, g2, a, Primed) = gjs_primed_quadratic(g1, g2, a)
- gjs_dual_full(g1, g2, 1 - a, Original). That relation is exact and is covered
by tests.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .backend import get_kernels
from .errors import InputError
from .gaussian import (
    DiagonalGaussian,
    FullGaussian,
    SkewConvention,
    effective_skew,
    intermediate_full,
)

__all__ = [
    "Family",
    "DivergenceSpec",
    "kl_full",
    "kl_diag_reverse",
    "kl_diag_forward",
    "gjs_full",
    "gjs_dual_full",
    "gjs_diag",
    "gjs_dual_diag",
    "gjs_primed_quadratic",
    "mmd",
]


class Family(enum.Enum):
    KL_FORWARD = "kl-forward"
    KL_REVERSE = "kl-reverse"
    JS = "js"
    LAMBDA = "lambda"
    GJS = "gjs"
    GJS_DUAL = "gjs-dual"
    MMD = "mmd"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().lower().replace("_", "-")
            try:
                return cls(key)
            except ValueError:
                pass
        raise InputError(
            f"unknown divergence family {value!r}; expected one of "
            f"{[f.value for f in cls]}"
        )


_GEOMETRIC = (Family.GJS, Family.GJS_DUAL)


@dataclass(frozen=True)
class DivergenceSpec:
    """Selects a divergence family and its parameters.

    alpha is the geometric skew (GJS families), lambda_skew the arithmetic
    mixture weight (Lambda family), weight the loss-level multiplier, and
    mmd_bandwidth the Gaussian kernel width for MMD. The convention is
    mandatory for the geometric families.
    """

    family: Family
    alpha: float = 0.5
    lambda_skew: float = 0.5
    convention: SkewConvention | None = None
    weight: float = 1.0
    mmd_bandwidth: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.coerce(self.family))
        for name in ("alpha", "lambda_skew"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0):
                raise InputError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)
        if self.convention is not None:
            object.__setattr__(
                self, "convention", SkewConvention.coerce(self.convention)
            )
        elif self.family in _GEOMETRIC:
            raise InputError(
                f"family {self.family.value} requires an explicit convention"
            )
        w = float(self.weight)
        if not (w > 0.0) or not np.isfinite(w):
            raise InputError(f"weight must be positive, got {w}")
        object.__setattr__(self, "weight", w)
        b = float(self.mmd_bandwidth)
        if not (b > 0.0) or not np.isfinite(b):
            raise InputError(f"mmd_bandwidth must be positive, got {b}")
        object.__setattr__(self, "mmd_bandwidth", b)


def _check_same_dim(g1, g2):
    if g1.dim != g2.dim:
        raise InputError(f"dimension mismatch: {g1.dim} vs {g2.dim}")


def kl_full(g1: FullGaussian, g2: FullGaussian) -> float:
    """KL(g1 || g2) for full-covariance Gaussians.

    0.5 (tr(S2^-1 S1) + ln(|S2|/|S1|) + (m2-m1)^T S2^-1 (m2-m1) - n).
    """
    _check_same_dim(g1, g2)
    n = g1.dim
    # Whiten with L2: tr(S2^-1 S1) = ||L2^-1 L1||_F^2.
    a = solve_triangular(g2.chol, g1.chol, lower=True)
    tr = float(np.sum(a * a))
    dev = solve_triangular(g2.chol, g2.mu - g1.mu, lower=True)
    quad = float(dev @ dev)
    return 0.5 * (tr + g2.log_det - g1.log_det + quad - n)


def _mu_logvar(g_or_mu, log_var=None):
    """Accept a DiagonalGaussian or raw (mu, log_var) arrays."""
    if log_var is None:
        g = g_or_mu
        if not isinstance(g, DiagonalGaussian):
            raise InputError("expected a DiagonalGaussian or (mu, log_var) arrays")
        return g.mu, g.log_var
    return np.asarray(g_or_mu, dtype=np.float64), np.asarray(log_var, dtype=np.float64)


def kl_diag_reverse(g, log_var=None):
    """KL(N(mu, diag s) || N(0, I)) = 0.5 sum(s - ln s + mu^2 - 1)."""
    mu, lv = _mu_logvar(g, log_var)
    s = np.exp(lv)
    return 0.5 * np.sum(s - lv + mu * mu - 1.0, axis=-1)


def kl_diag_forward(g, log_var=None):
    """KL(N(0, I) || N(mu, diag s)) = 0.5 sum(1/s + ln s + mu^2/s - 1)."""
    mu, lv = _mu_logvar(g, log_var)
    inv_s = np.exp(-lv)
    return 0.5 * np.sum(inv_s + lv + mu * mu * inv_s - 1.0, axis=-1)


def gjs_full(g1, g2, alpha, conv, *, expanded=False) -> float:
    """Skew-geometric Jensen-Shannon divergence between full Gaussians.

    (1-a) KL(g1 || N_t) + a KL(g2 || N_t) with N_t the geometric intermediate
    under the given convention. `expanded=True` evaluates the single-expression
    closed form instead of composing two KL calls; both agree to roundoff and
    the flag exists purely for cross-checking.
    """
    _check_same_dim(g1, g2)
    a = float(alpha)
    mid = intermediate_full(g1, g2, a, conv)
    if not expanded:
        return (1.0 - a) * kl_full(g1, mid) + a * kl_full(g2, mid)
    n = g1.dim
    w1 = solve_triangular(mid.chol, g1.chol, lower=True)
    w2 = solve_triangular(mid.chol, g2.chol, lower=True)
    tr = (1.0 - a) * float(np.sum(w1 * w1)) + a * float(np.sum(w2 * w2))
    log_det = mid.log_det - (1.0 - a) * g1.log_det - a * g2.log_det
    d1 = solve_triangular(mid.chol, mid.mu - g1.mu, lower=True)
    d2 = solve_triangular(mid.chol, mid.mu - g2.mu, lower=True)
    quad = (1.0 - a) * float(d1 @ d1) + a * float(d2 @ d2)
    return 0.5 * (tr + log_det + quad - n)


def gjs_dual_full(g1, g2, alpha, conv, *, expanded=False) -> float:
    """Dual skew-geometric Jensen-Shannon divergence between full Gaussians.

    (1-a) KL(N_t || g1) + a KL(N_t || g2). The expanded path groups the same
    terms into one expression; under the Original convention it simplifies
    further to the scalar form checked in tests.
    """
    _check_same_dim(g1, g2)
    a = float(alpha)
    mid = intermediate_full(g1, g2, a, conv)
    if not expanded:
        return (1.0 - a) * kl_full(mid, g1) + a * kl_full(mid, g2)
    n = g1.dim
    w1 = solve_triangular(g1.chol, mid.chol, lower=True)
    w2 = solve_triangular(g2.chol, mid.chol, lower=True)
    tr = (1.0 - a) * float(np.sum(w1 * w1)) + a * float(np.sum(w2 * w2))
    log_det = (1.0 - a) * g1.log_det + a * g2.log_det - mid.log_det
    d1 = solve_triangular(g1.chol, g1.mu - mid.mu, lower=True)
    d2 = solve_triangular(g2.chol, g2.mu - mid.mu, lower=True)
    quad = (1.0 - a) * float(d1 @ d1) + a * float(d2 @ d2)
    return 0.5 * (tr + log_det + quad - n)


def _diag_intermediate_terms(lv, mu, t):
    """Shared pieces of the diagonal reductions against N(0, I).

    Returns (s, denom, var_t, mu_t) with denom = (1-t) + t s, var_t = s/denom,
    mu_t = (1-t) mu / denom.
    """
    s = np.exp(lv)
    denom = (1.0 - t) + t * s
    var_t = s / denom
    mu_t = (1.0 - t) * mu / denom
    return s, denom, var_t, mu_t


def gjs_diag(g, alpha, conv, log_var=None):
    """Skew-geometric JS divergence of N(mu, diag s) against N(0, I).

    Elementwise closed form, summed over the last axis:

        0.5 [ ((1-a) s + a) / var_t + ln var_t - (1-a) ln s
              + (1-a)(mu_t - mu)^2 / var_t + a mu_t^2 / var_t - 1 ]

    with (var_t, mu_t) the intermediate parameters under the convention.
    This is the weighted-KL composition written out, so it holds for both
    conventions. Accepts batched (mu, log_var) arrays.
    """
    mu, lv = _mu_logvar(g, log_var)
    a = float(alpha)
    t = effective_skew(a, conv)
    s, _, var_t, mu_t = _diag_intermediate_terms(lv, mu, t)
    dev = mu_t - mu
    elems = (
        ((1.0 - a) * s + a) / var_t
        + np.log(var_t)
        - (1.0 - a) * lv
        + (1.0 - a) * dev * dev / var_t
        + a * mu_t * mu_t / var_t
        - 1.0
    )
    return 0.5 * np.sum(elems, axis=-1)


def gjs_dual_diag(g, alpha, conv, log_var=None):
    """Dual skew-geometric JS divergence of N(mu, diag s) against N(0, I).

    Weighted-KL composition with the intermediate on the left, elementwise:

        0.5 [ var_t ((1-a)/s + a) + (1-a) ln s - ln var_t
              + (1-a)(mu_t - mu)^2 / s + a mu_t^2 - 1 ]

    Under the Original convention this reduces to the scalar form
    0.5 [ (1-a) mu^2/s - mu_t^2/var_t + ln(s^(1-a)/var_t) ]; the general
    expression is kept because the reduction's cancellation (the trace term
    collapsing to 1) only happens when the intermediate skew equals a.
    """
    mu, lv = _mu_logvar(g, log_var)
    a = float(alpha)
    t = effective_skew(a, conv)
    s, _, var_t, mu_t = _diag_intermediate_terms(lv, mu, t)
    dev = mu_t - mu
    elems = (
        var_t * ((1.0 - a) / s + a)
        + (1.0 - a) * lv
        - np.log(var_t)
        + (1.0 - a) * dev * dev / s
        + a * mu_t * mu_t
        - 1.0
    )
    return 0.5 * np.sum(elems, axis=-1)


def gjs_primed_quadratic(g1, g2, alpha) -> float:
    """Quadratic combination (1-a)^2 KL(g1||g2) + a^2 KL(g2||g1).

    Endpoints: a = 0 gives KL(g1||g2) exactly, a = 1 gives KL(g2||g1).
    See the module docstring for how this relates to gjs_full(..., Primed).
    """
    a = float(alpha)
    if not (0.0 <= a <= 1.0):
        raise InputError(f"alpha must lie in [0, 1], got {a}")
    return (1.0 - a) ** 2 * kl_full(g1, g2) + a**2 * kl_full(g2, g1)


def median_heuristic_bandwidth(samples_p, samples_q, cap=2048):
    """Median pairwise Euclidean distance over the pooled samples.

    Deterministic: if the pool exceeds `cap` rows, the first `cap` are used.
    """
    pooled = np.vstack([np.asarray(samples_p, float), np.asarray(samples_q, float)])
    if pooled.shape[0] > cap:
        pooled = pooled[:cap]
    sq = np.sum((pooled[:, None, :] - pooled[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(pooled.shape[0], k=1)
    return float(np.median(np.sqrt(sq[iu])))


def mmd(samples_p, samples_q, bandwidth=1.0, *, median_heuristic=False) -> float:
    """Unbiased squared-MMD estimate between two sample matrices.

    Gaussian kernel k(x, y) = exp(-||x-y||^2 / (2 bandwidth^2)), within-sample
    diagonals excluded. The unbiased estimator can be slightly negative.
    """
    x = np.ascontiguousarray(samples_p, dtype=np.float64)
    y = np.ascontiguousarray(samples_q, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise InputError(
            f"samples must be 2-D with equal column counts, got {x.shape} and {y.shape}"
        )
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise InputError("each sample needs at least 2 rows for the unbiased estimate")
    if median_heuristic:
        bandwidth = median_heuristic_bandwidth(x, y)
    bandwidth = float(bandwidth)
    if not (bandwidth > 0.0):
        raise InputError(f"bandwidth must be positive, got {bandwidth}")
    return float(get_kernels().mmd2_unbiased(x, y, bandwidth))
