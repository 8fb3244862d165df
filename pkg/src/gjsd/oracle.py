"""Independent verification of the closed forms.

Monte Carlo estimators and 1-D adaptive Simpson quadrature for every
divergence in the package, including the arithmetic-mixture families (JS and
the lambda family) that have no Gaussian closed form. These estimators share
no code with the closed-form module beyond the Gaussian type itself: MC draws
come from the sampling contract, quadrature integrates the defining integrand.

All reductions go through the backend's fixed-tree pairwise summation, so
estimates are reproducible bit-for-bit per (seed, n).
"""

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .backend import get_kernels
from .divergence import DivergenceSpec, Family
from .errors import InputError, NumericalError, QuadratureError
from .gaussian import (
    DiagonalGaussian,
    FullGaussian,
    effective_skew,
    intermediate_full,
    log_pdf,
    sample,
)

_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class DensityHandle:
    """A density the oracles can sample from and evaluate.

    log_pdf must accept an (m, dim) batch and return (m,); sampler takes
    (count, seed) and returns (count, dim). For handles built from package
    Gaussians the underlying object rides along so the geometric-mean
    intermediate can be constructed exactly.
    """

    log_pdf: Callable
    sampler: Callable
    dim: int
    gaussian: object = None

    @classmethod
    def from_gaussian(cls, g):
        if not isinstance(g, (DiagonalGaussian, FullGaussian)):
            raise InputError("from_gaussian expects a package Gaussian type")
        return cls(
            log_pdf=lambda x, _g=g: log_pdf(_g, x),
            sampler=lambda count, seed, _g=g: sample(_g, count, seed),
            dim=g.dim,
            gaussian=g,
        )


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int


def _sub_seeds(seed, k):
    """Derive k deterministic integer sub-seeds from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(k)]


def _check_finite(vals, xs, what):
    if np.all(np.isfinite(vals)):
        return
    idx = int(np.argmin(np.isfinite(vals)))
    raise NumericalError(
        f"non-finite {what} at sample index {idx}: x = {xs[idx]}, value = {vals[idx]}"
    )


def _mean_se(vals):
    """Mean and standard error via fixed-tree pairwise sums."""
    kern = get_kernels()
    n = vals.size
    mean = kern.pairwise_sum(vals) / n
    dev = vals - mean
    var = kern.pairwise_sum(dev * dev) / (n - 1)
    return mean, float(np.sqrt(var / n))


def _check_dims(p, q):
    if p.dim != q.dim:
        raise InputError(f"dimension mismatch: {p.dim} vs {q.dim}")


def mc_kl(p: DensityHandle, q: DensityHandle, n, seed) -> McEstimate:
    """Monte Carlo estimate of KL(p || q) = E_p[log p - log q]."""
    _check_dims(p, q)
    n = int(n)
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    xs = p.sampler(n, seed)
    vals = np.asarray(p.log_pdf(xs), float) - np.asarray(q.log_pdf(xs), float)
    _check_finite(vals, xs, "KL integrand")
    mean, se = _mean_se(vals)
    return McEstimate(value=mean, std_error=se, n_samples=n, seed=seed)


def _mixture_term(handle, other_log_pdf, log_w_self, log_w_other, n, seed, what):
    """E_self[log self - log mix] with log mix via log-sum-exp."""
    xs = handle.sampler(n, seed)
    lp = np.asarray(handle.log_pdf(xs), float)
    lq = np.asarray(other_log_pdf(xs), float)
    with np.errstate(divide="ignore"):
        lm = np.logaddexp(lp + log_w_self, lq + log_w_other)
    vals = lp - lm
    _check_finite(vals, xs, what)
    return _mean_se(vals)


def mc_js(p: DensityHandle, q: DensityHandle, n, seed) -> McEstimate:
    """Jensen-Shannon divergence against the arithmetic mixture (p + q)/2."""
    _check_dims(p, q)
    n = int(n)
    s1, s2 = _sub_seeds(seed, 2)
    half = float(np.log(0.5))
    m1, se1 = _mixture_term(p, q.log_pdf, half, half, n, s1, "JS integrand")
    m2, se2 = _mixture_term(q, p.log_pdf, half, half, n, s2, "JS integrand")
    value = 0.5 * m1 + 0.5 * m2
    se = float(np.sqrt(0.25 * se1**2 + 0.25 * se2**2))
    return McEstimate(value=value, std_error=se, n_samples=n, seed=seed)


def mc_lambda(p: DensityHandle, q: DensityHandle, lam, n, seed) -> McEstimate:
    """Skewed arithmetic-mixture divergence

        lam KL(p || (1-lam) p + lam q) + (1-lam) KL(q || (1-lam) p + lam q).

    lam = 0.5 recovers JS; lam -> 1 gives KL(p || q) and lam -> 0 KL(q || p).
    """
    _check_dims(p, q)
    lam = float(lam)
    if not (0.0 <= lam <= 1.0):
        raise InputError(f"lam must lie in [0, 1], got {lam}")
    n = int(n)
    s1, s2 = _sub_seeds(seed, 2)
    with np.errstate(divide="ignore"):
        lw_p = float(np.log(1.0 - lam)) if lam < 1.0 else -np.inf
        lw_q = float(np.log(lam)) if lam > 0.0 else -np.inf
    m1, se1 = _mixture_term(p, q.log_pdf, lw_p, lw_q, n, s1, "lambda integrand")
    m2, se2 = _mixture_term(q, p.log_pdf, lw_q, lw_p, n, s2, "lambda integrand")
    value = lam * m1 + (1.0 - lam) * m2
    se = float(np.sqrt(lam**2 * se1**2 + (1.0 - lam) ** 2 * se2**2))
    return McEstimate(value=value, std_error=se, n_samples=n, seed=seed)


def _geometric_mid_handle(p, q, alpha, conv):
    """Intermediate density handle. Exact for Gaussian handles; for general
    handles the unnormalized geometric mean is normalized by quadrature
    (dims 1 and 2 only) and no sampler is available."""
    if p.gaussian is not None and q.gaussian is not None:
        g1 = p.gaussian.to_full() if isinstance(p.gaussian, DiagonalGaussian) else p.gaussian
        g2 = q.gaussian.to_full() if isinstance(q.gaussian, DiagonalGaussian) else q.gaussian
        mid = intermediate_full(g1, g2, alpha, conv)
        return DensityHandle.from_gaussian(mid)
    if p.dim > 2:
        raise InputError(
            "geometric intermediate for non-Gaussian handles is unsupported "
            f"for dim > 2 (got dim {p.dim})"
        )
    t = effective_skew(alpha, conv)
    log_z = _log_geometric_normalizer(p, q, t)

    def log_mid(x):
        return (1.0 - t) * np.asarray(p.log_pdf(x), float) + t * np.asarray(
            q.log_pdf(x), float
        ) - log_z

    return DensityHandle(log_pdf=log_mid, sampler=None, dim=p.dim)


def _sample_envelope(p, q, n=4096, seed=20_000_101, width=10.0):
    """Per-dimension integration bounds: union of mean +/- width * std."""
    los, his = [], []
    for h, s in ((p, 0), (q, 1)):
        xs = h.sampler(n, _sub_seeds(seed, 2)[s])
        m = xs.mean(axis=0)
        sd = xs.std(axis=0)
        los.append(m - width * sd)
        his.append(m + width * sd)
    return np.minimum(*los), np.maximum(*his)


def _log_geometric_normalizer(p, q, t, grid=513):
    """log integral p^(1-t) q^t over a sample-based envelope box."""
    lo, hi = _sample_envelope(p, q)
    axes = [np.linspace(lo[k], hi[k], grid) for k in range(p.dim)]
    if p.dim == 1:
        pts = axes[0][:, None]
        lu = (1.0 - t) * np.asarray(p.log_pdf(pts), float) + t * np.asarray(
            q.log_pdf(pts), float
        )
        shift = lu.max()
        z = simpson(np.exp(lu - shift), x=axes[0])
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        lu = (1.0 - t) * np.asarray(p.log_pdf(pts), float) + t * np.asarray(
            q.log_pdf(pts), float
        )
        shift = lu.max()
        vals = np.exp(lu - shift).reshape(grid, grid)
        z = simpson(simpson(vals, x=axes[1], axis=1), x=axes[0])
    if not np.isfinite(z) or z <= 0.0:
        raise NumericalError(f"geometric-mean normalizer quadrature failed (z = {z})")
    return float(np.log(z) + shift)


def mc_gjs(p, q, alpha, conv, dual, n, seed) -> McEstimate:
    """MC estimate of the skew-geometric JS divergence or its dual.

    Non-dual samples each KL term from its own left argument; the dual draws
    one sample set from the intermediate and averages the combined integrand.
    The dual therefore requires an intermediate sampler, which only Gaussian
    handles provide.
    """
    _check_dims(p, q)
    a = float(alpha)
    n = int(n)
    mid = _geometric_mid_handle(p, q, a, conv)
    s1, s2 = _sub_seeds(seed, 2)
    if dual:
        if mid.sampler is None:
            raise InputError(
                "dual MC estimation needs samples from the intermediate; "
                "only Gaussian handles support this"
            )
        xs = mid.sampler(n, s1)
        lm = np.asarray(mid.log_pdf(xs), float)
        vals = (1.0 - a) * (lm - np.asarray(p.log_pdf(xs), float)) + a * (
            lm - np.asarray(q.log_pdf(xs), float)
        )
        _check_finite(vals, xs, "dual integrand")
        mean, se = _mean_se(vals)
        return McEstimate(value=mean, std_error=se, n_samples=n, seed=seed)
    xp = p.sampler(n, s1)
    v1 = np.asarray(p.log_pdf(xp), float) - np.asarray(mid.log_pdf(xp), float)
    _check_finite(v1, xp, "geometric JS integrand")
    m1, se1 = _mean_se(v1)
    xq = q.sampler(n, s2)
    v2 = np.asarray(q.log_pdf(xq), float) - np.asarray(mid.log_pdf(xq), float)
    _check_finite(v2, xq, "geometric JS integrand")
    m2, se2 = _mean_se(v2)
    value = (1.0 - a) * m1 + a * m2
    se = float(np.sqrt((1.0 - a) ** 2 * se1**2 + a**2 * se2**2))
    return McEstimate(value=value, std_error=se, n_samples=n, seed=seed)


def adaptive_simpson(f, lo, hi, tol, max_depth=48):
    """Adaptive Simpson integration of a scalar function on [lo, hi].

    Classic interval-halving with the Richardson error estimate |S2 - S1|/15.
    If any subinterval exhausts max_depth before meeting its share of the
    tolerance, a QuadratureError carrying the best achieved estimate is
    raised after the traversal completes.
    """
    lo = float(lo)
    hi = float(hi)
    if not (hi > lo):
        raise InputError(f"need hi > lo, got [{lo}, {hi}]")
    failed = []

    def _simpson(a, fa, m, fm, b, fb):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def _recurse(a, fa, m, fm, b, fb, whole, eps, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = _simpson(a, fa, lm, flm, m, fm)
        right = _simpson(m, fm, rm, frm, b, fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or (m - a) < 1e-14 * max(abs(a), abs(b), 1.0):
            return left + right + delta / 15.0
        if depth <= 0:
            failed.append((a, b, abs(delta) / 15.0))
            return left + right + delta / 15.0
        return _recurse(a, fa, lm, flm, m, fm, left, eps / 2.0, depth - 1) + _recurse(
            m, fm, rm, frm, b, fb, right, eps / 2.0, depth - 1
        )

    mid = 0.5 * (lo + hi)
    f_lo, f_mid, f_hi = f(lo), f(mid), f(hi)
    whole = _simpson(lo, f_lo, mid, f_mid, hi, f_hi)
    estimate = _recurse(lo, f_lo, mid, f_mid, hi, f_hi, whole, float(tol), max_depth)
    if failed:
        worst = max(err for _, _, err in failed)
        raise QuadratureError(
            f"tolerance {tol} not reached on {len(failed)} subinterval(s) "
            f"(worst local error ~ {worst:.3e}); achieved estimate {estimate!r}",
            estimate=float(estimate),
        )
    return float(estimate)


def _comparison_log_pdf(p, q, spec):
    """Log-density of the intermediate a family integrates against.

    KL families compare to the other density directly; JS and Lambda to the
    arithmetic mixture; the geometric families to the normalized geometric
    intermediate under the spec's convention.
    """
    fam = spec.family
    if fam is Family.KL_FORWARD:
        return q.log_pdf
    if fam is Family.KL_REVERSE:
        return p.log_pdf

    if fam in (Family.JS, Family.LAMBDA):
        lam = 0.5 if fam is Family.JS else spec.lambda_skew
        with np.errstate(divide="ignore"):
            lw_p = float(np.log(1.0 - lam)) if lam < 1.0 else -np.inf
            lw_q = float(np.log(lam)) if lam > 0.0 else -np.inf

        def log_mix(x):
            return np.logaddexp(
                np.asarray(p.log_pdf(x), float) + lw_p,
                np.asarray(q.log_pdf(x), float) + lw_q,
            )

        return log_mix
    if fam in (Family.GJS, Family.GJS_DUAL):
        return _geometric_mid_handle(p, q, spec.alpha, spec.convention).log_pdf
    raise InputError(f"family {fam.value} has no pointwise integrand")


def integrand_1d(p, q, spec):
    """Pointwise integrand of the selected divergence for 1-D handles.

    Returns a vectorized function of x. Density factors that underflow to
    zero contribute zero, so tails are safe to evaluate.
    """
    if p.dim != 1 or q.dim != 1:
        raise InputError("integrand_1d requires 1-D handles")
    log_mid = _comparison_log_pdf(p, q, spec)
    fam = spec.family

    def _term(weight, log_left, log_right, x):
        ll = np.asarray(log_left(x), float)
        lr = np.asarray(log_right(x), float)
        dens = np.exp(ll)
        return weight * np.where(dens > 0.0, dens * (ll - lr), 0.0)

    if fam is Family.KL_FORWARD:
        return lambda x: _term(1.0, p.log_pdf, log_mid, _as_batch(x))
    if fam is Family.KL_REVERSE:
        return lambda x: _term(1.0, q.log_pdf, log_mid, _as_batch(x))
    if fam in (Family.JS, Family.LAMBDA):
        lam = 0.5 if fam is Family.JS else spec.lambda_skew
        return lambda x: _term(lam, p.log_pdf, log_mid, _as_batch(x)) + _term(
            1.0 - lam, q.log_pdf, log_mid, _as_batch(x)
        )
    if fam is Family.GJS:
        a = spec.alpha
        return lambda x: _term(1.0 - a, p.log_pdf, log_mid, _as_batch(x)) + _term(
            a, q.log_pdf, log_mid, _as_batch(x)
        )
    if fam is Family.GJS_DUAL:
        a = spec.alpha
        return lambda x: _term(1.0 - a, log_mid, p.log_pdf, _as_batch(x)) + _term(
            a, log_mid, q.log_pdf, _as_batch(x)
        )
    raise InputError(f"family {fam.value} has no pointwise integrand")


def _as_batch(x):
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return arr[:, None]


def default_bounds_1d(p, q, width=10.0):
    """mu +/- width*sigma envelope covering both 1-D densities."""
    if p.gaussian is not None and q.gaussian is not None:
        bounds = []
        for h in (p, q):
            g = h.gaussian
            if isinstance(g, DiagonalGaussian):
                m, sd = float(g.mu[0]), float(np.exp(0.5 * g.log_var[0]))
            else:
                m, sd = float(g.mu[0]), float(np.sqrt(g.sigma[0, 0]))
            bounds.append((m - width * sd, m + width * sd))
        return min(b[0] for b in bounds), max(b[1] for b in bounds)
    lo, hi = _sample_envelope(p, q, width=width)
    return float(lo[0]), float(hi[0])


def quad_divergence_1d(p, q, spec: DivergenceSpec, lo, hi, tol) -> float:
    """Integrate the selected divergence's integrand over [lo, hi].

    Adaptive Simpson to absolute tolerance `tol`; raises QuadratureError with
    the achieved estimate if the subdivision limit is hit first.
    """
    fn = integrand_1d(p, q, spec)

    def scalar(x):
        return float(fn(x)[0])

    return adaptive_simpson(scalar, lo, hi, tol)


def integrand_table(p, q, spec, lo, hi, n_points=2001):
    """Columns (x, p, q, mean_density, integrand) on a uniform grid."""
    if n_points < 3 or n_points % 2 == 0:
        raise InputError("n_points must be odd and >= 3 for Simpson consistency")
    xs = np.linspace(float(lo), float(hi), int(n_points))
    batch = xs[:, None]
    log_mid = _comparison_log_pdf(p, q, spec)
    fn = integrand_1d(p, q, spec)
    return {
        "x": xs,
        "p": np.exp(np.asarray(p.log_pdf(batch), float)),
        "q": np.exp(np.asarray(q.log_pdf(batch), float)),
        "mean_density": np.exp(np.asarray(log_mid(batch), float)),
        "integrand": fn(xs),
    }


def dump_integrand_csv(path, p, q, spec, lo, hi, n_points=2001):
    """Write the integrand table as CSV with a fixed column order."""
    table = integrand_table(p, q, spec, lo, hi, n_points)
    cols = ["x", "p", "q", "mean_density", "integrand"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(table["x"].size):
            writer.writerow([repr(float(table[c][i])) for c in cols])
    return path
