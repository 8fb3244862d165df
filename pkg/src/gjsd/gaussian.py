"""Gaussian value types, log-densities, sampling, and geometric intermediates.

The geometric-mean (harmonic-barycenter) intermediate of two Gaussians is the
normalized density proportional to p^(1-a) q^a. Two skew conventions exist:

    Original  intermediate skew t = alpha
    Primed    intermediate skew t = 1 - alpha  (geometric mean arguments swapped)

Both are exposed through the SkewConvention enum; divergence code keeps the
outer mixture weights (1-alpha, alpha) fixed in either convention.
"""

import enum
import json

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import InputError, NumericalError

_LOG_2PI = float(np.log(2.0 * np.pi))


class SkewConvention(enum.Enum):
    ORIGINAL = "original"
    PRIMED = "primed"

    @classmethod
    def coerce(cls, value):
        """Accept a SkewConvention or its string name (case-insensitive)."""
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls(value.strip().lower())
            except ValueError:
                pass
        raise InputError(
            f"unknown skew convention {value!r}; expected 'original' or 'primed'"
        )


def effective_skew(alpha, conv):
    """Skew of the intermediate distribution for a convention.

    Original uses alpha directly; Primed substitutes 1 - alpha into the
    intermediate's parameters while outer weights stay (1-alpha, alpha).
    """
    conv = SkewConvention.coerce(conv)
    _check_unit_interval(alpha, "alpha")
    return float(alpha) if conv is SkewConvention.ORIGINAL else 1.0 - float(alpha)


def _check_unit_interval(x, name):
    x = float(x)
    if not (0.0 <= x <= 1.0) or not np.isfinite(x):
        raise InputError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def _as_vector(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise InputError(f"{name} must be a 1-D vector of length >= 1")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


class DiagonalGaussian:
    """Gaussian with diagonal covariance, stored as mean and log-variance.

    Storing log variances makes positivity structural: exp(log_var) > 0 for
    any finite value, so no clamping is needed downstream.
    """

    __slots__ = ("mu", "log_var")

    def __init__(self, mu, log_var):
        mu = _as_vector(mu, "mu")
        log_var = _as_vector(log_var, "log_var")
        if mu.shape != log_var.shape:
            raise InputError(
                f"mu and log_var must have equal length, got {mu.size} and {log_var.size}"
            )
        mu.setflags(write=False)
        log_var.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_var", log_var)

    def __setattr__(self, name, value):
        raise AttributeError("DiagonalGaussian is immutable")

    @property
    def dim(self):
        return self.mu.size

    @property
    def var(self):
        return np.exp(self.log_var)

    def to_full(self):
        return FullGaussian(self.mu, np.diag(self.var))

    def __repr__(self):
        return f"DiagonalGaussian(mu={self.mu!r}, log_var={self.log_var!r})"


class FullGaussian:
    """Gaussian with a dense covariance matrix.

    The covariance must be symmetric (within 1e-12) and positive definite;
    the Cholesky factor is computed at construction and reused for densities,
    sampling, and solves.
    """

    __slots__ = ("mu", "sigma", "_chol", "_log_det")

    def __init__(self, mu, sigma):
        mu = _as_vector(mu, "mu")
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (mu.size, mu.size):
            raise InputError(
                f"sigma must be {mu.size}x{mu.size} to match mu, got {sigma.shape}"
            )
        if not np.all(np.isfinite(sigma)):
            raise InputError("sigma contains non-finite entries")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise InputError("sigma is not symmetric within 1e-12")
        sigma = 0.5 * (sigma + sigma.T)
        try:
            chol = cholesky(sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "covariance is not positive definite (Cholesky failed); "
                f"eigenvalue range [{np.linalg.eigvalsh(sigma).min():.3e}, "
                f"{np.linalg.eigvalsh(sigma).max():.3e}]"
            ) from exc
        mu.setflags(write=False)
        sigma.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_log_det", 2.0 * float(np.sum(np.log(np.diag(chol)))))

    def __setattr__(self, name, value):
        raise AttributeError("FullGaussian is immutable")

    @property
    def dim(self):
        return self.mu.size

    @property
    def chol(self):
        """Lower Cholesky factor L with sigma = L L^T."""
        return self._chol

    @property
    def log_det(self):
        return self._log_det

    def precision(self):
        return cho_solve((self._chol, True), np.eye(self.dim))

    def __repr__(self):
        return f"FullGaussian(mu={self.mu!r}, sigma={self.sigma!r})"


def log_pdf(g, x):
    """Log-density of a Gaussian at one point or a batch of points.

    Args:
        g: DiagonalGaussian or FullGaussian.
        x: (dim,) vector or (m, dim) matrix of row vectors.

    Returns:
        float for a single point, (m,) array for a batch.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != g.dim:
        raise InputError(f"x must have dimension {g.dim}, got shape {x.shape}")
    if isinstance(g, DiagonalGaussian):
        dev = x - g.mu
        quad = np.sum(dev * dev * np.exp(-g.log_var), axis=1)
        log_det = float(np.sum(g.log_var))
    elif isinstance(g, FullGaussian):
        dev = x - g.mu
        w = solve_triangular(g.chol, dev.T, lower=True)
        quad = np.sum(w * w, axis=0)
        log_det = g.log_det
    else:
        raise InputError(f"unsupported Gaussian type {type(g).__name__}")
    out = -0.5 * (g.dim * _LOG_2PI + log_det + quad)
    return float(out[0]) if single else out


def sample(g, count, seed):
    """Draw `count` i.i.d. rows from g, deterministically for a fixed seed.

    Reparameterized form: x = mu + L eps with eps standard normal.
    """
    count = int(count)
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((count, g.dim))
    if isinstance(g, DiagonalGaussian):
        return g.mu + np.exp(0.5 * g.log_var) * eps
    if isinstance(g, FullGaussian):
        return g.mu + eps @ g.chol.T
    raise InputError(f"unsupported Gaussian type {type(g).__name__}")


def intermediate_full(g1, g2, alpha, conv):
    """Geometric-mean intermediate of two full-covariance Gaussians.

    With skew t (t = alpha for Original, 1 - alpha for Primed):

        Sigma_t = ((1-t) Sigma_1^-1 + t Sigma_2^-1)^-1
        mu_t    = Sigma_t ((1-t) Sigma_1^-1 mu_1 + t Sigma_2^-1 mu_2)

    which is the normalized density proportional to p1^(1-t) p2^t.
    """
    if g1.dim != g2.dim:
        raise InputError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    t = effective_skew(alpha, conv)
    # Endpoints return the input object itself (immutable), not a rounded
    # reconstruction through the precision matrix.
    if t == 0.0:
        return g1
    if t == 1.0:
        return g2
    p1 = g1.precision()
    p2 = g2.precision()
    m = (1.0 - t) * p1 + t * p2
    try:
        mchol = cholesky(m, lower=True)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.cond(m))
        raise NumericalError(
            f"intermediate precision matrix is singular; condition number ~ {cond:.3e}"
        ) from exc
    sigma_t = cho_solve((mchol, True), np.eye(g1.dim))
    sigma_t = 0.5 * (sigma_t + sigma_t.T)
    rhs = (1.0 - t) * (p1 @ g1.mu) + t * (p2 @ g2.mu)
    mu_t = cho_solve((mchol, True), rhs)
    return FullGaussian(mu_t, sigma_t)


def intermediate_diag(g, alpha, conv):
    """Geometric-mean intermediate of g and the standard normal N(0, I).

    Elementwise, with skew t and s_i = var_i:

        var_t,i = s_i / ((1-t) + t s_i)
        mu_t,i  = (1-t) mu_i / ((1-t) + t s_i)

    This is the diagonal specialization of intermediate_full with the unit
    Gaussian as second argument; at t = 0 it returns g exactly and at t = 1
    the standard normal exactly.
    """
    t = effective_skew(alpha, conv)
    if t == 1.0:
        return DiagonalGaussian(np.zeros(g.dim), np.zeros(g.dim))
    s = np.exp(g.log_var)
    denom = (1.0 - t) + t * s
    # log_var - log(denom) rather than log(s / denom): at t = 0 the denominator
    # is exactly 1.0, so the input comes back bit-identical.
    log_var_t = g.log_var - np.log(denom)
    mu_t = (1.0 - t) * g.mu / denom
    return DiagonalGaussian(mu_t, log_var_t)


def to_json_dict(g):
    """Serialize a Gaussian to a plain dict (covariance row-major)."""
    if isinstance(g, DiagonalGaussian):
        return {"mu": g.mu.tolist(), "log_var": g.log_var.tolist()}
    if isinstance(g, FullGaussian):
        return {"mu": g.mu.tolist(), "sigma": g.sigma.tolist()}
    raise InputError(f"unsupported Gaussian type {type(g).__name__}")


def from_json_dict(d):
    """Deserialize a Gaussian from a dict with keys mu + (log_var | sigma)."""
    if not isinstance(d, dict) or "mu" not in d:
        raise InputError("Gaussian JSON must be an object with a 'mu' key")
    if "log_var" in d:
        return DiagonalGaussian(d["mu"], d["log_var"])
    if "sigma" in d:
        return FullGaussian(d["mu"], d["sigma"])
    raise InputError("Gaussian JSON must contain 'log_var' or 'sigma'")


def load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read Gaussian from {path}: {exc}") from exc
    return from_json_dict(payload)


def save_json(g, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(g), fh, indent=2)
        fh.write("\n")
