"""Fit a single bivariate Gaussian to mixture samples by divergence descent.

The data density is unknown to the fitter; a Gaussian KDE built once from the
samples stands in for it (the true mixture density is available behind a flag
for ablation). Model-side expectations use reparameterized draws with common
random numbers across iterations so finite-difference gradients stay usable.

The benchmark mixture for the qualitative mode-seeking/mass-covering contrast
is weights (0.7, 0.3), means (3, 0) and (-3, 0), covariances I and diag(1, 2).
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .backend import get_kernels
from .divergence import DivergenceSpec, Family
from .errors import FitDivergedError, InputError, NumericalError
from .gaussian import FullGaussian, effective_skew, log_pdf

_LOG_2PI = float(np.log(2.0 * np.pi))

_FIT_FAMILIES = (Family.KL_FORWARD, Family.KL_REVERSE, Family.JS, Family.GJS)


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture: list of (weight, mean, covariance) components."""

    components: tuple

    def __post_init__(self):
        comps = []
        total = 0.0
        for entry in self.components:
            w, mean, cov = entry
            w = float(w)
            if not (0.0 < w <= 1.0):
                raise InputError(f"component weight must lie in (0, 1], got {w}")
            g = FullGaussian(mean, cov)  # validates PD covariance
            comps.append((w, g))
            total += w
        if not comps:
            raise InputError("mixture needs at least one component")
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"weights must sum to 1 within 1e-12, got {total!r}")
        object.__setattr__(self, "components", tuple(comps))

    @property
    def dim(self):
        return self.components[0][1].dim

    def log_pdf(self, x):
        """Exact mixture log-density (the ablation path)."""
        parts = [
            log_pdf(g, x) + np.log(w) for w, g in self.components
        ]
        return np.logaddexp.reduce(np.stack(parts, axis=0), axis=0)

    def to_json_dict(self):
        return {
            "components": [
                {"weight": w, "mean": g.mu.tolist(), "cov": g.sigma.tolist()}
                for w, g in self.components
            ]
        }

    @classmethod
    def from_json_dict(cls, d):
        try:
            comps = tuple(
                (c["weight"], c["mean"], c["cov"]) for c in d["components"]
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed mixture JSON: {exc}") from exc
        return cls(components=comps)

    @classmethod
    def load_json(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read mixture from {path}: {exc}") from exc
        return cls.from_json_dict(payload)


def benchmark_mixture():
    """The fixed two-mode benchmark used by the ordering checks."""
    return MixtureSpec(
        components=(
            (0.7, [3.0, 0.0], np.eye(2)),
            (0.3, [-3.0, 0.0], np.diag([1.0, 2.0])),
        )
    )


def mixture_sample(spec: MixtureSpec, n, seed):
    """Ancestral sampling: categorical component choice, then Gaussian draw."""
    n = int(n)
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    weights = np.array([w for w, _ in spec.components])
    picks = rng.choice(len(weights), size=n, p=weights)
    eps = rng.standard_normal((n, spec.dim))
    out = np.empty((n, spec.dim))
    for idx, (_, g) in enumerate(spec.components):
        mask = picks == idx
        out[mask] = g.mu + eps[mask] @ g.chol.T
    return out


class GaussianKde:
    """Product-kernel Gaussian KDE with Scott's rule bandwidths.

    log-density evaluation runs through the backend's log-sum-exp kernel on
    bandwidth-scaled coordinates; this is the fit loop's hot path.
    """

    def __init__(self, samples):
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 2:
            raise InputError("KDE needs a 2-D sample matrix with >= 2 rows")
        n, d = samples.shape
        sd = samples.std(axis=0, ddof=1)
        if np.any(sd <= 0.0):
            raise NumericalError("KDE bandwidth is zero along some dimension")
        self.bandwidth = sd * n ** (-1.0 / (d + 4))
        self._scaled = np.ascontiguousarray(samples / self.bandwidth)
        self._log_norm = (
            -np.log(n) - float(np.sum(np.log(self.bandwidth))) - 0.5 * d * _LOG_2PI
        )
        self.n = n
        self.dim = d

    def log_pdf(self, x):
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        if x.shape[1] != self.dim:
            raise InputError(f"KDE expects dimension {self.dim}, got {x.shape[1]}")
        lse = get_kernels().logsumexp_neg_half_sqdist(
            np.ascontiguousarray(x / self.bandwidth), self._scaled
        )
        return lse + self._log_norm


@dataclass(frozen=True)
class FitParams:
    """Mean plus log-diagonal Cholesky parameterization of the covariance.

    theta = (mu_x, mu_y, log L11, L21, log L22); Sigma = L L^T is positive
    definite for every finite theta, so descent needs no projection step.
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (5,):
            raise InputError(f"theta must have shape (5,), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise InputError("theta contains non-finite entries")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def mu(self):
        return self.theta[:2]

    @property
    def chol(self):
        l11 = np.exp(self.theta[2])
        l22 = np.exp(self.theta[4])
        return np.array([[l11, 0.0], [self.theta[3], l22]])

    def to_gaussian(self):
        chol = self.chol
        return FullGaussian(self.mu, chol @ chol.T)

    @classmethod
    def from_moments(cls, mu, sigma):
        chol = np.linalg.cholesky(np.asarray(sigma, dtype=np.float64))
        return cls(
            theta=np.array(
                [mu[0], mu[1], np.log(chol[0, 0]), chol[1, 0], np.log(chol[1, 1])]
            )
        )


@dataclass
class FitTrace:
    """Loss/parameter history of one fit; entry 0 is the initial state."""

    losses: list = field(default_factory=list)
    params: list = field(default_factory=list)
    spec: DivergenceSpec = None
    seed: int = 0

    @property
    def final(self):
        return self.params[-1]

    def to_json_dict(self):
        return {
            "losses": [float(v) for v in self.losses],
            "params": [p.theta.tolist() for p in self.params],
            "family": self.spec.family.value,
            "alpha": self.spec.alpha,
            "convention": self.spec.convention.value if self.spec.convention else None,
            "seed": self.seed,
        }

    def save_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def _model_log_pdf(mu, chol, x):
    """log N(x; mu, L L^T) from the Cholesky factor directly."""
    dev = x - mu
    # forward substitution for the 2x2 lower-triangular system
    w0 = dev[:, 0] / chol[0, 0]
    w1 = (dev[:, 1] - chol[1, 0] * w0) / chol[1, 1]
    quad = w0 * w0 + w1 * w1
    log_det = 2.0 * (np.log(chol[0, 0]) + np.log(chol[1, 1]))
    return -0.5 * (2.0 * _LOG_2PI + log_det + quad)


class _EmpiricalObjective:
    """Divergence estimate between the data KDE and a candidate Gaussian.

    Data-side constants are computed once; per-evaluation work is the model
    log-density at data points and the KDE log-density at model points.
    """

    def __init__(self, samples, spec, n_model_samples, seed, use_true_density=None):
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise InputError(f"samples must be (n, 2), got {samples.shape}")
        if spec.family not in _FIT_FAMILIES:
            raise InputError(
                f"family {spec.family.value} is not fittable; expected one of "
                f"{[f.value for f in _FIT_FAMILIES]}"
            )
        self.samples = samples
        self.spec = spec
        if use_true_density is not None:
            self.data_log_pdf = use_true_density
        else:
            self.data_log_pdf = GaussianKde(samples).log_pdf
        self.eps = np.random.default_rng(seed).standard_normal(
            (int(n_model_samples), 2)
        )
        self.data_lp = self.data_log_pdf(samples)
        self.mean_data_lp = float(np.mean(self.data_lp))

    def __call__(self, params: FitParams) -> float:
        spec = self.spec
        mu = params.mu
        chol = params.chol
        data_lg = _model_log_pdf(mu, chol, self.samples)
        fam = spec.family
        if fam is Family.KL_FORWARD:
            # E_data[log p_hat - log g]; only the model term varies
            return self.mean_data_lp - float(np.mean(data_lg))
        model_x = mu + self.eps @ chol.T
        model_lg = _model_log_pdf(mu, chol, model_x)
        model_lp = self.data_log_pdf(model_x)
        if fam is Family.KL_REVERSE:
            return float(np.mean(model_lg - model_lp))
        if fam is Family.JS:
            half = np.log(0.5)
            data_mix = np.logaddexp(self.data_lp + half, data_lg + half)
            model_mix = np.logaddexp(model_lp + half, model_lg + half)
            return 0.5 * float(np.mean(self.data_lp - data_mix)) + 0.5 * float(
                np.mean(model_lg - model_mix)
            )
        # GJS: (1-a) t KLf + a (1-t) KLr + log Z_t with Z_t = E_g[(p/g)^(1-t)]
        a = spec.alpha
        t = effective_skew(a, spec.convention)
        klf = self.mean_data_lp - float(np.mean(data_lg))
        klr = float(np.mean(model_lg - model_lp))
        ratio = (1.0 - t) * (model_lp - model_lg)
        shift = float(np.max(ratio))
        log_z = shift + np.log(float(np.mean(np.exp(ratio - shift))))
        return (1.0 - a) * t * klf + a * (1.0 - t) * klr + log_z


def empirical_divergence(
    samples, g: FullGaussian, spec: DivergenceSpec, n_model_samples, seed, *,
    use_true_density=None,
) -> float:
    """One-shot divergence estimate between sample data and a Gaussian."""
    obj = _EmpiricalObjective(samples, spec, n_model_samples, seed, use_true_density)
    chol = g.chol
    params = FitParams(
        theta=np.array(
            [g.mu[0], g.mu[1], np.log(chol[0, 0]), chol[1, 0], np.log(chol[1, 1])]
        )
    )
    value = obj(params)
    if not np.isfinite(value):
        raise NumericalError(f"empirical divergence is non-finite: {value!r}")
    return value


def _initial_params(samples, data_log_pdf):
    """Unit covariance at the highest-density data point.

    Starting at the density mode instead of the sample moments lets plain GD
    reach each divergence's qualitative endpoint within the iteration budget:
    mass-covering objectives inflate away from the mode, mode-seeking ones
    settle onto it.
    """
    mode_pt = samples[int(np.argmax(data_log_pdf(samples)))]
    return FitParams(theta=np.array([mode_pt[0], mode_pt[1], 0.0, 0.0, 0.0]))


def _fd_gradient(fn, theta, rel_step=1e-4):
    """Central finite differences with a relative step per coordinate."""
    grad = np.empty_like(theta)
    for i in range(theta.size):
        h = rel_step * max(1.0, abs(theta[i]))
        plus = theta.copy()
        plus[i] += h
        minus = theta.copy()
        minus[i] -= h
        grad[i] = (fn(FitParams(theta=plus)) - fn(FitParams(theta=minus))) / (2.0 * h)
    return grad


def fit(samples, spec: DivergenceSpec, opt=None, *, use_true_density=None) -> FitTrace:
    """Gradient descent on FitParams minimizing the empirical divergence.

    opt keys (with defaults): lr 0.05, iters 500, n_model_samples 2048,
    seed 0. Gradients are central finite differences over the 5 parameters;
    model draws reuse one fixed epsilon matrix (common random numbers), so
    the objective is a deterministic function of theta throughout. The start
    point is a unit-covariance Gaussian at the densest data point.

    Raises FitDivergedError carrying the partial trace if the loss leaves
    the finite range.
    """
    opt = dict(opt or {})
    lr = float(opt.pop("lr", 0.05))
    iters = int(opt.pop("iters", 500))
    n_model = int(opt.pop("n_model_samples", 2048))
    seed = int(opt.pop("seed", 0))
    if opt:
        raise InputError(f"unknown opt keys: {sorted(opt)}")
    if lr <= 0.0 or iters < 1:
        raise InputError("lr must be positive and iters >= 1")
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if samples.shape[0] < 100:
        raise InputError(f"fit needs >= 100 samples, got {samples.shape[0]}")

    objective = _EmpiricalObjective(samples, spec, n_model, seed, use_true_density)
    params = _initial_params(samples, objective.data_log_pdf)
    trace = FitTrace(spec=spec, seed=seed)
    loss = objective(params)
    trace.losses.append(loss)
    trace.params.append(params)
    if not np.isfinite(loss):
        raise FitDivergedError(
            f"initial loss is non-finite: {loss!r}", trace=trace
        )
    for _ in range(iters):
        grad = _fd_gradient(objective, params.theta)
        if not np.all(np.isfinite(grad)):
            raise FitDivergedError("gradient became non-finite", trace=trace)
        params = FitParams(theta=params.theta - lr * grad)
        loss = objective(params)
        if not np.isfinite(loss):
            raise FitDivergedError(
                f"loss became non-finite: {loss!r}", trace=trace
            )
        trace.losses.append(loss)
        trace.params.append(params)
    return trace


def richardson_gradient_check(samples, spec, n_model_samples, seed, n_points=20):
    """Worst relative gap between the fit's FD gradient and a Richardson pass.

    Evaluates both at random parameter points near the moment-matched start;
    the Richardson estimate combines steps h and 2h fourth-order.
    """
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    objective = _EmpiricalObjective(samples, spec, n_model_samples, seed)
    start = _initial_params(samples, objective.data_log_pdf)
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(int(n_points)):
        theta = start.theta + rng.uniform(-0.3, 0.3, size=5)
        g1 = _fd_gradient(objective, theta, rel_step=1e-4)
        g2 = _fd_gradient(objective, theta, rel_step=2e-4)
        richardson = (4.0 * g1 - g2) / 3.0
        scale = np.maximum(np.abs(richardson), 1e-8)
        worst = max(worst, float(np.max(np.abs(g1 - richardson) / scale)))
    return worst


def level_set_dump(g: FullGaussian, path, *, lo=(-6.0, -6.0), hi=(6.0, 6.0),
                   resolution=200):
    """Write rows (x, y, density) of the Gaussian over a regular grid."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    res = int(resolution)
    if res < 2 or np.any(hi <= lo):
        raise InputError("need resolution >= 2 and hi > lo per axis")
    xs = np.linspace(lo[0], hi[0], res)
    ys = np.linspace(lo[1], hi[1], res)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    dens = np.exp(log_pdf(g, pts))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "density"])
        for row, d in zip(pts, dens):
            writer.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(d))])
    return path


def fitted_summary(trace: FitTrace):
    """Mean, covariance, and generalized variance of a trace's final fit."""
    g = trace.final.to_gaussian()
    return {
        "mu": g.mu.tolist(),
        "sigma": g.sigma.tolist(),
        "det_sigma": float(np.linalg.det(g.sigma)),
        "final_loss": float(trace.losses[-1]),
    }
