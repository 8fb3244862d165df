"""Pure-numpy implementations of the hot kernels.

Reference implementations for the numba-jitted versions in _kernels_numba.py;
selected at runtime via the GJSD_BACKEND env var (see backend.py). Both
backends implement identical contracts; pairwise_sum uses the exact same
fold-halving tree in both, so it is bitwise reproducible across backends.
"""

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

NAME = "numpy"


def pairwise_sum(x):
    """Sum a 1-D float64 array in a fixed fold-halving tree order.

    The tree splits the array into a first half of ceil(n/2) and a second
    half of floor(n/2), adds them elementwise, and repeats. The order is
    independent of any library blocking, so results are reproducible.
    """
    buf = np.asarray(x, dtype=np.float64).copy()
    n = buf.size
    if n == 0:
        return 0.0
    while n > 1:
        h = (n + 1) // 2
        buf[: n - h] += buf[h:n]
        n = h
    return float(buf[0])


def logsumexp_neg_half_sqdist(points, data):
    """For each row p of `points`, log sum_i exp(-0.5 * ||p - data_i||^2).

    Args:
        points: (m, d) query locations, already whitened by the caller.
        data: (n, d) kernel centers, same whitening.

    Returns:
        (m,) array of log-sum-exp values.
    """
    sq = cdist(points, data, "sqeuclidean")
    return logsumexp(-0.5 * sq, axis=1)


def mmd2_unbiased(x, y, bandwidth):
    """Unbiased U-statistic estimate of squared MMD with a Gaussian kernel.

    k(a, b) = exp(-||a - b||^2 / (2 bandwidth^2)); diagonal terms excluded
    from the within-sample sums.
    """
    m = x.shape[0]
    n = y.shape[0]
    g = 1.0 / (2.0 * bandwidth * bandwidth)
    kxx = np.exp(-g * cdist(x, x, "sqeuclidean"))
    kyy = np.exp(-g * cdist(y, y, "sqeuclidean"))
    kxy = np.exp(-g * cdist(x, y, "sqeuclidean"))
    sxx = kxx.sum() - np.trace(kxx)
    syy = kyy.sum() - np.trace(kyy)
    sxy = kxy.sum()
    return float(sxx / (m * (m - 1)) + syy / (n * (n - 1)) - 2.0 * sxy / (m * n))


def mmd2_unbiased_grad_x(x, y, bandwidth):
    """Squared-MMD U-statistic and its gradient with respect to the rows of x.

    Returns:
        (value, grad) where grad has the shape of x.
    """
    m = x.shape[0]
    n = y.shape[0]
    g = 1.0 / (2.0 * bandwidth * bandwidth)
    kxx = np.exp(-g * cdist(x, x, "sqeuclidean"))
    np.fill_diagonal(kxx, 0.0)
    kxy = np.exp(-g * cdist(x, y, "sqeuclidean"))
    kyy = np.exp(-g * cdist(y, y, "sqeuclidean"))
    value = (
        kxx.sum() / (m * (m - 1))
        + (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
        - 2.0 * kxy.sum() / (m * n)
    )
    # d k(a,b) / d a = -2 g (a - b) k(a,b); each within-sample pair appears twice.
    diff_xx = x[:, None, :] - x[None, :, :]
    grad = (-2.0 * g) * np.einsum("ij,ijk->ik", kxx, diff_xx) * (2.0 / (m * (m - 1)))
    diff_xy = x[:, None, :] - y[None, :, :]
    grad -= (-2.0 * g) * np.einsum("ij,ijk->ik", kxy, diff_xy) * (2.0 / (m * n))
    return float(value), grad
