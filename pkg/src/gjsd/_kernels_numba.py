"""Numba-jitted implementations of the hot kernels.

Same contracts as _kernels_numpy.py. No fastmath and no parallel sections:
every reduction runs in a fixed sequential order so reruns are bit-identical.
Importing this module requires numba; backend.py guards the import.
"""

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def pairwise_sum(x):
    buf = x.astype(np.float64).copy()
    n = buf.size
    if n == 0:
        return 0.0
    while n > 1:
        h = (n + 1) // 2
        for i in range(n - h):
            buf[i] += buf[h + i]
        n = h
    return buf[0]


@njit(cache=True)
def logsumexp_neg_half_sqdist(points, data):
    m, d = points.shape
    n = data.shape[0]
    out = np.empty(m)
    row = np.empty(n)
    for j in range(m):
        best = -np.inf
        for i in range(n):
            s = 0.0
            for k in range(d):
                t = points[j, k] - data[i, k]
                s += t * t
            v = -0.5 * s
            row[i] = v
            if v > best:
                best = v
        acc = 0.0
        for i in range(n):
            acc += np.exp(row[i] - best)
        out[j] = best + np.log(acc)
    return out


@njit(cache=True)
def mmd2_unbiased(x, y, bandwidth):
    m = x.shape[0]
    n = y.shape[0]
    d = x.shape[1]
    g = 1.0 / (2.0 * bandwidth * bandwidth)
    sxx = 0.0
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            s = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                s += t * t
            sxx += np.exp(-g * s)
    syy = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            s = 0.0
            for k in range(d):
                t = y[i, k] - y[j, k]
                s += t * t
            syy += np.exp(-g * s)
    sxy = 0.0
    for i in range(m):
        for j in range(n):
            s = 0.0
            for k in range(d):
                t = x[i, k] - y[j, k]
                s += t * t
            sxy += np.exp(-g * s)
    return sxx / (m * (m - 1)) + syy / (n * (n - 1)) - 2.0 * sxy / (m * n)


@njit(cache=True)
def mmd2_unbiased_grad_x(x, y, bandwidth):
    m = x.shape[0]
    n = y.shape[0]
    d = x.shape[1]
    g = 1.0 / (2.0 * bandwidth * bandwidth)
    grad = np.zeros((m, d))
    sxx = 0.0
    wxx = 2.0 / (m * (m - 1))
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            s = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                s += t * t
            kv = np.exp(-g * s)
            sxx += kv
            c = -2.0 * g * kv * wxx
            for k in range(d):
                grad[i, k] += c * (x[i, k] - x[j, k])
    syy = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            s = 0.0
            for k in range(d):
                t = y[i, k] - y[j, k]
                s += t * t
            syy += np.exp(-g * s)
    sxy = 0.0
    wxy = 2.0 / (m * n)
    for i in range(m):
        for j in range(n):
            s = 0.0
            for k in range(d):
                t = x[i, k] - y[j, k]
                s += t * t
            kv = np.exp(-g * s)
            sxy += kv
            c = -2.0 * g * kv * wxy
            for k in range(d):
                grad[i, k] -= c * (x[i, k] - y[j, k])
    value = sxx / (m * (m - 1)) + syy / (n * (n - 1)) - 2.0 * sxy / (m * n)
    return value, grad
