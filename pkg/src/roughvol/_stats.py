"""Small estimation helpers: means with standard errors and the delta method."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

__all__ = ["mean_and_se", "delta_method", "weighted_level_fit"]


def mean_and_se(x: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return float(x.mean()), float("inf")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n))


def delta_method(
    features: np.ndarray, g: Callable[[np.ndarray], float]
) -> tuple[float, float]:
    """Value and SE of g(mean of per-path feature rows).

    features has shape (n_paths, m). The gradient of g at the sample means is
    taken by central differences with per-component steps scaled to the
    component's magnitude; the SE is the usual quadratic form against the
    sample covariance of the mean vector. Exact for affine g, first-order
    otherwise.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n, m = features.shape
    means = features.mean(axis=0)
    value = float(g(means))
    if n < 2:
        return value, float("inf")
    cov = np.cov(features, rowvar=False, ddof=1).reshape(m, m) / n
    sd = np.sqrt(np.diag(cov))
    grad = np.zeros(m)
    for i in range(m):
        h = 1e-6 * max(abs(means[i]), sd[i] * math.sqrt(n), 1e-30)
        up = means.copy()
        dn = means.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (g(up) - g(dn)) / (2.0 * h)
    var = float(grad @ cov @ grad)
    return value, math.sqrt(max(var, 0.0))


def weighted_level_fit(
    ts: Sequence[float],
    values: Sequence[float],
    ses: Sequence[float],
    powers: Sequence[float] = (1.0,),
) -> tuple[float, float]:
    """Weighted LS intercept of values ~ 1 + sum_j T^powers_j, weights 1/se^2.

    Returns the fitted level at T = 0 and its standard error (from the normal
    equations, valid when the supplied SEs are correct).
    """
    t = np.asarray(ts, dtype=float)
    v = np.asarray(values, dtype=float)
    se = np.asarray(ses, dtype=float)
    if t.size < len(powers) + 2:
        raise ValueError("need at least two more points than correction terms")
    if np.any(se <= 0):
        raise ValueError("all standard errors must be positive for weighting")
    X = np.column_stack([np.ones_like(t)] + [t**p for p in powers])
    w = 1.0 / se
    Xw = X * w[:, None]
    vw = v * w
    xtx = Xw.T @ Xw
    beta = np.linalg.solve(xtx, Xw.T @ vw)
    cov = np.linalg.inv(xtx)
    return float(beta[0]), float(math.sqrt(cov[0, 0]))
