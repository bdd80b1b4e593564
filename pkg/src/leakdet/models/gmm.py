"""Diagonal-covariance Gaussian mixture fitted by expectation-maximization.

The anomaly score of a point is its negative log density under the fitted
mixture; EM starts from seeded k-means++ centers and the per-iteration mean
log-likelihood is non-decreasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))
VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class GmmConfig:
    n_components: int = 16
    max_iter: int = 200
    tol: float = 1e-6  # stop when |delta mean log-likelihood| falls below
    variance_floor: float = VARIANCE_FLOOR


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray    # (K,), nonnegative, sums to 1
    means: np.ndarray      # (K, D)
    variances: np.ndarray  # (K, D), floored away from zero


def kmeanspp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ center selection (no Lloyd refinement)."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    dist2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = dist2.sum()
        idx = rng.choice(n, p=dist2 / total) if total > 0.0 else rng.integers(n)
        centers[i] = X[idx]
        dist2 = np.minimum(dist2, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def joint_log_prob(params: GmmParams, X: np.ndarray) -> np.ndarray:
    """log(w_k * N(x | mu_k, diag var_k)) for every point and component, (N, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    inv = 1.0 / params.variances
    quad = (
        (X**2) @ inv.T
        - 2.0 * (X @ (params.means * inv).T)
        + ((params.means**2) * inv).sum(axis=1)[None, :]
    )
    log_norm = params.means.shape[1] * LOG_2PI + np.log(params.variances).sum(axis=1)
    with np.errstate(divide="ignore"):  # zero weights are legal and stay at -inf
        log_w = np.log(params.weights)
    return log_w[None, :] - 0.5 * (log_norm[None, :] + quad)


def log_likelihoods(params: GmmParams, X: np.ndarray) -> np.ndarray:
    return logsumexp(joint_log_prob(params, X), axis=1)


def responsibilities(params: GmmParams, X: np.ndarray) -> np.ndarray:
    lp = joint_log_prob(params, X)
    return np.exp(lp - logsumexp(lp, axis=1)[:, None])


def em_iterate(params: GmmParams, X: np.ndarray,
               variance_floor: float = VARIANCE_FLOOR) -> tuple[GmmParams, float]:
    """One E+M sweep. Returns the updated parameters and the mean
    log-likelihood of the data under the *input* parameters, which is
    non-decreasing across successive calls. Collapsing components are kept
    alive by the variance floor rather than raising."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("em_iterate needs at least one data point")
    lp = joint_log_prob(params, X)
    ll = logsumexp(lp, axis=1)
    resp = np.exp(lp - ll[:, None])
    counts = resp.sum(axis=0)
    weights = counts / X.shape[0]
    safe = np.maximum(counts, 1e-300)[:, None]
    means = (resp.T @ X) / safe
    second_moment = (resp.T @ (X**2)) / safe
    variances = np.maximum(second_moment - means**2, variance_floor)
    return GmmParams(weights, means, variances), float(ll.mean())


def fit(X: np.ndarray, config: GmmConfig = GmmConfig(),
        rng: np.random.Generator | None = None) -> tuple[GmmParams, list[float]]:
    """EM to convergence from k-means++ initialization. Returns the fitted
    parameters and the mean log-likelihood trace."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    k = config.n_components
    if X.shape[0] < k:
        raise ValueError(f"need at least {k} points to fit {k} components, got {X.shape[0]}")
    rng = np.random.default_rng(0) if rng is None else rng
    base_var = np.maximum(X.var(axis=0), config.variance_floor)
    params = GmmParams(
        np.full(k, 1.0 / k),
        kmeanspp_centers(X, k, rng),
        np.tile(base_var, (k, 1)),
    )
    history: list[float] = []
    previous = -np.inf
    for _ in range(config.max_iter):
        params, mean_ll = em_iterate(params, X, config.variance_floor)
        history.append(mean_ll)
        if abs(mean_ll - previous) < config.tol:
            break
        previous = mean_ll
    return params, history


def neg_log_prob(params: GmmParams, x: np.ndarray) -> float:
    """Anomaly score: higher means less likely under the mixture."""
    return -float(log_likelihoods(params, x)[0])
