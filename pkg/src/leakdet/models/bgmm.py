"""Bayesian diagonal Gaussian mixture trained by coordinate-ascent
variational inference.

The factorized posterior is a Dirichlet over mixing weights and an
independent Normal-Gamma pair per component and dimension. Each sweep
re-estimates responsibilities from the current posterior (E), evaluates the
evidence lower bound at that point, then updates the posterior (M); the
ELBO sequence is non-decreasing. Scoring plugs the posterior means into an
ordinary mixture density (negative log density, higher = more anomalous).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from .gmm import LOG_2PI, GmmParams, kmeanspp_centers, neg_log_prob as _gmm_neg_log_prob

VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class BgmmConfig:
    n_components: int = 16
    max_iter: int = 200
    tol: float = 1e-6  # stop when |delta ELBO| per point falls below
    alpha0: float = 1.0
    beta0: float = 1.0
    a0: float = 1.0
    variance_floor: float = VARIANCE_FLOOR


@dataclass(frozen=True)
class BgmmParams:
    """Variational posterior plus the fixed priors it was fitted against.

    alpha: Dirichlet concentrations (K,). Per component and dimension the
    Normal-Gamma posterior is N(mu | m, (beta*tau)^-1) Gamma(tau | a, b).
    """

    alpha: np.ndarray   # (K,)
    m: np.ndarray       # (K, D)
    beta: np.ndarray    # (K, D)
    a: np.ndarray       # (K, D)
    b: np.ndarray       # (K, D)
    alpha0: float
    m0: np.ndarray      # (D,)
    beta0: float
    a0: float
    b0: np.ndarray      # (D,)


def expected_log_joint(params: BgmmParams, X: np.ndarray) -> np.ndarray:
    """E_q[ln(pi_k N(x | mu_k, tau_k^-1))] for every point/component, (N, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    e_log_pi = digamma(params.alpha) - digamma(params.alpha.sum())
    e_log_tau = digamma(params.a) - np.log(params.b)          # (K, D)
    e_tau = params.a / params.b
    # E[tau*(x - mu)^2] = E[tau]*(x - m)^2 + 1/beta
    quad = (
        (X**2) @ e_tau.T
        - 2.0 * (X @ (e_tau * params.m).T)
        + ((params.m**2) * e_tau).sum(axis=1)[None, :]
        + (1.0 / params.beta).sum(axis=1)[None, :]
    )
    d = X.shape[1]
    return e_log_pi[None, :] + 0.5 * (e_log_tau.sum(axis=1)[None, :] - d * LOG_2PI) - 0.5 * quad


def _kl_dirichlet(alpha: np.ndarray, alpha0: float) -> float:
    k = alpha.size
    total = alpha.sum()
    return float(
        gammaln(total)
        - gammaln(alpha).sum()
        - gammaln(k * alpha0)
        + k * gammaln(alpha0)
        + ((alpha - alpha0) * (digamma(alpha) - digamma(total))).sum()
    )


def _kl_normal_gamma(params: BgmmParams) -> float:
    a, b, m, beta = params.a, params.b, params.m, params.beta
    a0, b0, m0, beta0 = params.a0, params.b0[None, :], params.m0[None, :], params.beta0
    kl_gamma = (
        (a - a0) * digamma(a)
        - gammaln(a)
        + gammaln(a0)
        + a0 * (np.log(b) - np.log(b0))
        + a * (b0 - b) / b
    )
    kl_normal = 0.5 * (np.log(beta / beta0) + beta0 / beta - 1.0 + beta0 * (a / b) * (m - m0) ** 2)
    return float((kl_gamma + kl_normal).sum())


def _m_step(resp: np.ndarray, X: np.ndarray, params: BgmmParams) -> BgmmParams:
    counts = resp.sum(axis=0)                                  # (K,)
    safe = np.maximum(counts, 1e-300)[:, None]
    xbar = (resp.T @ X) / safe
    within = np.maximum((resp.T @ (X**2)) / safe - xbar**2, 0.0)
    nk = counts[:, None]
    beta = params.beta0 + nk * np.ones((1, X.shape[1]))
    m = (params.beta0 * params.m0[None, :] + nk * xbar) / beta
    a = params.a0 + 0.5 * nk * np.ones((1, X.shape[1]))
    b = (
        params.b0[None, :]
        + 0.5 * nk * within
        + 0.5 * (params.beta0 * nk / (params.beta0 + nk)) * (xbar - params.m0[None, :]) ** 2
    )
    return BgmmParams(params.alpha0 + counts, m, beta, a, b,
                      params.alpha0, params.m0, params.beta0, params.a0, params.b0)


def vb_iterate(params: BgmmParams, X: np.ndarray) -> tuple[BgmmParams, float]:
    """One variational sweep (E step, ELBO, M step). The returned ELBO is
    evaluated right after the E step and is non-decreasing across calls."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("vb_iterate needs at least one data point")
    log_joint = expected_log_joint(params, X)
    norm = logsumexp(log_joint, axis=1)
    elbo = float(norm.sum()) - _kl_dirichlet(params.alpha, params.alpha0) - _kl_normal_gamma(params)
    resp = np.exp(log_joint - norm[:, None])
    return _m_step(resp, X, params), elbo


def fit(X: np.ndarray, config: BgmmConfig = BgmmConfig(),
        rng: np.random.Generator | None = None) -> tuple[BgmmParams, list[float]]:
    """Coordinate-ascent VI to convergence from a k-means++ hard assignment.

    Priors are data-driven: m0 is the data mean and b0 = a0 * data variance,
    so the prior expected precision matches the data.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    k = config.n_components
    if n < k:
        raise ValueError(f"need at least {k} points to fit {k} components, got {n}")
    rng = np.random.default_rng(0) if rng is None else rng

    m0 = X.mean(axis=0)
    b0 = config.a0 * np.maximum(X.var(axis=0), config.variance_floor)
    priors = BgmmParams(
        np.full(k, config.alpha0), np.tile(m0, (k, 1)),
        np.full((k, d), config.beta0), np.full((k, d), config.a0), np.tile(b0, (k, 1)),
        config.alpha0, m0, config.beta0, config.a0, b0,
    )
    centers = kmeanspp_centers(X, k, rng)
    nearest = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2).argmin(axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), nearest] = 1.0
    params = _m_step(resp, X, priors)

    history: list[float] = []
    previous = -np.inf
    for _ in range(config.max_iter):
        params, elbo = vb_iterate(params, X)
        history.append(elbo)
        if abs(elbo - previous) / n < config.tol:
            break
        previous = elbo
    return params, history


def plugin_mixture(params: BgmmParams, variance_floor: float = VARIANCE_FLOOR) -> GmmParams:
    """Mixture density at the posterior-expected parameters: weights from the
    Dirichlet mean, means m, variances 1/E[tau] = b/a."""
    return GmmParams(
        params.alpha / params.alpha.sum(),
        params.m,
        np.maximum(params.b / params.a, variance_floor),
    )


def neg_log_prob(params: BgmmParams, x: np.ndarray) -> float:
    return _gmm_neg_log_prob(plugin_mixture(params), x)
