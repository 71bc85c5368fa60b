"""Exact Gaussian-process regression with a Matern-5/2 ARD kernel.

Inputs are normalized to the unit cube via the search bounds; observations
are standardized. Kernel amplitude and per-dimension length-scales are fit
by maximizing the log marginal likelihood with multi-start local search.
The covariance factorization escalates jitter tenfold from 1e-8 up to 1e-2
before giving up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .common import Bounds, OptimizerError

_JITTER_START = 1e-8
_JITTER_MAX = 1e-2
_LOG_BOUND = (np.log(1e-2), np.log(1e2))


class GpFitError(OptimizerError):
    pass


def kernel_matern52(xi: np.ndarray, xj: np.ndarray, theta: float,
                    lengthscales: np.ndarray) -> np.ndarray:
    """k(xi, xj) = theta * (1 + s + 5/3 r^2) * exp(-s), s = sqrt(5 r^2),
    r^2 the ARD-scaled squared distance. Accepts (n,d)/(m,d) or single
    points; returns (n,m) or a scalar."""
    a = np.atleast_2d(xi)
    b = np.atleast_2d(xj)
    diff = (a[:, None, :] - b[None, :, :]) / lengthscales
    r2 = np.sum(diff * diff, axis=-1)
    s = np.sqrt(5.0 * r2)
    k = theta * (1.0 + s + (5.0 / 3.0) * r2) * np.exp(-s)
    if np.ndim(xi) == 1 and np.ndim(xj) == 1:
        return float(k[0, 0])
    return k


def _chol_with_jitter(k_matrix: np.ndarray, noise: float):
    n = k_matrix.shape[0]
    jitter = _JITTER_START
    while jitter <= _JITTER_MAX:
        try:
            c = cho_factor(k_matrix + (noise + jitter) * np.eye(n), lower=True)
            return c, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GpFitError(f"covariance not positive definite at jitter {_JITTER_MAX}")


@dataclass
class GpModel:
    bounds: Bounds
    x_norm: np.ndarray  # (n, d) inputs in the unit cube
    y_mean: float
    y_scale: float
    y_std: np.ndarray  # standardized observations
    theta: float
    lengthscales: np.ndarray
    noise: float
    jitter: float
    _chol: object
    _alpha: np.ndarray

    @property
    def n_observations(self) -> int:
        return int(self.x_norm.shape[0])

    def posterior_std(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean / standard deviation on the standardized-y scale,
        at unit-cube query points (m, d)."""
        u = np.atleast_2d(u)
        k_star = kernel_matern52(u, self.x_norm, self.theta, self.lengthscales)
        mu = k_star @ self._alpha
        v = cho_solve(self._chol, k_star.T)
        var = self.theta - np.sum(k_star * v.T, axis=1)
        sigma = np.sqrt(np.maximum(var, 0.0))
        return mu, sigma

    def posterior(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean / standard deviation in raw-y units at raw-space
        query points."""
        u = self.bounds.normalize(np.atleast_2d(x))
        mu, sigma = self.posterior_std(u)
        return self.y_mean + self.y_scale * mu, self.y_scale * sigma

    def best_observed_std(self) -> float:
        return float(np.max(self.y_std))


def _neg_log_marginal(log_params: np.ndarray, x_norm: np.ndarray,
                      y_std: np.ndarray, noise: float) -> float:
    theta = np.exp(log_params[0])
    ls = np.exp(log_params[1:])
    k = kernel_matern52(x_norm, x_norm, theta, ls)
    try:
        chol, _ = _chol_with_jitter(k, noise)
    except GpFitError:
        return 1e12
    alpha = cho_solve(chol, y_std)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    n = y_std.shape[0]
    return float(0.5 * y_std @ alpha + 0.5 * logdet + 0.5 * n * np.log(2 * np.pi))


def gp_fit(
    xs: Sequence[np.ndarray],
    ys: Sequence[float],
    bounds: Bounds,
    noise: float = 1e-6,
    optimize_hypers: bool = True,
    rng: Optional[np.random.Generator] = None,
    n_starts: int = 2,
    theta: Optional[float] = None,
    lengthscales: Optional[np.ndarray] = None,
) -> GpModel:
    """Fit the GP to raw-space observations.

    Pass theta/lengthscales with optimize_hypers=False to reuse previously
    fitted kernel hyper-parameters.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise GpFitError("need at least one observation")
    x_norm = bounds.normalize(x)
    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale == 0.0:
        y_scale = 1.0
    y_std = (y - y_mean) / y_scale

    d = bounds.dim
    theta = 1.0 if theta is None else float(theta)
    ls = np.full(d, 0.5) if lengthscales is None else np.asarray(lengthscales, float)
    if optimize_hypers and x.shape[0] >= 3:
        rng = rng or np.random.default_rng(0)
        starts = [np.concatenate(([0.0], np.log(np.full(d, s0))))
                  for s0 in (0.15, 0.5, 1.5)]
        while len(starts) < n_starts + 3:
            starts.append(np.concatenate((
                rng.uniform(np.log(0.3), np.log(3.0), 1),
                rng.uniform(np.log(0.05), np.log(2.0), d))))
        best_val, best_p = np.inf, starts[0]
        bnds = [_LOG_BOUND] * (d + 1)
        for p0 in starts[:n_starts + 3]:
            res = minimize(_neg_log_marginal, p0,
                           args=(x_norm, y_std, noise),
                           method="L-BFGS-B", bounds=bnds,
                           options={"maxiter": 60})
            if res.fun < best_val:
                best_val, best_p = res.fun, res.x
        theta = float(np.exp(best_p[0]))
        ls = np.exp(best_p[1:])

    k = kernel_matern52(x_norm, x_norm, theta, ls)
    chol, jitter = _chol_with_jitter(k, noise)
    alpha = cho_solve(chol, y_std)
    return GpModel(bounds=bounds, x_norm=x_norm, y_mean=y_mean, y_scale=y_scale,
                   y_std=y_std, theta=theta, lengthscales=ls, noise=noise,
                   jitter=jitter, _chol=chol, _alpha=alpha)
