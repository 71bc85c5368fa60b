"""Acquisition functions over a GP posterior: PI, EI, UCB.

All three operate on the standardized-y scale of the fitted model, which
makes proposals exactly invariant to positive rescaling of the raw
observations. The trade-off parameter zeta is therefore in standardized
units. PI and EI are defined as 0 where the posterior deviation is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

ACQUISITION_KINDS = ("pi", "ei", "ucb")


@dataclass(frozen=True)
class AcquisitionConfig:
    kind: str = "ei"
    zeta: float = 0.01  # PI / EI exploration margin
    nu: float = 1.0  # UCB schedule gain
    delta: float = 0.1  # UCB schedule confidence
    kappa: Optional[float] = None  # fixed UCB kappa; None -> schedule

    def __post_init__(self) -> None:
        if self.kind not in ACQUISITION_KINDS:
            raise ValueError(f"unknown acquisition {self.kind!r}")
        if self.zeta < 0:
            raise ValueError("zeta must be >= 0")
        if self.nu <= 0:
            raise ValueError("nu must be > 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def _phi(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def acq_pi(mu, sigma, f_best: float, zeta: float):
    """Probability of improvement: Phi((mu - f_best - zeta) / sigma)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = np.zeros_like(mu)
    pos = sigma > 0
    out[pos] = ndtr((mu[pos] - f_best - zeta) / sigma[pos])
    return out if out.ndim else float(out)


def acq_ei(mu, sigma, f_best: float, zeta: float):
    """Expected improvement over f_best + zeta; 0 where sigma = 0."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = np.zeros_like(mu)
    pos = sigma > 0
    gap = mu[pos] - f_best - zeta
    z = gap / sigma[pos]
    out[pos] = np.maximum(gap * ndtr(z) + sigma[pos] * _phi(z), 0.0)
    return out if out.ndim else float(out)


def acq_ucb(mu, sigma, kappa: float):
    """Upper confidence bound mu + kappa * sigma."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = mu + kappa * sigma
    return out if out.ndim else float(out)


def ucb_kappa(nu: float, t: int, d: int, delta: float) -> float:
    """Scheduled kappa = sqrt(nu * tau_t) with
    tau_t = 2 log(t^(d/2 + 2) pi^2 / (3 delta))."""
    if t < 1:
        raise ValueError("iteration number t starts at 1")
    log_inner = (d / 2.0 + 2.0) * math.log(t) + math.log(math.pi ** 2 / (3.0 * delta))
    tau_t = 2.0 * log_inner
    return math.sqrt(nu * tau_t)


def evaluate_acquisition(config: AcquisitionConfig, mu, sigma,
                         f_best: float, t: int, dim: int):
    """Dispatch on the configured kind; `t` feeds the UCB schedule."""
    if config.kind == "pi":
        return acq_pi(mu, sigma, f_best, config.zeta)
    if config.kind == "ei":
        return acq_ei(mu, sigma, f_best, config.zeta)
    kappa = config.kappa if config.kappa is not None else ucb_kappa(
        config.nu, t, dim, config.delta)
    return acq_ucb(mu, sigma, kappa)
