"""Bayesian optimisation: GP surrogate plus acquisition maximisation.

Each proposal maximises the acquisition over 10^4 uniform samples of the
unit cube followed by local refinement from the best 10; fully deterministic
per seed. Failed (non-finite) evaluations join the trajectory with fitness
-inf but are excluded from the surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .acquisition import AcquisitionConfig, evaluate_acquisition
from .common import (
    Bounds,
    EvalRecord,
    Evaluator,
    OptimizerError,
    OptimizerRun,
    sanitize_fitness,
)
from .de import default_population_size
from .gp import GpFitError, GpModel, gp_fit

_N_SAMPLES = 10_000
_N_REFINE = 10


@dataclass(frozen=True)
class BoConfig:
    acquisition: AcquisitionConfig = AcquisitionConfig("ei")
    n_init: Optional[int] = None  # None -> 3 * dim random evaluations
    patience: Optional[int] = None  # None -> 3 * ceil(10 d / 3); 0 disables
    noise: float = 1e-6
    refit_hypers_below: int = 50  # refit every step up to this many points
    refit_every: int = 5  # afterwards, refit at this cadence


def bo_propose(model: GpModel, config: AcquisitionConfig, bounds: Bounds,
               rng: np.random.Generator, t: int = 1) -> np.ndarray:
    """Argmax of the acquisition over the bounds (sampling + refinement)."""
    f_best = model.best_observed_std()
    dim = bounds.dim
    u = rng.random((_N_SAMPLES, dim))
    mu, sigma = model.posterior_std(u)
    values = evaluate_acquisition(config, mu, sigma, f_best, t, dim)
    top = np.argsort(values)[::-1][:_N_REFINE]

    def negative_acq(point: np.ndarray) -> float:
        m, s = model.posterior_std(point[None, :])
        val = evaluate_acquisition(config, m, s, f_best, t, dim)
        return -float(val[0])

    best_u = u[top[0]]
    best_val = -float(values[top[0]])
    for i in top:
        res = minimize(negative_acq, u[i], method="L-BFGS-B",
                       bounds=[(0.0, 1.0)] * dim, options={"maxiter": 40})
        if res.fun < best_val:
            best_val, best_u = res.fun, res.x
    return bounds.clip(bounds.denormalize(best_u))


def run_bo(
    evaluator: Evaluator,
    bounds: Bounds,
    budget: int,
    seed: int,
    config: BoConfig = BoConfig(),
    target_fitness: Optional[float] = None,
) -> OptimizerRun:
    """Sequential propose-evaluate loop with DE-equivalent patience."""
    if budget <= 0:
        raise OptimizerError("budget must be positive")
    rng = np.random.default_rng(seed)
    dim = bounds.dim
    n_init = config.n_init if config.n_init is not None else max(2, 3 * dim)
    patience = (config.patience if config.patience is not None
                else 3 * default_population_size(dim))
    acq = config.acquisition

    run = OptimizerRun(
        method=f"bo-{acq.kind}", seed=seed, bounds=bounds,
        config={"n_init": n_init, "patience": patience, "budget": budget,
                "acquisition": acq.kind, "zeta": acq.zeta, "nu": acq.nu,
                "delta": acq.delta,
                "kappa": acq.kappa if acq.kappa is not None else "schedule"})

    xs: list[np.ndarray] = []
    ys: list[float] = []
    best_fit = -np.inf
    best_eval = -1
    last_improvement = 0
    evals = 0

    def record(x: np.ndarray, raw: float, strategy: str) -> None:
        nonlocal best_fit, best_eval, last_improvement, evals
        fit, failed = sanitize_fitness(raw)
        run.evaluations.append(EvalRecord(
            index=evals, x=x.copy(), fitness=fit, failed=failed,
            strategy=strategy))
        if not failed:
            xs.append(x)
            ys.append(fit)
        if fit > best_fit:
            best_fit, best_eval = fit, evals
            last_improvement = evals + 1
        evals += 1

    init_points = bounds.sample(rng, min(n_init, budget))
    for raw, x in zip(evaluator(list(init_points)), init_points):
        record(x, raw, "init")

    model: Optional[GpModel] = None
    hyper_state: Optional[tuple[float, np.ndarray]] = None
    t = 0
    while evals < budget:
        if target_fitness is not None and best_fit >= target_fitness:
            break
        if patience and evals - last_improvement >= patience:
            run.converged = True
            break
        t += 1
        if not xs:  # every evaluation failed so far: keep sampling
            x_next = bounds.sample(rng, 1)[0]
            record(x_next, evaluator([x_next])[0], "init")
            continue
        n = len(xs)
        refit = (hyper_state is None or n <= config.refit_hypers_below
                 or n % config.refit_every == 0)
        try:
            if refit:
                model = gp_fit(xs, ys, bounds, noise=config.noise, rng=rng)
                hyper_state = (model.theta, model.lengthscales)
            else:
                model = gp_fit(xs, ys, bounds, noise=config.noise,
                               optimize_hypers=False, theta=hyper_state[0],
                               lengthscales=hyper_state[1])
            x_next = bo_propose(model, acq, bounds, rng, t)
        except GpFitError:
            x_next = bounds.sample(rng, 1)[0]
        record(x_next, evaluator([x_next])[0], f"bo-{acq.kind}")

    run.best_index = best_eval
    return run
