"""Bound-constrained black-box maximisers: DE, SADE, and GP-based BO."""

from __future__ import annotations

from typing import Optional

from .acquisition import (
    ACQUISITION_KINDS,
    AcquisitionConfig,
    acq_ei,
    acq_pi,
    acq_ucb,
    ucb_kappa,
)
from .bo import BoConfig, bo_propose, run_bo
from .common import (
    Bounds,
    Candidate,
    EvalRecord,
    Evaluator,
    GenerationStats,
    OptimizerError,
    OptimizerRun,
    function_evaluator,
    load_run,
    save_run,
)
from .de import (
    DeConfig,
    STRATEGIES,
    crossover_bin,
    de_init,
    default_population_size,
    mutate,
    run_de,
    select,
)
from .gp import GpFitError, GpModel, gp_fit, kernel_matern52
from .sade import SadeConfig, SadeState, run_sade

METHODS = ("de", "sade", "bo-pi", "bo-ei", "bo-ucb")


def optimize(
    evaluator: Evaluator,
    method: str,
    bounds: Bounds,
    budget: int,
    seed: int,
    patience: Optional[int] = None,
    target_fitness: Optional[float] = None,
    de_config: Optional[DeConfig] = None,
    sade_config: Optional[SadeConfig] = None,
    bo_config: Optional[BoConfig] = None,
) -> OptimizerRun:
    """Run the selected optimiser until budget, convergence, or target.

    `patience` (evaluations without improvement of the best fitness) defaults
    to 3 * NP for the population methods and the equivalent count for BO;
    pass 0 to disable convergence stopping.
    """
    if method == "de":
        cfg = de_config or DeConfig()
        if patience is not None:
            cfg = DeConfig(cfg.np_size, cfg.f_weight, cfg.cr, patience)
        return run_de(evaluator, bounds, budget, seed, cfg, target_fitness)
    if method == "sade":
        cfg = sade_config or SadeConfig()
        if patience is not None:
            cfg = SadeConfig(cfg.np_size, cfg.learning_period, cfg.epsilon, patience)
        return run_sade(evaluator, bounds, budget, seed, cfg, target_fitness)
    if method in ("bo-pi", "bo-ei", "bo-ucb"):
        cfg = bo_config or BoConfig(AcquisitionConfig(method.split("-")[1]))
        if cfg.acquisition.kind != method.split("-")[1]:
            raise OptimizerError(
                f"acquisition {cfg.acquisition.kind!r} does not match {method!r}")
        if patience is not None:
            cfg = BoConfig(cfg.acquisition, cfg.n_init, patience, cfg.noise,
                           cfg.refit_hypers_below, cfg.refit_every)
        return run_bo(evaluator, bounds, budget, seed, cfg, target_fitness)
    raise OptimizerError(f"unknown method {method!r}; expected one of {METHODS}")
