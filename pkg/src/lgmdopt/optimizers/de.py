"""Differential evolution (rand/1/bin) and the shared mutation machinery.

Maximisation throughout. Donor vectors are clipped to the bounds; binomial
crossover forces at least one donor component; selection keeps the parent on
ties. A run converges when the population best has not strictly improved for
`patience` consecutive evaluations (default 3 * NP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .common import (
    Bounds,
    EvalRecord,
    Evaluator,
    GenerationStats,
    OptimizerError,
    OptimizerRun,
    sanitize_fitness,
)

STRATEGIES = ("rand1", "rand2", "rand_to_best2", "curr_to_rand1")


def default_population_size(dim: int) -> int:
    """Published rule of thumb: NP = ceil(10 * dim / 3)."""
    return math.ceil(10 * dim / 3)


@dataclass(frozen=True)
class DeConfig:
    np_size: Optional[int] = None  # None -> ceil(10 d / 3)
    f_weight: float = 0.6607
    cr: float = 0.9426
    patience: Optional[int] = None  # None -> 3 * NP; 0 disables

    def __post_init__(self) -> None:
        if self.np_size is not None and self.np_size < 4:
            raise OptimizerError("population size must be at least 4")
        if not 0.0 <= self.f_weight <= 2.0:
            raise OptimizerError("F must lie in [0, 2]")
        if not 0.0 <= self.cr <= 1.0:
            raise OptimizerError("CR must lie in [0, 1]")


def de_init(bounds: Bounds, np_size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform initial population within bounds, deterministic per rng."""
    if np_size < 4:
        raise OptimizerError("population size must be at least 4 "
                             "(mutation draws three distinct non-self rows)")
    return bounds.sample(rng, np_size)


def _distinct_indices(np_size: int, exclude: int, count: int,
                      rng: np.random.Generator) -> np.ndarray:
    pool = np.delete(np.arange(np_size), exclude)
    return rng.choice(pool, size=count, replace=False)


def mutate(strategy: str, population: np.ndarray, best_index: int, i: int,
           f_weight: float, bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """Donor vector for candidate i under the given strategy, clipped."""
    np_size = population.shape[0]
    if strategy == "rand1":
        r = _distinct_indices(np_size, i, 3, rng)
        donor = population[r[0]] + f_weight * (population[r[1]] - population[r[2]])
    elif strategy == "rand2":
        r = _distinct_indices(np_size, i, 5, rng)
        donor = (population[r[0]]
                 + f_weight * (population[r[1]] - population[r[2]])
                 + f_weight * (population[r[3]] - population[r[4]]))
    elif strategy == "rand_to_best2":
        r = _distinct_indices(np_size, i, 4, rng)
        donor = (population[i]
                 + f_weight * (population[best_index] - population[i])
                 + f_weight * (population[r[0]] - population[r[1]])
                 + f_weight * (population[r[2]] - population[r[3]]))
    elif strategy == "curr_to_rand1":
        r = _distinct_indices(np_size, i, 3, rng)
        k = rng.random()
        donor = (population[i]
                 + k * (population[r[0]] - population[i])
                 + f_weight * (population[r[1]] - population[r[2]]))
    else:
        raise OptimizerError(f"unknown mutation strategy {strategy!r}")
    return bounds.clip(donor)


def crossover_bin(parent: np.ndarray, donor: np.ndarray, cr: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover; index R always takes the donor component."""
    dim = parent.shape[0]
    mask = rng.random(dim) <= cr
    mask[rng.integers(dim)] = True
    return np.where(mask, donor, parent)


def select(parent_fitness: float, trial_fitness: float) -> bool:
    """True when the trial replaces the parent (strictly better)."""
    return trial_fitness > parent_fitness


def run_de(
    evaluator: Evaluator,
    bounds: Bounds,
    budget: int,
    seed: int,
    config: DeConfig = DeConfig(),
    target_fitness: Optional[float] = None,
) -> OptimizerRun:
    """Canonical DE/rand/1/bin to a budget / convergence / target stop."""
    if budget <= 0:
        raise OptimizerError("budget must be positive")
    rng = np.random.default_rng(seed)
    np_size = config.np_size or default_population_size(bounds.dim)
    patience = config.patience if config.patience is not None else 3 * np_size

    run = OptimizerRun(
        method="de", seed=seed, bounds=bounds,
        config={"np": np_size, "f_weight": config.f_weight, "cr": config.cr,
                "patience": patience, "budget": budget})

    population = de_init(bounds, min(np_size, budget), rng)
    if population.shape[0] < 4:
        raise OptimizerError("budget allows fewer than 4 initial candidates")
    np_size = population.shape[0]

    fitness = np.empty(np_size)
    results = evaluator([population[i] for i in range(np_size)])
    best_eval = -1
    best_fit = -np.inf
    last_improvement = 0
    for i, res in enumerate(results):
        fit, failed = sanitize_fitness(res)
        fitness[i] = fit
        run.evaluations.append(EvalRecord(
            index=i, x=population[i].copy(), fitness=fit, failed=failed,
            strategy="init", f_weight=None, cr=None))
        if fit > best_fit:
            best_fit, best_eval = fit, i
            last_improvement = i + 1
    evals = np_size
    generation = 0
    run.generations.append(GenerationStats(
        generation=0, evaluations=evals, best_fitness=best_fit,
        mean_fitness=float(np.mean(fitness)),
        mean_f=config.f_weight, mean_cr=config.cr))

    def done() -> bool:
        if evals >= budget:
            return True
        if target_fitness is not None and best_fit >= target_fitness:
            return True
        if patience and evals - last_improvement >= patience:
            run.converged = True
            return True
        return False

    while not done():
        generation += 1
        best_index = int(np.argmax(fitness))
        n_trials = min(np_size, budget - evals)
        trials = []
        for i in range(n_trials):
            donor = mutate("rand1", population, best_index, i,
                           config.f_weight, bounds, rng)
            trials.append(crossover_bin(population[i], donor, config.cr, rng))
        results = evaluator(trials)
        for i, res in enumerate(results):
            fit, failed = sanitize_fitness(res)
            run.evaluations.append(EvalRecord(
                index=evals, x=trials[i].copy(), fitness=fit, failed=failed,
                strategy="rand1", f_weight=config.f_weight, cr=config.cr))
            if select(fitness[i], fit):
                population[i] = trials[i]
                fitness[i] = fit
            if fit > best_fit:
                best_fit, best_eval = fit, evals
                last_improvement = evals + 1
            evals += 1
        run.generations.append(GenerationStats(
            generation=generation, evaluations=evals, best_fitness=best_fit,
            mean_fitness=float(np.mean(fitness)),
            mean_f=config.f_weight, mean_cr=config.cr))

    run.best_index = best_eval
    return run
