"""Self-adaptive DE: four mutation strategies with learned selection
probabilities and per-strategy crossover-rate memories.

For the first LP generations strategies are drawn uniformly (p = 1/4) and
CR ~ N(0.5, 0.3); afterwards p_k follows the success rate over the last LP
generations (with a floor epsilon) and CR ~ N(median successful CR_k, 0.1).
F ~ N(0.5, 0.3) truncated to (0, 1.4] throughout.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
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
from .de import STRATEGIES, crossover_bin, de_init, default_population_size, mutate, select


@dataclass(frozen=True)
class SadeConfig:
    np_size: Optional[int] = None  # None -> ceil(10 d / 3)
    learning_period: int = 3  # generations
    epsilon: float = 0.01  # probability floor per strategy
    patience: Optional[int] = None  # None -> 3 * NP; 0 disables

    def __post_init__(self) -> None:
        if self.learning_period < 1:
            raise OptimizerError("learning period must be >= 1")
        if not 0.0 < self.epsilon < 1.0 / len(STRATEGIES):
            raise OptimizerError("epsilon must lie in (0, 1/4)")


class SadeState:
    """Per-strategy success memory, probabilities, and CR memory.

    Memories are sliding windows over the last LP *completed* generations;
    the generation in progress accumulates separately and is merged by
    :meth:`end_generation`.
    """

    def __init__(self, config: SadeConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.generation = 0
        k = len(STRATEGIES)
        self.probabilities = np.full(k, 1.0 / k)
        lp = config.learning_period
        self._success_window: deque[np.ndarray] = deque(maxlen=lp)
        self._failure_window: deque[np.ndarray] = deque(maxlen=lp)
        self._cr_window: deque[list[list[float]]] = deque(maxlen=lp)
        self._begin_generation_memory()

    def _begin_generation_memory(self) -> None:
        k = len(STRATEGIES)
        self._cur_success = np.zeros(k, dtype=np.int64)
        self._cur_failure = np.zeros(k, dtype=np.int64)
        self._cur_cr: list[list[float]] = [[] for _ in range(k)]

    # -- sampling -----------------------------------------------------------

    def select_strategy(self) -> str:
        idx = self.rng.choice(len(STRATEGIES), p=self.probabilities)
        return STRATEGIES[int(idx)]

    def sample_f(self) -> float:
        """F ~ N(0.5, 0.3) truncated to (0, 1.4]."""
        while True:
            f = self.rng.normal(0.5, 0.3)
            if 0.0 < f <= 1.4:
                return float(f)

    def sample_cr(self, strategy: str) -> float:
        """CR ~ N(0.5, 0.3) before the learning period has elapsed, then
        N(median successful CR for the strategy, 0.1); truncated to [0, 1]."""
        if self.generation < self.config.learning_period:
            mean, sd = 0.5, 0.3
        else:
            mean, sd = self.cr_median(strategy), 0.1
        while True:
            cr = self.rng.normal(mean, sd)
            if 0.0 <= cr <= 1.0:
                return float(cr)

    def cr_median(self, strategy: str) -> float:
        k = STRATEGIES.index(strategy)
        values = [cr for gen in self._cr_window for cr in gen[k]]
        return float(np.median(values)) if values else 0.5

    # -- memory updates -----------------------------------------------------

    def record(self, strategy: str, improved: bool, cr_used: float) -> None:
        k = STRATEGIES.index(strategy)
        if improved:
            self._cur_success[k] += 1
            self._cur_cr[k].append(cr_used)
        else:
            self._cur_failure[k] += 1

    def end_generation(self) -> None:
        """Merge the finished generation; refresh probabilities once LP has
        elapsed."""
        self._success_window.append(self._cur_success)
        self._failure_window.append(self._cur_failure)
        self._cr_window.append(self._cur_cr)
        self.generation += 1
        if self.generation >= self.config.learning_period:
            ns = np.sum(self._success_window, axis=0).astype(float)
            nf = np.sum(self._failure_window, axis=0).astype(float)
            trials = ns + nf
            rates = np.divide(ns, trials, out=np.zeros_like(ns), where=trials > 0)
            eps = self.config.epsilon
            k = len(STRATEGIES)
            total = rates.sum()
            shares = rates / total if total > 0 else np.full(k, 1.0 / k)
            self.probabilities = eps + (1.0 - k * eps) * shares
        self._begin_generation_memory()


def run_sade(
    evaluator: Evaluator,
    bounds: Bounds,
    budget: int,
    seed: int,
    config: SadeConfig = SadeConfig(),
    target_fitness: Optional[float] = None,
) -> OptimizerRun:
    """SADE loop; same stopping rules as plain DE."""
    if budget <= 0:
        raise OptimizerError("budget must be positive")
    rng = np.random.default_rng(seed)
    np_size = config.np_size or default_population_size(bounds.dim)
    patience = config.patience if config.patience is not None else 3 * np_size

    run = OptimizerRun(
        method="sade", seed=seed, bounds=bounds,
        config={"np": np_size, "lp": config.learning_period,
                "epsilon": config.epsilon, "patience": patience, "budget": budget})

    population = de_init(bounds, min(np_size, budget), rng)
    if population.shape[0] < 6:
        raise OptimizerError("budget allows fewer than 6 initial candidates "
                             "(rand2 draws five distinct non-self rows)")
    np_size = population.shape[0]
    state = SadeState(config, rng)

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
    run.generations.append(GenerationStats(
        generation=0, evaluations=evals, best_fitness=best_fit,
        mean_fitness=float(np.mean(fitness)), mean_f=None, mean_cr=None,
        strategy_probs=tuple(state.probabilities)))

    def done() -> bool:
        if evals >= budget:
            return True
        if target_fitness is not None and best_fit >= target_fitness:
            return True
        if patience and evals - last_improvement >= patience:
            run.converged = True
            return True
        return False

    generation = 0
    while not done():
        generation += 1
        best_index = int(np.argmax(fitness))
        n_trials = min(np_size, budget - evals)
        trials = []
        drawn = []
        for i in range(n_trials):
            strategy = state.select_strategy()
            f_weight = state.sample_f()
            cr = state.sample_cr(strategy)
            donor = mutate(strategy, population, best_index, i, f_weight, bounds, rng)
            trials.append(crossover_bin(population[i], donor, cr, rng))
            drawn.append((strategy, f_weight, cr))
        results = evaluator(trials)
        for i, res in enumerate(results):
            strategy, f_weight, cr = drawn[i]
            fit, failed = sanitize_fitness(res)
            run.evaluations.append(EvalRecord(
                index=evals, x=trials[i].copy(), fitness=fit, failed=failed,
                strategy=strategy, f_weight=f_weight, cr=cr))
            improved = select(fitness[i], fit)
            state.record(strategy, improved, cr)
            if improved:
                population[i] = trials[i]
                fitness[i] = fit
            if fit > best_fit:
                best_fit, best_eval = fit, evals
                last_improvement = evals + 1
            evals += 1
        probs_snapshot = tuple(float(p) for p in state.probabilities)
        state.end_generation()
        run.generations.append(GenerationStats(
            generation=generation, evaluations=evals, best_fitness=best_fit,
            mean_fitness=float(np.mean(fitness)),
            mean_f=float(np.mean([d[1] for d in drawn])),
            mean_cr=float(np.mean([d[2] for d in drawn])),
            strategy_probs=probs_snapshot))

    run.best_index = best_eval
    return run
