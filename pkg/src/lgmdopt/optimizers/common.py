"""Shared optimizer types: bounds, candidates, run records, persistence."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

#: order-preserving batch evaluator: vectors in -> fitnesses out
Evaluator = Callable[[list[np.ndarray]], list[float]]


class OptimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Bounds:
    """Box constraints; every candidate stays inside component-wise."""

    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self) -> None:
        lows = np.asarray(self.lows, dtype=float)
        highs = np.asarray(self.highs, dtype=float)
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)
        if lows.shape != highs.shape or lows.ndim != 1:
            raise ValueError("bounds must be matching 1-d arrays")
        if np.any(lows >= highs):
            raise ValueError("each dimension needs min < max")

    @property
    def dim(self) -> int:
        return int(self.lows.shape[0])

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lows, self.highs)

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lows) and np.all(x <= self.highs))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lows + rng.random((n, self.dim)) * (self.highs - self.lows)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.lows) / (self.highs - self.lows)

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        return self.lows + u * (self.highs - self.lows)

    def sha256(self) -> str:
        payload = repr((self.lows.tolist(), self.highs.tolist())).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass
class Candidate:
    x: np.ndarray
    fitness: Optional[float] = None


@dataclass(frozen=True)
class EvalRecord:
    index: int
    x: np.ndarray
    fitness: float  # -inf when the evaluation failed
    failed: bool
    strategy: str
    f_weight: Optional[float] = None
    cr: Optional[float] = None


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    evaluations: int  # cumulative evaluation count at the end of the generation
    best_fitness: float
    mean_fitness: float
    mean_f: Optional[float] = None
    mean_cr: Optional[float] = None
    strategy_probs: Optional[tuple[float, ...]] = None


@dataclass
class OptimizerRun:
    """Full trajectory of one optimisation run."""

    method: str
    seed: int
    bounds: Bounds
    config: dict[str, object]
    evaluations: list[EvalRecord] = field(default_factory=list)
    generations: list[GenerationStats] = field(default_factory=list)
    best_index: int = -1
    converged: bool = False

    @property
    def best(self) -> EvalRecord:
        if self.best_index < 0:
            raise OptimizerError("run holds no evaluations")
        return self.evaluations[self.best_index]

    @property
    def evaluation_count(self) -> int:
        return len(self.evaluations)

    def fitness_trajectory(self) -> np.ndarray:
        return np.array([r.fitness for r in self.evaluations])


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_opt_float(token: str) -> Optional[float]:
    return None if token == "-" else float(token)


def save_run(run: OptimizerRun, path: str | Path) -> None:
    """Append-only text record; bit-stable for identical runs."""
    lines = ["# lgmdopt-run v1",
             f"# method = {run.method}",
             f"# seed = {run.seed}",
             f"# dim = {run.bounds.dim}",
             f"# bounds_sha256 = {run.bounds.sha256()}",
             f"# bounds_low = {' '.join(repr(float(v)) for v in run.bounds.lows)}",
             f"# bounds_high = {' '.join(repr(float(v)) for v in run.bounds.highs)}"]
    for key in sorted(run.config):
        lines.append(f"# cfg.{key} = {_fmt(run.config[key])}")
    lines.append(f"# converged = {run.converged}")
    lines.append(f"# best_index = {run.best_index}")
    lines.append("[evaluations]")
    lines.append("# index strategy F CR failed fitness x...")
    for r in run.evaluations:
        xs = " ".join(repr(float(v)) for v in r.x)
        lines.append(f"{r.index}\t{r.strategy}\t{_fmt(r.f_weight)}\t{_fmt(r.cr)}\t"
                     f"{int(r.failed)}\t{_fmt(r.fitness)}\t{xs}")
    lines.append("[generations]")
    lines.append("# generation evaluations best mean meanF meanCR p...")
    for g in run.generations:
        probs = (" ".join(repr(float(p)) for p in g.strategy_probs)
                 if g.strategy_probs is not None else "-")
        lines.append(f"{g.generation}\t{g.evaluations}\t{_fmt(g.best_fitness)}\t"
                     f"{_fmt(g.mean_fitness)}\t{_fmt(g.mean_f)}\t{_fmt(g.mean_cr)}\t{probs}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_run(path: str | Path) -> OptimizerRun:
    text = Path(path).read_text()
    header: dict[str, str] = {}
    config: dict[str, object] = {}
    evaluations: list[EvalRecord] = []
    generations: list[GenerationStats] = []
    section = "header"
    for line in text.splitlines():
        if not line.strip():
            continue
        if line == "[evaluations]":
            section = "evaluations"
            continue
        if line == "[generations]":
            section = "generations"
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                key, val = key.strip(), val.strip()
                if key.startswith("cfg."):
                    config[key[4:]] = val
                else:
                    header[key] = val
            continue
        parts = line.split("\t")
        if section == "evaluations":
            idx, strategy, fw, cr, failed, fitness, xs = parts
            evaluations.append(EvalRecord(
                index=int(idx),
                x=np.array([float(v) for v in xs.split()]),
                fitness=float(fitness),
                failed=bool(int(failed)),
                strategy=strategy,
                f_weight=_parse_opt_float(fw),
                cr=_parse_opt_float(cr)))
        elif section == "generations":
            gen, evals, best, mean, mf, mcr, probs = parts
            generations.append(GenerationStats(
                generation=int(gen),
                evaluations=int(evals),
                best_fitness=float(best),
                mean_fitness=float(mean),
                mean_f=_parse_opt_float(mf),
                mean_cr=_parse_opt_float(mcr),
                strategy_probs=(tuple(float(p) for p in probs.split())
                                if probs != "-" else None)))
    bounds = Bounds(
        np.array([float(v) for v in header["bounds_low"].split()]),
        np.array([float(v) for v in header["bounds_high"].split()]))
    run = OptimizerRun(
        method=header["method"],
        seed=int(header["seed"]),
        bounds=bounds,
        config=config,
        evaluations=evaluations,
        generations=generations,
        best_index=int(header["best_index"]),
        converged=header["converged"] == "True")
    if header["bounds_sha256"] != bounds.sha256():
        raise OptimizerError(f"bounds hash mismatch in {path}")
    return run


def sanitize_fitness(value: float) -> tuple[float, bool]:
    """Map non-finite evaluator output to (-inf, failed)."""
    v = float(value)
    if math.isfinite(v):
        return v, False
    return float("-inf"), True


def function_evaluator(fn: Callable[[np.ndarray], float]) -> Evaluator:
    """Wrap a plain function of one vector as a batch evaluator."""

    def batch(xs: list[np.ndarray]) -> list[float]:
        return [fn(x) for x in xs]

    return batch
