"""Experiment orchestration: runs, comparisons, sweeps, exports.

Run directories are single-writer and never overwritten; everything in a
summary is recomputable from the persisted per-run records. Repeats derive
their seeds from the master seed through a documented counter scheme, so a
rerun with the same configuration is byte-identical.
"""

from __future__ import annotations

import multiprocessing
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, OptimizerSettings, dump_config
from .events import EventRecording, generate_stimulus, load_recording, save_recording
from .model import params_from_vector, variant_bounds, variant_dimensions
from .network import build_network
from .objective import ClassifierConfig, FitnessReport, ScoreConstants, evaluate, metrics
from .optimizers import (
    AcquisitionConfig,
    BoConfig,
    Bounds,
    DeConfig,
    OptimizerRun,
    SadeConfig,
    load_run,
    optimize,
    save_run,
)
from .simulate import run as run_simulation
from .simulate import save_snapshots, save_spike_trains, save_trace
from .stats import mann_whitney_u

COMPARISON_METRICS = ("fit", "eva", "acc", "sen", "pre", "spe")
SIGNIFICANCE_LEVEL = 0.05


class HarnessError(RuntimeError):
    pass


def derive_seed(master_seed: int, *counters) -> int:
    """Counter-based fan-out: children are independent streams, reproducible
    from (master_seed, counters)."""
    material = [master_seed] + [
        c if isinstance(c, int) else int.from_bytes(str(c).encode(), "big")
        for c in counters
    ]
    return int(np.random.SeedSequence(material).generate_state(1)[0])


# ---------------------------------------------------------------------------
# candidate evaluation (optionally in a process pool)
# ---------------------------------------------------------------------------

_WORKER_EVALUATOR: Optional["FitnessEvaluator"] = None


def _init_worker(evaluator: "FitnessEvaluator") -> None:
    global _WORKER_EVALUATOR
    _WORKER_EVALUATOR = evaluator


def _worker_call(x: np.ndarray) -> float:
    return _WORKER_EVALUATOR.fitness_of(x)


class FitnessEvaluator:
    """Order-preserving batch evaluator: vector -> simulate -> gated fitness.

    With threads > 1, batches fan out over a fork-based process pool; results
    come back in submission order so optimizer trajectories do not depend on
    the worker count.
    """

    def __init__(self, recording: EventRecording, config: ExperimentConfig):
        self.recording = recording
        self.config = config
        self._pool = None

    # pool state never crosses pickling into workers
    def __getstate__(self):
        state = self.__dict__.copy()
        state["_pool"] = None
        return state

    def fitness_of(self, x: np.ndarray) -> float:
        return self.report_for(x).fitness_acc

    def report_for(self, x: np.ndarray) -> FitnessReport:
        cfg = self.config
        params = params_from_vector(x, cfg.variant, cfg.clamp_c)
        net = build_network((cfg.stimulus.width, cfg.stimulus.height),
                            cfg.constants, params)
        result = run_simulation(net, self.recording, cfg.dt_us)
        return evaluate(result, self.recording.labels, cfg.classifier, cfg.score)

    def __call__(self, xs: list[np.ndarray]) -> list[float]:
        if self.config.threads > 1 and len(xs) > 1:
            if self._pool is None:
                ctx = multiprocessing.get_context("fork")
                self._pool = ctx.Pool(self.config.threads,
                                      initializer=_init_worker, initargs=(self,))
            return self._pool.map(_worker_call, xs, chunksize=1)
        return [self.fitness_of(x) for x in xs]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self) -> "FitnessEvaluator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _optimizer_kwargs(settings: OptimizerSettings, dim: int) -> dict:
    if settings.method == "de":
        return {"de_config": DeConfig(settings.np_size, settings.f_weight,
                                      settings.cr, settings.patience)}
    if settings.method == "sade":
        return {"sade_config": SadeConfig(settings.np_size,
                                          settings.learning_period,
                                          patience=settings.patience)}
    if settings.method.startswith("bo-"):
        acq = AcquisitionConfig(settings.method.split("-")[1],
                                zeta=settings.zeta, nu=settings.nu,
                                delta=settings.delta, kappa=settings.kappa)
        return {"bo_config": BoConfig(acq, patience=settings.patience)}
    raise HarnessError(f"unknown optimizer method {settings.method!r}")


def obtain_recording(config: ExperimentConfig) -> EventRecording:
    s = config.stimulus
    if s.recording_path:
        return load_recording(s.recording_path)
    return generate_stimulus(s.to_spec(), (s.width, s.height),
                             s.resolved_duration_us(), s.frame_us,
                             seed=s.stimulus_seed)


# ---------------------------------------------------------------------------
# run experiment
# ---------------------------------------------------------------------------

def _prepare_out_dir(out_dir: Path) -> None:
    if out_dir.exists() and any(out_dir.iterdir()):
        raise HarnessError(f"output directory {out_dir} exists and is not empty; "
                           "runs are never overwritten")
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write-probe"
    try:
        probe.write_text("ok")
        probe.unlink()
    except OSError as exc:
        raise HarnessError(f"output directory {out_dir} is not writable") from exc


def _save_best_artifacts(run_dir: Path, run: OptimizerRun,
                         evaluator: FitnessEvaluator) -> FitnessReport:
    cfg = evaluator.config
    x = run.best.x
    params = params_from_vector(x, cfg.variant, cfg.clamp_c)
    net = build_network((cfg.stimulus.width, cfg.stimulus.height),
                        cfg.constants, params)
    result = run_simulation(net, evaluator.recording, cfg.dt_us)
    report = evaluate(result, evaluator.recording.labels, cfg.classifier, cfg.score)
    (run_dir / "best_fitness.txt").write_text(report.to_record())
    (run_dir / "best_vector.txt").write_text(
        " ".join(repr(float(v)) for v in x) + "\n")
    sim_dir = run_dir / "best_sim"
    save_spike_trains(result, sim_dir)
    save_trace(result, sim_dir / "lgmd_trace.f64")
    if net.plasticity:
        save_snapshots(result, sim_dir / "weight_snapshots.txt", net.width)
    return report


def _summary_rows(reports: list[FitnessReport], runs: list[OptimizerRun]) -> str:
    header = "repeat\tseed\tevaluations\tconverged\tf_acc\tacc\tsen\tpre\tspe"
    lines = [header]
    for i, (rep, run) in enumerate(zip(reports, runs)):
        acc, sen, pre, spe = metrics(rep.confusion)
        lines.append(
            f"{i}\t{run.seed}\t{run.evaluation_count}\t{int(run.converged)}\t"
            f"{rep.fitness_acc!r}\t{acc!r}\t{sen!r}\t{pre!r}\t{spe!r}")
    per_metric = list(zip(*[(
        r.fitness_acc, run.evaluation_count, *metrics(r.confusion))
        for r, run in zip(reports, runs)]))
    means = [float(np.mean(col)) for col in per_metric]
    lines.append("# mean\t-\t" + repr(means[1]) + "\t-\t"
                 + "\t".join(repr(m) for m in (means[0], *means[2:])))
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> Path:
    """Repeated optimizer runs on one stimulus; persists everything."""
    out_dir = Path(out_dir)
    _prepare_out_dir(out_dir)
    (out_dir / "config.ini").write_text(dump_config(config))

    recording = obtain_recording(config)
    save_recording(recording, out_dir / "recording.evr")

    bounds = Bounds(*variant_bounds(config.variant))
    settings = config.optimizer
    kwargs = _optimizer_kwargs(settings, bounds.dim)

    runs: list[OptimizerRun] = []
    reports: list[FitnessReport] = []
    with FitnessEvaluator(recording, config) as evaluator:
        for repeat in range(config.repeats):
            seed = derive_seed(config.master_seed, settings.method, repeat)
            run = optimize(evaluator, settings.method, bounds,
                           budget=settings.budget, seed=seed,
                           target_fitness=settings.target_fitness, **kwargs)
            run_dir = out_dir / f"run_{repeat:03d}"
            run_dir.mkdir()
            save_run(run, run_dir / "optimizer_run.txt")
            reports.append(_save_best_artifacts(run_dir, run, evaluator))
            runs.append(run)
    (out_dir / "summary.txt").write_text(_summary_rows(reports, runs))
    return out_dir


# ---------------------------------------------------------------------------
# optimizer comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    methods: list[str]
    samples: dict[str, dict[str, list[float]]]  # method -> metric -> values
    failures: dict[str, str]  # method -> error message
    cells: dict[tuple[str, str, str], tuple[float, float, bool]]  # (m1,m2,metric)

    def significant(self, m1: str, m2: str, metric: str) -> Optional[bool]:
        key = (m1, m2, metric)
        return self.cells[key][2] if key in self.cells else None

    def render_text(self) -> str:
        lines = ["method\t" + "\t".join(COMPARISON_METRICS)]
        for m in self.methods:
            if m in self.failures:
                lines.append(f"{m}\tfailed: {self.failures[m]}")
                continue
            means = [float(np.mean(self.samples[m][metric]))
                     for metric in COMPARISON_METRICS]
            lines.append(m + "\t" + "\t".join(repr(v) for v in means))
        lines.append("")
        lines.append("# pairwise significance (+ significant, . not, x unavailable)")
        lines.append("pair\t" + "\t".join(COMPARISON_METRICS))
        for m1 in self.methods:
            for m2 in self.methods:
                if m1 == m2:
                    continue
                marks = []
                for metric in COMPARISON_METRICS:
                    key = (m1, m2, metric)
                    if key not in self.cells:
                        marks.append("x")
                    else:
                        marks.append("+" if self.cells[key][2] else ".")
                lines.append(f"{m1} vs {m2}\t" + "\t".join(marks))
        return "\n".join(lines) + "\n"


def significance_matrix(
    samples: dict[str, dict[str, list[float]]],
) -> dict[tuple[str, str, str], tuple[float, float, bool]]:
    """Pairwise two-sided tests per metric; a cell is significant at
    p <= 0.05."""
    cells: dict[tuple[str, str, str], tuple[float, float, bool]] = {}
    for m1 in samples:
        for m2 in samples:
            if m1 == m2:
                continue
            for metric in COMPARISON_METRICS:
                u, p = mann_whitney_u(samples[m1][metric], samples[m2][metric])
                cells[(m1, m2, metric)] = (u, p, p <= SIGNIFICANCE_LEVEL)
    return cells


def compare_optimizers(config: ExperimentConfig, methods: Sequence[str],
                       out_dir: str | Path,
                       repeats: Optional[int] = None) -> ComparisonReport:
    """Run every method `repeats` times on the same stimulus and build the
    pairwise significance matrix over six metrics."""
    if len(methods) < 2:
        raise HarnessError("comparison needs at least two optimizer configs")
    out_dir = Path(out_dir)
    _prepare_out_dir(out_dir)
    repeats = repeats if repeats is not None else config.repeats

    recording = obtain_recording(config)
    save_recording(recording, out_dir / "recording.evr")
    (out_dir / "config.ini").write_text(dump_config(config))

    samples: dict[str, dict[str, list[float]]] = {}
    failures: dict[str, str] = {}
    bounds = Bounds(*variant_bounds(config.variant))
    for method in methods:
        settings = OptimizerSettings(
            method=method, budget=config.optimizer.budget,
            np_size=config.optimizer.np_size, patience=config.optimizer.patience,
            learning_period=config.optimizer.learning_period,
            f_weight=config.optimizer.f_weight, cr=config.optimizer.cr,
            zeta=config.optimizer.zeta, nu=config.optimizer.nu,
            delta=config.optimizer.delta, kappa=config.optimizer.kappa,
            target_fitness=config.optimizer.target_fitness)
        kwargs = _optimizer_kwargs(settings, bounds.dim)
        per_metric: dict[str, list[float]] = {m: [] for m in COMPARISON_METRICS}
        method_dir = out_dir / method
        method_dir.mkdir()
        try:
            with FitnessEvaluator(recording, config) as evaluator:
                for repeat in range(repeats):
                    seed = derive_seed(config.master_seed, method, repeat)
                    run = optimize(evaluator, method, bounds,
                                   budget=settings.budget, seed=seed,
                                   target_fitness=settings.target_fitness,
                                   **kwargs)
                    run_dir = method_dir / f"run_{repeat:03d}"
                    run_dir.mkdir()
                    save_run(run, run_dir / "optimizer_run.txt")
                    report = _save_best_artifacts(run_dir, run, evaluator)
                    acc, sen, pre, spe = metrics(report.confusion)
                    per_metric["fit"].append(report.fitness_acc)
                    per_metric["eva"].append(float(run.evaluation_count))
                    per_metric["acc"].append(acc)
                    per_metric["sen"].append(sen)
                    per_metric["pre"].append(pre)
                    per_metric["spe"].append(spe)
            samples[method] = per_metric
        except Exception as exc:  # noqa: BLE001 - per-cell failure is reported
            failures[method] = f"{type(exc).__name__}: {exc}"

    cells = significance_matrix(samples)
    report = ComparisonReport(list(methods), samples, failures, cells)
    (out_dir / "comparison.txt").write_text(report.render_text())
    return report


# ---------------------------------------------------------------------------
# clamp sweep
# ---------------------------------------------------------------------------

def clamp_sweep(config: ExperimentConfig, candidate: np.ndarray,
                c_values: Sequence[float], out_dir: str | Path) -> list[dict]:
    """Re-evaluate one plastic candidate across clamp fractions.

    The candidate vector must belong to the configured (plastic) variant.
    Returns one row per c with the four confusion metrics.
    """
    if "P" not in config.variant:
        raise HarnessError("clamp sweep requires a plasticity-enabled variant")
    out_dir = Path(out_dir)
    _prepare_out_dir(out_dir)
    recording = obtain_recording(config)
    rows = []
    for c in c_values:
        params = params_from_vector(candidate, config.variant, clamp_c=float(c))
        net = build_network((config.stimulus.width, config.stimulus.height),
                            config.constants, params)
        result = run_simulation(net, recording, config.dt_us)
        report = evaluate(result, recording.labels, config.classifier, config.score)
        acc, sen, pre, spe = metrics(report.confusion)
        rows.append({"c": float(c), "acc": acc, "sen": sen, "pre": pre,
                     "spe": spe, "f_acc": report.fitness_acc})
    lines = ["c\tacc\tsen\tpre\tspe\tf_acc"]
    for row in rows:
        lines.append("\t".join(repr(row[k]) for k in ("c", "acc", "sen", "pre",
                                                      "spe", "f_acc")))
    (out_dir / "clamp_sweep.txt").write_text("\n".join(lines) + "\n")
    return rows


# ---------------------------------------------------------------------------
# plot-data export
# ---------------------------------------------------------------------------

def export_plots(run_dir: str | Path) -> tuple[list[Path], list[str]]:
    """Emit per-generation series and copy raster / weight data as plain
    columnar text. Returns (written files, absent series names)."""
    run_dir = Path(run_dir)
    record_path = run_dir / "optimizer_run.txt"
    if not record_path.exists():
        raise HarnessError(f"no optimizer record in {run_dir}")
    run = load_run(record_path)
    plot_dir = run_dir / "plot_data"
    plot_dir.mkdir(exist_ok=True)
    written: list[Path] = []
    missing: list[str] = []

    gens = [g for g in run.generations if g.generation >= 1]

    def series(name: str, header: str, rows: list[str]) -> None:
        path = plot_dir / name
        path.write_text("\n".join([header] + rows) + "\n" if rows else header + "\n")
        written.append(path)

    if gens:
        series("fitness_by_generation.txt", "# generation evaluations best mean",
               [f"{g.generation} {g.evaluations} {g.best_fitness!r} "
                f"{g.mean_fitness!r}" for g in gens])
    else:
        missing.append("fitness_by_generation")
    if gens and all(g.mean_f is not None for g in gens):
        series("mean_f_by_generation.txt", "# generation mean_f",
               [f"{g.generation} {g.mean_f!r}" for g in gens])
    else:
        missing.append("mean_f_by_generation")
    if gens and all(g.mean_cr is not None for g in gens):
        series("mean_cr_by_generation.txt", "# generation mean_cr",
               [f"{g.generation} {g.mean_cr!r}" for g in gens])
    else:
        missing.append("mean_cr_by_generation")
    if gens and all(g.strategy_probs is not None for g in gens):
        series("strategy_probabilities.txt", "# generation p_rand1 p_rand2 "
               "p_rand_to_best2 p_curr_to_rand1",
               [f"{g.generation} " + " ".join(repr(p) for p in g.strategy_probs)
                for g in gens])
    else:
        missing.append("strategy_probabilities")

    sim_dir = run_dir / "best_sim"
    if sim_dir.exists():
        for item in sorted(sim_dir.glob("spikes_*.txt")):
            dest = plot_dir / item.name
            shutil.copyfile(item, dest)
            written.append(dest)
        snaps = sim_dir / "weight_snapshots.txt"
        if snaps.exists():
            dest = plot_dir / snaps.name
            shutil.copyfile(snaps, dest)
            written.append(dest)
        else:
            missing.append("weight_snapshots")
    else:
        missing.append("layer_rasters")
        missing.append("weight_snapshots")
    return written, missing
