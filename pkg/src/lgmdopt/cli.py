"""Command-line front end.

Exit codes: 0 success, 2 configuration / input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    STIMULUS_PRESETS,
    load_config,
)
from .events import (
    InvalidStimulusError,
    RecordingError,
    StimulusSpec,
    generate_stimulus,
    load_recording,
    save_recording,
)
from .harness import (
    HarnessError,
    clamp_sweep,
    compare_optimizers,
    export_plots,
    obtain_recording,
    run_experiment,
)
from .model import ParameterError, params_from_vector
from .network import build_network
from .objective import evaluate, metrics
from .optimizers import OptimizerError
from .simulate import (
    SimulationDiverged,
    run as run_simulation,
    save_snapshots,
    save_spike_trains,
    save_trace,
)

CONFIG_ERRORS = (ConfigError, ParameterError, InvalidStimulusError,
                 RecordingError, HarnessError, FileNotFoundError, ValueError)
RUNTIME_ERRORS = (SimulationDiverged, OptimizerError)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", required=True, help="output path")
    parser.add_argument("--threads", type=int, help="parallel evaluation workers")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if getattr(args, "threads", None):
        config = replace(config, threads=args.threads)
    return config


def _cmd_gen_stimulus(args) -> int:
    if args.preset:
        if args.preset not in STIMULUS_PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}")
        p = STIMULUS_PRESETS[args.preset]
        spec = StimulusSpec(shape=p["shape"], trajectory=p["trajectory"],
                            speed_px_s=args.speed or p["speed_px_s"],
                            gap_fraction=p["gap_fraction"],
                            contrast_threshold=args.contrast,
                            noise_rate_hz=args.noise_rate)
        duration_s = args.duration or p["duration_s"]
    else:
        spec = StimulusSpec(shape=args.shape, trajectory=args.trajectory,
                            speed_px_s=args.speed or 24.0,
                            contrast_threshold=args.contrast,
                            noise_rate_hz=args.noise_rate)
        if not args.duration:
            raise ConfigError("--duration is required without --preset")
        duration_s = args.duration
    rec = generate_stimulus(spec, (args.width, args.height),
                            int(round(duration_s * 1_000_000)),
                            frame_us=args.frame_us, seed=args.seed)
    save_recording(rec, args.out)
    print(f"wrote {rec.num_events} events, {len(rec.labels)} label intervals "
          f"-> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    config = _load(args)
    if args.recording:
        recording = load_recording(args.recording)
    else:
        recording = obtain_recording(config)
    vector = np.array([float(v) for v in
                       Path(args.params).read_text().split()])
    params = params_from_vector(vector, config.variant, config.clamp_c)
    net = build_network(recording.resolution, config.constants, params)
    result = run_simulation(net, recording, config.dt_us)
    report = evaluate(result, recording.labels, config.classifier, config.score)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "fitness.txt").write_text(report.to_record())
    save_spike_trains(result, out)
    save_trace(result, out / "lgmd_trace.f64")
    if net.plasticity:
        save_snapshots(result, out / "weight_snapshots.txt", net.width)
    acc, sen, pre, spe = metrics(report.confusion)
    print(f"F_acc={report.fitness_acc:.6g} acc={acc:.3f} sen={sen:.3f} "
          f"pre={pre:.3f} spe={spe:.3f}")
    return 0


def _cmd_optimize(args) -> int:
    config = _load(args)
    out = run_experiment(config, args.out)
    print(f"experiment complete -> {out}")
    return 0


def _cmd_compare(args) -> int:
    config = _load(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    report = compare_optimizers(config, methods, args.out, repeats=args.repeats)
    sys.stdout.write(report.render_text())
    if report.failures:
        print(f"warning: {len(report.failures)} method(s) failed; "
              "their cells are unavailable", file=sys.stderr)
    return 0


def _cmd_clamp_sweep(args) -> int:
    config = _load(args)
    candidate = np.array([float(v) for v in
                          Path(args.params).read_text().split()])
    c_values = [float(v) for v in args.c_values.split(",")]
    rows = clamp_sweep(config, candidate, c_values, args.out)
    for row in rows:
        print(f"c={row['c']:.3f} acc={row['acc']:.3f} sen={row['sen']:.3f} "
              f"pre={row['pre']:.3f} spe={row['spe']:.3f}")
    return 0


def _cmd_export_plots(args) -> int:
    written, missing = export_plots(args.run)
    for path in written:
        print(f"wrote {path}")
    if missing:
        print("warning: partial export, absent series: " + ", ".join(missing),
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lgmdopt",
        description="Looming-detector network simulation and optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-stimulus", help="synthesize a labeled event stream")
    g.add_argument("--preset", choices=sorted(STIMULUS_PRESETS))
    g.add_argument("--shape", default="circle", choices=["circle", "square"])
    g.add_argument("--trajectory", default="loom",
                   choices=["loom", "recede", "translate", "composite"])
    g.add_argument("--speed", type=float, help="pixels per second")
    g.add_argument("--duration", type=float, help="seconds")
    g.add_argument("--width", type=int, default=32)
    g.add_argument("--height", type=int, default=32)
    g.add_argument("--frame-us", type=int, default=100)
    g.add_argument("--contrast", type=float, default=0.125)
    g.add_argument("--noise-rate", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_stimulus)

    s = sub.add_parser("simulate", help="run one candidate through a recording")
    _add_common(s)
    s.add_argument("--recording", help="recording file (defaults to the "
                                       "configured stimulus)")
    s.add_argument("--params", required=True,
                   help="file with the hyper-parameter vector")
    s.set_defaults(func=_cmd_simulate)

    o = sub.add_parser("optimize", help="run a configured experiment")
    _add_common(o)
    o.set_defaults(func=_cmd_optimize)

    c = sub.add_parser("compare", help="statistical optimizer comparison")
    _add_common(c)
    c.add_argument("--methods", required=True,
                   help="comma-separated optimizer methods")
    c.add_argument("--repeats", type=int, default=None)
    c.set_defaults(func=_cmd_compare)

    k = sub.add_parser("clamp-sweep", help="accuracy vs plasticity clamp")
    _add_common(k)
    k.add_argument("--params", required=True,
                   help="file with the plastic-variant vector")
    k.add_argument("--c-values", required=True,
                   help="comma-separated clamp fractions")
    k.set_defaults(func=_cmd_clamp_sweep)

    e = sub.add_parser("export-plots", help="emit plot data from a run directory")
    e.add_argument("--run", required=True)
    e.set_defaults(func=_cmd_export_plots)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
