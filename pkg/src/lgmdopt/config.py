"""Experiment configuration: flat key-value INI with one section per module.

Every default that stands in for an unpublished constant is marked
`# not from paper` in the template. Values echo back byte-identically when a
run directory persists its resolved configuration.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .events import StimulusSpec
from .model import NeuronConstants
from .objective import ClassifierConfig, ScoreConstants


class ConfigError(ValueError):
    pass


#: named stimuli; speeds are this artifact's choices, not published values
STIMULUS_PRESETS: dict[str, dict] = {
    "circle-fast": dict(shape="circle", trajectory="loom", speed_px_s=24.0,
                        gap_fraction=1.0, duration_s=2.0),
    "circle-slow": dict(shape="circle", trajectory="loom", speed_px_s=8.0,
                        gap_fraction=1.0 / 3.0, duration_s=4.0),
    "square-fast": dict(shape="square", trajectory="loom", speed_px_s=24.0,
                        gap_fraction=1.0, duration_s=2.0),
    "square-slow": dict(shape="square", trajectory="loom", speed_px_s=8.0,
                        gap_fraction=1.0 / 3.0, duration_s=4.0),
    "composite": dict(shape="circle", trajectory="composite", speed_px_s=24.0,
                      gap_fraction=1.0, duration_s=2.0),
}

DEFAULT_TEMPLATE = """\
[stimulus]
# preset: circle-fast | circle-slow | square-fast | square-slow | composite
# or leave empty and set recording_path to use a saved recording
preset = circle-fast
recording_path =
width = 32
height = 32
# empty duration: use the preset's default
duration_s =
frame_us = 100
contrast_threshold = 0.125   ; not from paper
noise_rate_hz = 0.0
stimulus_seed = 0

[network]
capacitance_pf = 124.2
leak_ns = 60.05
leak_reversal_mv = -73.12
threshold_mv = -3.98
slope_mv = 6.71
reset_mv = -73.12            ; not from paper
variant = LGMD               ; LGMD | A | P | AP
clamp_c = 0.05
dt_us = 100

[objective]
sl_spikes = 4                ; not from paper
window_ms = 50.0             ; not from paper
reward_k = 1.0               ; not from paper
punish_l = 10.0              ; not from paper
punish_c = 1.0               ; not from paper
v_spk_mv = 0.0               ; not from paper
v_rest_mv = -73.12
reward_decay = false         ; flips the reward exponent to exp(-t/dt)

[optimizer]
method = sade                ; de | sade | bo-pi | bo-ei | bo-ucb
budget = 2000
# empty np_size: ceil(10 * dim / 3); empty patience: 3 * np_size
np_size =
patience =
learning_period = 3
f_weight = 0.6607
cr = 0.9426
zeta = 0.01
nu = 1.0
delta = 0.1
# fixed UCB kappa; empty uses the schedule sqrt(nu * tau_t)
kappa = 2.576
# stop as soon as the best fitness reaches this value (empty: disabled)
target_fitness =

[experiment]
repeats = 1
master_seed = 1234
threads = 1
"""


@dataclass(frozen=True)
class StimulusSettings:
    preset: Optional[str] = "circle-fast"
    recording_path: Optional[str] = None
    width: int = 32
    height: int = 32
    duration_s: Optional[float] = None
    frame_us: int = 100
    contrast_threshold: float = 0.125
    noise_rate_hz: float = 0.0
    stimulus_seed: int = 0

    def resolved_duration_us(self) -> int:
        if self.duration_s is not None:
            return int(round(self.duration_s * 1_000_000))
        if self.preset is None:
            raise ConfigError("duration_s required without a preset")
        return int(round(STIMULUS_PRESETS[self.preset]["duration_s"] * 1_000_000))

    def to_spec(self) -> StimulusSpec:
        if self.preset is None:
            raise ConfigError("stimulus preset not set")
        if self.preset not in STIMULUS_PRESETS:
            raise ConfigError(
                f"unknown preset {self.preset!r}; choose from "
                f"{sorted(STIMULUS_PRESETS)}")
        p = STIMULUS_PRESETS[self.preset]
        return StimulusSpec(
            shape=p["shape"], trajectory=p["trajectory"],
            speed_px_s=p["speed_px_s"], gap_fraction=p["gap_fraction"],
            contrast_threshold=self.contrast_threshold,
            noise_rate_hz=self.noise_rate_hz)


@dataclass(frozen=True)
class OptimizerSettings:
    method: str = "sade"
    budget: int = 2000
    np_size: Optional[int] = None
    patience: Optional[int] = None
    learning_period: int = 3
    f_weight: float = 0.6607
    cr: float = 0.9426
    zeta: float = 0.01
    nu: float = 1.0
    delta: float = 0.1
    kappa: Optional[float] = 2.576
    target_fitness: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    stimulus: StimulusSettings = StimulusSettings()
    constants: NeuronConstants = NeuronConstants()
    variant: str = "LGMD"
    clamp_c: float = 0.05
    dt_us: int = 100
    classifier: ClassifierConfig = ClassifierConfig()
    score: ScoreConstants = ScoreConstants()
    optimizer: OptimizerSettings = OptimizerSettings()
    repeats: int = 1
    master_seed: int = 1234
    threads: int = 1


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def load_config(path: Optional[str | Path] = None) -> ExperimentConfig:
    """Parse an INI file; missing keys fall back to defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read_string(DEFAULT_TEMPLATE)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        read = parser.read(path)
        if not read:
            raise ConfigError(f"could not parse config file {path}")

    stim = StimulusSettings(
        preset=_get(parser, "stimulus", "preset", str, None),
        recording_path=_get(parser, "stimulus", "recording_path", str, None),
        width=_get(parser, "stimulus", "width", int, 32),
        height=_get(parser, "stimulus", "height", int, 32),
        duration_s=_get(parser, "stimulus", "duration_s", float, None),
        frame_us=_get(parser, "stimulus", "frame_us", int, 100),
        contrast_threshold=_get(parser, "stimulus", "contrast_threshold", float, 0.125),
        noise_rate_hz=_get(parser, "stimulus", "noise_rate_hz", float, 0.0),
        stimulus_seed=_get(parser, "stimulus", "stimulus_seed", int, 0))
    constants = NeuronConstants(
        capacitance_pf=_get(parser, "network", "capacitance_pf", float, 124.2),
        leak_ns=_get(parser, "network", "leak_ns", float, 60.05),
        leak_reversal_mv=_get(parser, "network", "leak_reversal_mv", float, -73.12),
        threshold_mv=_get(parser, "network", "threshold_mv", float, -3.98),
        slope_mv=_get(parser, "network", "slope_mv", float, 6.71),
        reset_mv=_get(parser, "network", "reset_mv", float, -73.12))
    variant = _get(parser, "network", "variant", str, "LGMD")
    classifier = ClassifierConfig(
        sl_spikes=_get(parser, "objective", "sl_spikes", int, 4),
        window_ms=_get(parser, "objective", "window_ms", float, 50.0))
    score = ScoreConstants(
        k=_get(parser, "objective", "reward_k", float, 1.0),
        l=_get(parser, "objective", "punish_l", float, 10.0),
        c=_get(parser, "objective", "punish_c", float, 1.0),
        v_spk_mv=_get(parser, "objective", "v_spk_mv", float, 0.0),
        v_rest_mv=_get(parser, "objective", "v_rest_mv", float, -73.12),
        reward_decay=_get(parser, "objective", "reward_decay", bool, False))
    optimizer = OptimizerSettings(
        method=_get(parser, "optimizer", "method", str, "sade"),
        budget=_get(parser, "optimizer", "budget", int, 2000),
        np_size=_get(parser, "optimizer", "np_size", int, None),
        patience=_get(parser, "optimizer", "patience", int, None),
        learning_period=_get(parser, "optimizer", "learning_period", int, 3),
        f_weight=_get(parser, "optimizer", "f_weight", float, 0.6607),
        cr=_get(parser, "optimizer", "cr", float, 0.9426),
        zeta=_get(parser, "optimizer", "zeta", float, 0.01),
        nu=_get(parser, "optimizer", "nu", float, 1.0),
        delta=_get(parser, "optimizer", "delta", float, 0.1),
        kappa=_get(parser, "optimizer", "kappa", float, None),
        target_fitness=_get(parser, "optimizer", "target_fitness", float, None))
    return ExperimentConfig(
        stimulus=stim, constants=constants, variant=variant,
        clamp_c=_get(parser, "network", "clamp_c", float, 0.05),
        dt_us=_get(parser, "network", "dt_us", int, 100),
        classifier=classifier, score=score, optimizer=optimizer,
        repeats=_get(parser, "experiment", "repeats", int, 1),
        master_seed=_get(parser, "experiment", "master_seed", int, 1234),
        threads=_get(parser, "experiment", "threads", int, 1))


def write_template(path: str | Path) -> None:
    Path(path).write_text(DEFAULT_TEMPLATE)


def dump_config(config: ExperimentConfig) -> str:
    """Serialize the resolved configuration (deterministic text)."""
    s = config.stimulus
    o = config.optimizer
    c = config.constants
    sc = config.score
    lines = [
        "[stimulus]",
        f"preset = {s.preset or ''}",
        f"recording_path = {s.recording_path or ''}",
        f"width = {s.width}",
        f"height = {s.height}",
        f"duration_s = {'' if s.duration_s is None else repr(s.duration_s)}",
        f"frame_us = {s.frame_us}",
        f"contrast_threshold = {s.contrast_threshold!r}",
        f"noise_rate_hz = {s.noise_rate_hz!r}",
        f"stimulus_seed = {s.stimulus_seed}",
        "",
        "[network]",
        f"capacitance_pf = {c.capacitance_pf!r}",
        f"leak_ns = {c.leak_ns!r}",
        f"leak_reversal_mv = {c.leak_reversal_mv!r}",
        f"threshold_mv = {c.threshold_mv!r}",
        f"slope_mv = {c.slope_mv!r}",
        f"reset_mv = {c.reset_mv!r}",
        f"variant = {config.variant}",
        f"clamp_c = {config.clamp_c!r}",
        f"dt_us = {config.dt_us}",
        "",
        "[objective]",
        f"sl_spikes = {config.classifier.sl_spikes}",
        f"window_ms = {config.classifier.window_ms!r}",
        f"reward_k = {sc.k!r}",
        f"punish_l = {sc.l!r}",
        f"punish_c = {sc.c!r}",
        f"v_spk_mv = {sc.v_spk_mv!r}",
        f"v_rest_mv = {sc.v_rest_mv!r}",
        f"reward_decay = {str(sc.reward_decay).lower()}",
        "",
        "[optimizer]",
        f"method = {o.method}",
        f"budget = {o.budget}",
        f"np_size = {'' if o.np_size is None else o.np_size}",
        f"patience = {'' if o.patience is None else o.patience}",
        f"learning_period = {o.learning_period}",
        f"f_weight = {o.f_weight!r}",
        f"cr = {o.cr!r}",
        f"zeta = {o.zeta!r}",
        f"nu = {o.nu!r}",
        f"delta = {o.delta!r}",
        f"kappa = {'' if o.kappa is None else repr(o.kappa)}",
        f"target_fitness = {'' if o.target_fitness is None else repr(o.target_fitness)}",
        "",
        "[experiment]",
        f"repeats = {config.repeats}",
        f"master_seed = {config.master_seed}",
        f"threads = {config.threads}",
    ]
    return "\n".join(lines) + "\n"
