"""Fitness of a simulation against ground-truth labels.

Classification: one decision per label interval; the interval is called
looming when the maximum spike count in any rate window inside it strictly
exceeds the threshold SL. Window bounds are closed (a spike exactly at
t + window counts).

Fitness combines a timing score (reward for spikes during looming, ramped
punishment for spikes during non-looming), the negated squared error of the
output trace against an ideal two-level signal, and an accuracy gate.
None of the constants below come from published values; they are recorded
in every run artifact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .events import LabelInterval
from .simulate import SimulationResult

US_PER_MS = 1000


@dataclass(frozen=True)
class ClassifierConfig:
    sl_spikes: int = 4
    window_ms: float = 50.0

    def __post_init__(self) -> None:
        if self.sl_spikes <= 0 or self.window_ms <= 0:
            raise ValueError("SL and window must be positive")


@dataclass(frozen=True)
class ScoreConstants:
    """k: reward gain; l/c punishment ramp peak and base; reward_decay flips
    the reward exponent to exp(-t/dt); v_spk / v_rest define the ideal
    trace (mV)."""

    k: float = 1.0
    l: float = 10.0
    c: float = 1.0
    v_spk_mv: float = 0.0
    v_rest_mv: float = -73.12
    reward_decay: bool = False

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError("k must be > 0")
        if not self.l >= self.c >= 0:
            raise ValueError("require l >= c >= 0")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class FitnessReport:
    score: float
    sseos: float
    fitness: float
    accuracy: float
    fitness_acc: float
    confusion: ConfusionCounts

    def to_record(self) -> str:
        """Flat key-value text record."""
        lines = [
            f"score = {self.score!r}",
            f"sseos = {self.sseos!r}",
            f"fitness = {self.fitness!r}",
            f"accuracy = {self.accuracy!r}",
            f"fitness_acc = {self.fitness_acc!r}",
            f"tp = {self.confusion.tp}",
            f"tn = {self.confusion.tn}",
            f"fp = {self.confusion.fp}",
            f"fn = {self.confusion.fn}",
        ]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_record(text: str) -> "FitnessReport":
        vals: dict[str, float] = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, raw = line.partition("=")
            vals[key.strip()] = float(raw.strip())
        return FitnessReport(
            score=vals["score"], sseos=vals["sseos"], fitness=vals["fitness"],
            accuracy=vals["accuracy"], fitness_acc=vals["fitness_acc"],
            confusion=ConfusionCounts(int(vals["tp"]), int(vals["tn"]),
                                      int(vals["fp"]), int(vals["fn"])))


def spike_rate(spike_times_us: np.ndarray, t_us: int, window_ms: float) -> int:
    """Spike count in the closed window [t, t + window]."""
    if window_ms <= 0:
        raise ValueError("window must be > 0")
    hi = t_us + window_ms * US_PER_MS
    return int(np.count_nonzero((spike_times_us >= t_us) & (spike_times_us <= hi)))


def max_windowed_rate(spike_times_us: np.ndarray, start_us: int, end_us: int,
                      window_ms: float) -> int:
    """Maximum closed-window spike count anchored inside [start, end)."""
    inside = spike_times_us[(spike_times_us >= start_us) & (spike_times_us < end_us)]
    if inside.size == 0:
        return 0
    win = window_ms * US_PER_MS
    best = 0
    j = 0
    for i in range(inside.size):
        while inside[i] - inside[j] > win:
            j += 1
        best = max(best, i - j + 1)
    return best


def classify(result: SimulationResult, labels: Sequence[LabelInterval],
             config: ClassifierConfig) -> list[bool]:
    """Predicted looming per label interval: max windowed rate > SL."""
    spikes = result.spike_times_us("LGMD")
    return [
        max_windowed_rate(spikes, lab.start_us, lab.end_us, config.window_ms)
        > config.sl_spikes
        for lab in labels
    ]


def confusion(predicted: Sequence[bool], labels: Sequence[LabelInterval]) -> ConfusionCounts:
    if len(predicted) != len(labels):
        raise ValueError(f"{len(predicted)} predictions for {len(labels)} intervals")
    tp = tn = fp = fn = 0
    for pred, lab in zip(predicted, labels):
        if lab.is_looming:
            if pred:
                tp += 1
            else:
                fn += 1
        else:
            if pred:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, tn, fp, fn)


def metrics(counts: ConfusionCounts) -> tuple[float, float, float, float]:
    """(accuracy, sensitivity, precision, specificity); a ratio with zero
    denominator is defined as 1.0."""

    def ratio(num: int, den: int) -> float:
        return num / den if den else 1.0

    acc = ratio(counts.tp + counts.tn, counts.total)
    sen = ratio(counts.tp, counts.tp + counts.fn)
    pre = ratio(counts.tp, counts.tp + counts.fp)
    spe = ratio(counts.tn, counts.tn + counts.fp)
    return acc, sen, pre, spe


def reward_at(t_in_interval_us: float, interval_us: float, constants: ScoreConstants) -> float:
    """Reward for a spike during looming, t measured from interval start."""
    ratio = t_in_interval_us / interval_us
    if constants.reward_decay:
        ratio = -ratio
    return constants.k * float(np.exp(ratio)) + 1.0


def punishment_at(t_in_interval_us: float, interval_us: float,
                  constants: ScoreConstants) -> float:
    """Two-segment ramp for a spike during non-looming: c at the interval
    edges, peak l at the midpoint, continuous there."""
    half = interval_us / 2.0
    span = constants.l - constants.c
    if t_in_interval_us <= half:
        return span * (t_in_interval_us / half) + constants.c
    return span * ((interval_us - t_in_interval_us) / half) + constants.c


def score(result: SimulationResult, labels: Sequence[LabelInterval],
          constants: ScoreConstants) -> float:
    """Sum of rewards minus sum of punishments over all output spikes."""
    spikes = result.spike_times_us("LGMD")
    total = 0.0
    for lab in labels:
        inside = spikes[(spikes >= lab.start_us) & (spikes < lab.end_us)]
        if inside.size == 0:
            continue
        dt = float(lab.length_us)
        for t in inside:
            t_rel = float(t - lab.start_us)
            if lab.is_looming:
                total += reward_at(t_rel, dt, constants)
            else:
                total -= punishment_at(t_rel, dt, constants)
    return total


def sseos(result: SimulationResult, labels: Sequence[LabelInterval],
          constants: ScoreConstants) -> float:
    """Negated sum of squared errors of the output signal.

    Samples where the simulator recorded an output spike are first replaced
    by the normalised spike value; the ideal signal is v_spk during looming
    and the resting value otherwise. Always <= 0.
    """
    trace = result.lgmd_trace_mv.copy()
    spike_steps = result.spike_steps["LGMD"]
    if spike_steps.size:
        trace[spike_steps] = constants.v_spk_mv
    ideal = np.full_like(trace, constants.v_rest_mv)
    for lab in labels:
        if lab.is_looming:
            lo = lab.start_us // result.dt_us
            hi = -(-lab.end_us // result.dt_us)
            ideal[lo:hi] = constants.v_spk_mv
    err = trace - ideal
    return -float(np.dot(err, err))


def f_acc(fitness: float, accuracy: float) -> float:
    """Accuracy-gated fitness, the four-case piecewise rule."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must lie in [0, 1]")
    if fitness > 0 and accuracy == 1.0:
        return 2.0 * fitness
    if fitness > 0:
        return accuracy * fitness
    if accuracy == 1.0 and fitness < 0:
        return 0.0
    return fitness


def evaluate(result: SimulationResult, labels: Sequence[LabelInterval],
             classifier: ClassifierConfig = ClassifierConfig(),
             constants: ScoreConstants = ScoreConstants()) -> FitnessReport:
    """Full pipeline: classify, count, score, and gate."""
    predicted = classify(result, labels, classifier)
    counts = confusion(predicted, labels)
    acc, _, _, _ = metrics(counts)
    s = score(result, labels, constants)
    e = sseos(result, labels, constants)
    fit = (s + e) / 2.0
    return FitnessReport(score=s, sseos=e, fitness=fit, accuracy=acc,
                         fitness_acc=f_acc(fit, acc), confusion=counts)
