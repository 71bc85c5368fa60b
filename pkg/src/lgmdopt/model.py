"""Neuron constants, hyper-parameters, and the bounded search space.

Units: capacitance pF, conductance nS, potential mV, current pA, time ms.
With these units pA / pF integrates to mV / ms, so the simulator can step
in milliseconds without conversion factors.

The sub-threshold adaptation parameter `a` is dimensionless in the search
space; it multiplies (V - E_L) in mV and the product is read as pA
(scale factor 1 pA/mV).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ParameterError(ValueError):
    """A parameter violates its declared constraint; message lists fields."""


@dataclass(frozen=True)
class NeuronConstants:
    """Fixed AEIF constants shared by every neuron in the network.

    Defaults are the published constants for this model family. The reset
    potential is not published; it defaults to the leak reversal.
    """

    capacitance_pf: float = 124.2
    leak_ns: float = 60.05
    leak_reversal_mv: float = -73.12
    threshold_mv: float = -3.98
    slope_mv: float = 6.71
    reset_mv: float = -73.12

    def __post_init__(self) -> None:
        bad = []
        if self.capacitance_pf <= 0:
            bad.append("capacitance_pf must be > 0")
        if self.leak_ns <= 0:
            bad.append("leak_ns must be > 0")
        if self.slope_mv <= 0:
            bad.append("slope_mv must be > 0")
        if not self.reset_mv <= self.leak_reversal_mv < self.threshold_mv:
            bad.append("require reset_mv <= leak_reversal_mv < threshold_mv")
        if bad:
            raise ParameterError("; ".join(bad))


@dataclass(frozen=True)
class AdaptationParams:
    """Spike-frequency adaptation block: I_ad += b on spike, relaxes toward
    a*(V - E_L) with time constant tau_w_ms."""

    a: float
    b: float
    tau_w_ms: float

    def __post_init__(self) -> None:
        if self.tau_w_ms <= 0:
            raise ParameterError("tau_w_ms must be > 0")


@dataclass(frozen=True)
class PlasticityParams:
    """Trace-based plasticity block; weights are clamped to [1-c, 1+c]."""

    tau_pre_ms: float
    tau_post_ms: float
    delta_pre: float
    delta_post: float
    clamp_c: float = 0.05

    def __post_init__(self) -> None:
        bad = []
        if self.tau_pre_ms <= 0:
            bad.append("tau_pre_ms must be > 0")
        if self.tau_post_ms <= 0:
            bad.append("tau_post_ms must be > 0")
        if not 0.0 <= self.clamp_c <= 1.0:
            bad.append("clamp_c must lie in [0, 1]")
        if bad:
            raise ParameterError("; ".join(bad))


@dataclass(frozen=True)
class Hyperparams:
    """One point of the optimisation space.

    Current time constants are shared across layers; injection magnitudes are
    per target layer. Inhibitory injections are not free parameters: they are
    ratios of the excitatory injection of the same layer.
    """

    tau_e_ms: float
    tau_ia_ms: float
    tau_ib_ms: float
    q_e_p: float
    q_e_s: float
    q_e_ip: float
    q_e_is: float
    q_e_l: float
    inh_a_s: float
    inh_b_s: float
    inh_a_l: float
    adaptation: Optional[AdaptationParams] = None
    plasticity: Optional[PlasticityParams] = None

    def __post_init__(self) -> None:
        bad = [name for name in ("tau_e_ms", "tau_ia_ms", "tau_ib_ms")
               if getattr(self, name) <= 0]
        if bad:
            raise ParameterError(f"time constants must be > 0: {', '.join(bad)}")

    # derived inhibitory injections (ratio-bound)
    @property
    def q_ia_s(self) -> float:
        return self.inh_a_s * self.q_e_s

    @property
    def q_ib_s(self) -> float:
        return self.inh_b_s * self.q_e_s

    @property
    def q_ia_l(self) -> float:
        return self.inh_a_l * self.q_e_l


#: model variants: plain network, with adaptation, with plasticity, both
VARIANTS = ("LGMD", "A", "P", "AP")

#: search-space bounds per dimension, in canonical vector order
PARAM_BOUNDS: dict[str, tuple[float, float]] = {
    "tau_e_ms": (1.0, 10.0),
    "tau_ia_ms": (1.0, 20.0),
    "tau_ib_ms": (1.0, 25.0),
    "q_e_p": (1014.0, 1363.0),
    "q_e_s": (2000.0, 5000.0),
    "q_e_ip": (84.0, 230.0),
    "q_e_is": (119.0, 270.0),
    "q_e_l": (29.0, 472.0),
    "inh_a_s": (0.04, 1.22),
    "inh_b_s": (0.24, 1.5),
    "inh_a_l": (0.019, 1.3),
    "a": (1.0, 8.0),
    "b": (40.0, 141.0),
    "tau_w_ms": (1.0, 150.0),
    "tau_pre_ms": (1.0, 25.0),
    "tau_post_ms": (1.0, 25.0),
    "delta_pre": (1e-16, 0.05),
    "delta_post": (1e-16, 0.05),
}

_BASE_NAMES = list(PARAM_BOUNDS)[:11]
_ADAPT_NAMES = ["a", "b", "tau_w_ms"]
_PLAST_NAMES = ["tau_pre_ms", "tau_post_ms", "delta_pre", "delta_post"]


def variant_flags(variant: str) -> tuple[bool, bool]:
    """(adaptation, plasticity) feature flags of a model variant."""
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return ("A" in variant, "P" in variant)


def variant_param_names(variant: str) -> list[str]:
    """Vector dimension names, in canonical order, for a variant."""
    adapt, plast = variant_flags(variant)
    names = list(_BASE_NAMES)
    if adapt:
        names += _ADAPT_NAMES
    if plast:
        names += _PLAST_NAMES
    return names


def variant_dimensions(variant: str) -> int:
    return len(variant_param_names(variant))


def variant_bounds(variant: str) -> tuple[np.ndarray, np.ndarray]:
    """(lows, highs) arrays for the variant's search space."""
    names = variant_param_names(variant)
    lows = np.array([PARAM_BOUNDS[n][0] for n in names])
    highs = np.array([PARAM_BOUNDS[n][1] for n in names])
    return lows, highs


def params_from_vector(x: np.ndarray, variant: str = "LGMD",
                       clamp_c: float = 0.05) -> Hyperparams:
    """Decode an optimiser vector into Hyperparams for the given variant.

    The clamp fraction c is not part of the search space; it is supplied by
    configuration (default 0.05).
    """
    names = variant_param_names(variant)
    if len(x) != len(names):
        raise ParameterError(
            f"vector has {len(x)} dims, variant {variant} needs {len(names)}")
    vals = dict(zip(names, (float(v) for v in x)))
    adapt, plast = variant_flags(variant)
    adaptation = (AdaptationParams(vals["a"], vals["b"], vals["tau_w_ms"])
                  if adapt else None)
    plasticity = (PlasticityParams(vals["tau_pre_ms"], vals["tau_post_ms"],
                                   vals["delta_pre"], vals["delta_post"], clamp_c)
                  if plast else None)
    return Hyperparams(
        tau_e_ms=vals["tau_e_ms"], tau_ia_ms=vals["tau_ia_ms"],
        tau_ib_ms=vals["tau_ib_ms"], q_e_p=vals["q_e_p"], q_e_s=vals["q_e_s"],
        q_e_ip=vals["q_e_ip"], q_e_is=vals["q_e_is"], q_e_l=vals["q_e_l"],
        inh_a_s=vals["inh_a_s"], inh_b_s=vals["inh_b_s"], inh_a_l=vals["inh_a_l"],
        adaptation=adaptation, plasticity=plasticity)


def params_to_vector(params: Hyperparams, variant: str) -> np.ndarray:
    """Inverse of params_from_vector (clamp_c is dropped)."""
    adapt, plast = variant_flags(variant)
    vals = [params.tau_e_ms, params.tau_ia_ms, params.tau_ib_ms,
            params.q_e_p, params.q_e_s, params.q_e_ip, params.q_e_is,
            params.q_e_l, params.inh_a_s, params.inh_b_s, params.inh_a_l]
    if adapt:
        if params.adaptation is None:
            raise ParameterError(f"variant {variant} requires an adaptation block")
        vals += [params.adaptation.a, params.adaptation.b, params.adaptation.tau_w_ms]
    if plast:
        if params.plasticity is None:
            raise ParameterError(f"variant {variant} requires a plasticity block")
        p = params.plasticity
        vals += [p.tau_pre_ms, p.tau_post_ms, p.delta_pre, p.delta_post]
    return np.array(vals)


def check_within_bounds(params: Hyperparams, variant: str) -> None:
    """Raise ParameterError naming every field outside its bound."""
    names = variant_param_names(variant)
    x = params_to_vector(params, variant)
    offending = []
    for name, v in zip(names, x):
        lo, hi = PARAM_BOUNDS[name]
        if not lo <= v <= hi:
            offending.append(f"{name}={v:g} outside [{lo:g}, {hi:g}]")
    if offending:
        raise ParameterError("; ".join(offending))
