"""Network topology for the looming-detector graph.

Layers: P (photoreceptor grid) -> S (summing grid) via a 3x3 kernel with a
center excitatory tap, fast (A) inhibition from the 4-neighbours and slow (B)
inhibition from the diagonals; P -> IP and S -> IS global sum-pooling onto
single neurons; IS -> LGMD excitatory and IP -> LGMD fast-inhibitory.

When plasticity is enabled the P->IP, IP->LGMD and IS->LGMD groups carry
per-synapse weights with pre/post traces; all other weights are fixed at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    Hyperparams,
    NeuronConstants,
    ParameterError,
    PlasticityParams,
    check_within_bounds,
)

LAYERS = ("P", "S", "IP", "IS", "LGMD")

KIND_EXC = "excitatory"
KIND_INH_A = "inhibitory-A"
KIND_INH_B = "inhibitory-B"


@dataclass(frozen=True)
class SynapseGroupSpec:
    source: str
    target: str
    kind: str
    q_pa: float
    plastic: bool


class PlasticSynapseGroup:
    """Weights and pre/post traces for one plastic connection group.

    Traces decay exactly (analytic exponential) between events; weight
    changes are clamped to [1-c, 1+c] immediately. Where pre and post
    events share a timestamp, pre updates are applied first.
    """

    def __init__(self, n_synapses: int, cfg: PlasticityParams):
        self.cfg = cfg
        self.w = np.ones(n_synapses)
        self.a_pre = np.zeros(n_synapses)
        self.a_post = np.zeros(n_synapses)
        self.last_ms = 0.0
        self.w_lo = 1.0 - cfg.clamp_c
        self.w_hi = 1.0 + cfg.clamp_c

    def _decay_to(self, t_ms: float) -> None:
        dt = t_ms - self.last_ms
        if dt > 0.0:
            self.a_pre *= math.exp(-dt / self.cfg.tau_pre_ms)
            self.a_post *= math.exp(-dt / self.cfg.tau_post_ms)
            self.last_ms = t_ms

    def on_pre(self, idx: np.ndarray, t_ms: float) -> None:
        """Pre-synaptic spikes at synapse indices `idx`."""
        self._decay_to(t_ms)
        self.a_pre[idx] += self.cfg.delta_pre
        self.w[idx] = np.clip(self.w[idx] + self.a_post[idx], self.w_lo, self.w_hi)

    def on_post(self, t_ms: float) -> None:
        """Post-synaptic spike; every synapse of the group shares the post."""
        self._decay_to(t_ms)
        self.a_post += self.cfg.delta_post
        np.clip(self.w + self.a_pre, self.w_lo, self.w_hi, out=self.w)


class Network:
    """Built network: fixed topology tables plus per-run mutable state.

    A Network instance is a single-threaded state machine during simulation;
    run distinct instances for concurrent evaluations.
    """

    def __init__(self, width: int, height: int, constants: NeuronConstants,
                 params: Hyperparams, adaptation: bool, plasticity: bool):
        self.width = width
        self.height = height
        self.constants = constants
        self.params = params
        self.adaptation = adaptation
        self.plasticity = plasticity

        wh = width * height
        self.n_pixels = wh
        self.n_neurons = 2 * wh + 3
        self.idx_s0 = wh
        self.idx_ip = 2 * wh
        self.idx_is = 2 * wh + 1
        self.idx_lgmd = 2 * wh + 2

        self.neigh4, self.neigh_diag = _neighbour_tables(width, height)

        p = params
        self.groups = [
            SynapseGroupSpec("P", "S", KIND_EXC, p.q_e_s, False),
            SynapseGroupSpec("P", "S", KIND_INH_A, p.q_ia_s, False),
            SynapseGroupSpec("P", "S", KIND_INH_B, p.q_ib_s, False),
            SynapseGroupSpec("P", "IP", KIND_EXC, p.q_e_ip, plasticity),
            SynapseGroupSpec("S", "IS", KIND_EXC, p.q_e_is, False),
            SynapseGroupSpec("IS", "LGMD", KIND_EXC, p.q_e_l, plasticity),
            SynapseGroupSpec("IP", "LGMD", KIND_INH_A, p.q_ia_l, plasticity),
        ]

        self.plastic_p_ip: Optional[PlasticSynapseGroup] = None
        self.plastic_ip_lgmd: Optional[PlasticSynapseGroup] = None
        self.plastic_is_lgmd: Optional[PlasticSynapseGroup] = None
        if plasticity:
            cfg = params.plasticity
            self.plastic_p_ip = PlasticSynapseGroup(wh, cfg)
            self.plastic_ip_lgmd = PlasticSynapseGroup(1, cfg)
            self.plastic_is_lgmd = PlasticSynapseGroup(1, cfg)

    def layer_slice(self, layer: str) -> slice:
        wh = self.n_pixels
        return {
            "P": slice(0, wh),
            "S": slice(wh, 2 * wh),
            "IP": slice(self.idx_ip, self.idx_ip + 1),
            "IS": slice(self.idx_is, self.idx_is + 1),
            "LGMD": slice(self.idx_lgmd, self.idx_lgmd + 1),
        }[layer]

    def s_kernel_inputs(self, x: int, y: int) -> dict[str, list[int]]:
        """Inbound P indices of the S neuron at (x, y), per connection kind."""
        i = y * self.width + x
        n4 = [int(j) for j in self.neigh4[i] if j >= 0]
        nd = [int(j) for j in self.neigh_diag[i] if j >= 0]
        return {KIND_EXC: [i], KIND_INH_A: n4, KIND_INH_B: nd}


def _neighbour_tables(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat-index tables of the 4-neighbours and diagonals; -1 off-grid."""
    wh = width * height
    yy, xx = np.divmod(np.arange(wh), width)

    def shifted(dx: int, dy: int) -> np.ndarray:
        x2, y2 = xx + dx, yy + dy
        ok = (x2 >= 0) & (x2 < width) & (y2 >= 0) & (y2 < height)
        return np.where(ok, y2 * width + x2, -1).astype(np.int64)

    n4 = np.stack([shifted(1, 0), shifted(-1, 0), shifted(0, 1), shifted(0, -1)], axis=1)
    nd = np.stack([shifted(1, 1), shifted(-1, 1), shifted(1, -1), shifted(-1, -1)], axis=1)
    return n4, nd


def build_network(
    resolution: tuple[int, int],
    constants: NeuronConstants = NeuronConstants(),
    params: Hyperparams = None,
    adaptation: Optional[bool] = None,
    plasticity: Optional[bool] = None,
    enforce_bounds: bool = False,
    variant: Optional[str] = None,
) -> Network:
    """Assemble the network for a resolution and parameter point.

    Feature flags default to the presence of the corresponding parameter
    block; pass explicit booleans to override. With enforce_bounds=True the
    parameters are validated against the search-space bounds of `variant`.
    """
    width, height = resolution
    if width < 3 or height < 3:
        raise ParameterError("resolution must be at least 3x3")
    if params is None:
        raise ParameterError("params is required")
    if adaptation is None:
        adaptation = params.adaptation is not None
    if plasticity is None:
        plasticity = params.plasticity is not None
    if adaptation and params.adaptation is None:
        raise ParameterError("adaptation enabled but no adaptation parameters")
    if plasticity and params.plasticity is None:
        raise ParameterError("plasticity enabled but no plasticity parameters")
    if enforce_bounds:
        if variant is None:
            variant = (("A" if adaptation else "") + ("P" if plasticity else "")) or "LGMD"
        check_within_bounds(params, variant)
    return Network(width, height, constants, params, adaptation, plasticity)
