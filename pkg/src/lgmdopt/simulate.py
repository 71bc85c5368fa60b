"""Clock-driven simulation of the looming-detector network.

Forward Euler at a fixed timestep (100 us by default). Step order:

1. integrate every neuron (exponential argument clamped at +20),
2. detect spikes (V > threshold), reset V, bump adaptation current,
3. inject this step's input events into P,
4. propagate this step's spikes (weighted injections, then plasticity
   updates: pre events before post events),
5. decay synaptic currents multiplicatively; relax adaptation current.

The same membrane update drives a single neuron under a constant current
(`integrate_constant_drive`), which the fidelity tests compare against an
independent fine-step reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .events import EventRecording
from .network import LAYERS, Network

DEFAULT_DT_US = 100

#: clamp on (V - V_T)/Delta_T inside the exponential, prevents overflow
EXP_ARG_MAX = 20.0


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite neuron state after step {step}")
        self.step = step


@dataclass(frozen=True)
class WeightSnapshot:
    t_us: int
    w_p_ip: np.ndarray
    w_ip_lgmd: float
    w_is_lgmd: float


@dataclass
class SimulationResult:
    """Spike trains, the output-neuron membrane trace, weight snapshots."""

    dt_us: int
    duration_us: int
    spike_steps: dict[str, np.ndarray]  # per layer, step indices
    spike_ids: dict[str, np.ndarray]    # per layer, neuron indices within layer
    lgmd_trace_mv: np.ndarray
    snapshots: list[WeightSnapshot]

    def spike_times_us(self, layer: str) -> np.ndarray:
        return self.spike_steps[layer] * self.dt_us

    def spike_count(self, layer: str) -> int:
        return int(self.spike_steps[layer].shape[0])


def _membrane_update(v, i_total, scratch_a, scratch_b, dt_over_c, g_l, e_l,
                     v_t, g_l_delta_t, inv_delta_t):
    """In-place Euler update of V given the total input current."""
    np.subtract(v, v_t, out=scratch_a)
    scratch_a *= inv_delta_t
    np.minimum(scratch_a, EXP_ARG_MAX, out=scratch_a)
    np.exp(scratch_a, out=scratch_a)
    scratch_a *= g_l_delta_t
    np.subtract(e_l, v, out=scratch_b)
    scratch_b *= g_l
    scratch_a += scratch_b
    scratch_a += i_total
    scratch_a *= dt_over_c
    v += scratch_a


class Simulator:
    """Mutable simulation state; one instance per run, single-threaded."""

    def __init__(self, network: Network, dt_us: int = DEFAULT_DT_US):
        self.network = network
        self.dt_us = dt_us
        self.dt_ms = dt_us / 1000.0
        self.step_index = 0

        c = network.constants
        p = network.params
        n = network.n_neurons
        self.v = np.full(n, c.leak_reversal_mv)
        self.i_e = np.zeros(n)
        self.i_ia = np.zeros(n)
        self.i_ib = np.zeros(n)
        self.i_ad = np.zeros(n)
        self._i_tot = np.empty(n)
        self._scr_a = np.empty(n)
        self._scr_b = np.empty(n)

        self._dt_over_c = self.dt_ms / c.capacitance_pf
        self._g_l_delta_t = c.leak_ns * c.slope_mv
        self._inv_delta_t = 1.0 / c.slope_mv
        self._decay_e = 1.0 - self.dt_ms / p.tau_e_ms
        self._decay_a = 1.0 - self.dt_ms / p.tau_ia_ms
        self._decay_b = 1.0 - self.dt_ms / p.tau_ib_ms
        self._adapt = network.adaptation
        if self._adapt:
            self._ad_a = p.adaptation.a
            self._ad_b = p.adaptation.b
            self._ad_gain = self.dt_ms / p.adaptation.tau_w_ms

    def step(self, events_pix: np.ndarray) -> dict[str, np.ndarray]:
        """Advance one timestep; `events_pix` are the P-pixel flat indices of
        the input events falling in [now, now + dt). Returns the spiking
        neuron indices per layer (empty arrays when silent)."""
        net = self.network
        c = net.constants
        p = net.params
        wh = net.n_pixels
        s0 = net.idx_s0
        i_ip, i_is, i_lgmd = net.idx_ip, net.idx_is, net.idx_lgmd
        v, i_e, i_ia, i_ib, i_ad = self.v, self.i_e, self.i_ia, self.i_ib, self.i_ad

        # 1. integrate
        np.subtract(i_e, i_ia, out=self._i_tot)
        self._i_tot -= i_ib
        self._i_tot -= i_ad
        _membrane_update(v, self._i_tot, self._scr_a, self._scr_b,
                         self._dt_over_c, c.leak_ns, c.leak_reversal_mv,
                         c.threshold_mv, self._g_l_delta_t, self._inv_delta_t)
        self.lgmd_potential_mv = v[i_lgmd]
        # any inf/nan in V surfaces as a non-finite sum
        if not np.isfinite(v.sum()):
            raise SimulationDiverged(self.step_index)

        # 2. spikes: reset + spike-triggered adaptation
        fired = v > c.threshold_mv
        empty = np.empty(0, dtype=np.int64)
        out = {layer: empty for layer in LAYERS}
        any_fired = bool(fired.any())
        if any_fired:
            idx = np.nonzero(fired)[0]
            v[idx] = c.reset_mv
            if self._adapt:
                i_ad[idx] += self._ad_b

        # 3. input events
        if events_pix.size:
            np.add.at(i_e, events_pix, p.q_e_p)

        # 4. propagate spikes
        if any_fired:
            t_ms = self.step_index * self.dt_ms
            plastic = net.plasticity
            g_p_ip, g_ip_l, g_is_l = (net.plastic_p_ip, net.plastic_ip_lgmd,
                                      net.plastic_is_lgmd)
            p_idx = idx[idx < wh]
            s_idx = idx[(idx >= wh) & (idx < 2 * wh)] - s0
            ip_fired = bool(fired[i_ip])
            is_fired = bool(fired[i_is])
            lgmd_fired = bool(fired[i_lgmd])

            if p_idx.size:
                i_e[s0 + p_idx] += p.q_e_s
                t4 = net.neigh4[p_idx].ravel()
                t4 = t4[t4 >= 0]
                np.add.at(i_ia, s0 + t4, p.q_ia_s)
                td = net.neigh_diag[p_idx].ravel()
                td = td[td >= 0]
                np.add.at(i_ib, s0 + td, p.q_ib_s)
                if plastic:
                    i_e[i_ip] += p.q_e_ip * float(g_p_ip.w[p_idx].sum())
                else:
                    i_e[i_ip] += p.q_e_ip * p_idx.size
            if s_idx.size:
                i_e[i_is] += p.q_e_is * s_idx.size
            if is_fired:
                i_e[i_lgmd] += p.q_e_l * (float(g_is_l.w[0]) if plastic else 1.0)
            if ip_fired:
                i_ia[i_lgmd] += p.q_ia_l * (float(g_ip_l.w[0]) if plastic else 1.0)

            if plastic:
                # pre updates first, then post updates
                if p_idx.size:
                    g_p_ip.on_pre(p_idx, t_ms)
                if is_fired:
                    g_is_l.on_pre(np.array([0]), t_ms)
                if ip_fired:
                    g_ip_l.on_pre(np.array([0]), t_ms)
                    g_p_ip.on_post(t_ms)
                if lgmd_fired:
                    g_is_l.on_post(t_ms)
                    g_ip_l.on_post(t_ms)

            out["P"] = p_idx
            out["S"] = s_idx
            one = np.zeros(1, dtype=np.int64)
            if ip_fired:
                out["IP"] = one
            if is_fired:
                out["IS"] = one
            if lgmd_fired:
                out["LGMD"] = one

        # 5. decay currents; relax adaptation
        i_e *= self._decay_e
        i_ia *= self._decay_a
        i_ib *= self._decay_b
        if self._adapt:
            np.subtract(v, c.leak_reversal_mv, out=self._scr_a)
            self._scr_a *= self._ad_a
            self._scr_a -= i_ad
            self._scr_a *= self._ad_gain
            i_ad += self._scr_a

        self.step_index += 1
        return out


def run(network: Network, recording: EventRecording,
        dt_us: int = DEFAULT_DT_US) -> SimulationResult:
    """Simulate the full recording and collect results.

    Deterministic: identical (network, recording) pairs produce identical
    results. Weight snapshots are captured at every label-interval boundary
    when plasticity is enabled.
    """
    if recording.resolution != (network.width, network.height):
        raise ValueError(
            f"recording resolution {recording.resolution} != network "
            f"{(network.width, network.height)}")
    sim = Simulator(network, dt_us)
    n_steps = -(-recording.duration_us // dt_us)  # ceil

    ev_steps = recording.t_us // dt_us
    ev_pix = (recording.y.astype(np.int64) * network.width
              + recording.x.astype(np.int64))
    step_starts = np.searchsorted(ev_steps, np.arange(n_steps + 1))
    boundary_steps = {-(-lab.end_us // dt_us) for lab in recording.labels}

    trace = np.empty(n_steps)
    spike_steps: dict[str, list] = {layer: [] for layer in LAYERS}
    spike_ids: dict[str, list] = {layer: [] for layer in LAYERS}
    snapshots: list[WeightSnapshot] = []
    plastic = network.plasticity

    for step_index in range(n_steps):
        e0, e1 = step_starts[step_index], step_starts[step_index + 1]
        fired = sim.step(ev_pix[e0:e1])
        trace[step_index] = sim.lgmd_potential_mv
        for layer, ids in fired.items():
            if ids.size:
                spike_steps[layer].append(np.full(ids.size, step_index))
                spike_ids[layer].append(ids)
        if plastic and (step_index + 1) in boundary_steps:
            snapshots.append(WeightSnapshot(
                t_us=(step_index + 1) * dt_us,
                w_p_ip=network.plastic_p_ip.w.copy(),
                w_ip_lgmd=float(network.plastic_ip_lgmd.w[0]),
                w_is_lgmd=float(network.plastic_is_lgmd.w[0])))

    if not np.all(np.isfinite(sim.v)):
        raise SimulationDiverged(n_steps - 1)

    def collect(parts: list) -> np.ndarray:
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)

    return SimulationResult(
        dt_us=dt_us,
        duration_us=recording.duration_us,
        spike_steps={k: collect(vv) for k, vv in spike_steps.items()},
        spike_ids={k: collect(vv) for k, vv in spike_ids.items()},
        lgmd_trace_mv=trace,
        snapshots=snapshots)


def integrate_constant_drive(
    constants,
    i_e_pa: float,
    duration_ms: float,
    dt_ms: float = 0.1,
    adaptation=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Production Euler integrator for one neuron under a constant current.

    Returns (spike_times_ms, membrane_trace_mv). The membrane update is the
    same routine the network simulator uses; the trace records the
    pre-reset potential each step.
    """
    n_steps = int(round(duration_ms / dt_ms))
    v = np.array([constants.leak_reversal_mv])
    i_ad = np.array([0.0])
    i_drive = np.array([i_e_pa])
    i_tot = np.empty(1)
    scr_a = np.empty(1)
    scr_b = np.empty(1)
    dt_over_c = dt_ms / constants.capacitance_pf
    g_l_delta_t = constants.leak_ns * constants.slope_mv
    inv_delta_t = 1.0 / constants.slope_mv
    trace = np.empty(n_steps)
    spikes = []
    for k in range(n_steps):
        np.subtract(i_drive, i_ad, out=i_tot)
        _membrane_update(v, i_tot, scr_a, scr_b, dt_over_c, constants.leak_ns,
                         constants.leak_reversal_mv, constants.threshold_mv,
                         g_l_delta_t, inv_delta_t)
        trace[k] = v[0]
        if v[0] > constants.threshold_mv:
            spikes.append(k * dt_ms)
            v[0] = constants.reset_mv
            if adaptation is not None:
                i_ad[0] += adaptation.b
        if adaptation is not None:
            i_ad[0] += (dt_ms / adaptation.tau_w_ms) * (
                adaptation.a * (v[0] - constants.leak_reversal_mv) - i_ad[0])
    return np.asarray(spikes), trace


# ---------------------------------------------------------------------------
# Result export (plain text / binary, for external plotting)
# ---------------------------------------------------------------------------

def save_spike_trains(result: SimulationResult, directory: str | Path) -> list[Path]:
    """One file per layer, `t_us neuron_id` per line."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for layer in LAYERS:
        path = directory / f"spikes_{layer.lower()}.txt"
        steps = result.spike_steps[layer]
        ids = result.spike_ids[layer]
        with open(path, "w") as fh:
            for s, i in zip(steps, ids):
                fh.write(f"{int(s) * result.dt_us} {int(i)}\n")
        written.append(path)
    return written


def save_trace(result: SimulationResult, path: str | Path) -> Path:
    """Membrane trace as a flat binary array of float64 mV."""
    path = Path(path)
    result.lgmd_trace_mv.astype("<f8").tofile(path)
    return path


def save_snapshots(result: SimulationResult, path: str | Path, width: int) -> Path:
    """Weight snapshots as row-major text matrices, one block per snapshot."""
    path = Path(path)
    with open(path, "w") as fh:
        for snap in result.snapshots:
            fh.write(f"# t_us={snap.t_us} w_ip_lgmd={snap.w_ip_lgmd!r} "
                     f"w_is_lgmd={snap.w_is_lgmd!r}\n")
            grid = snap.w_p_ip.reshape(-1, width)
            for row in grid:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
    return path
