import math

import numpy as np
import pytest

from lgmdopt.model import PlasticityParams
from lgmdopt.network import PlasticSynapseGroup


def replay_oracle(events, cfg: PlasticityParams):
    """Analytic event replay for a single synapse.

    `events` is a time-sorted list of (t_ms, kind) with kind 'pre'/'post';
    at equal times pre sorts before post. Traces decay exponentially between
    events; weight moves by the opposite trace and clamps immediately.
    Returns the weight trajectory after each event.
    """
    a_pre = a_post = 0.0
    w = 1.0
    last = 0.0
    lo, hi = 1.0 - cfg.clamp_c, 1.0 + cfg.clamp_c
    traj = []
    for t, kind in events:
        a_pre *= math.exp(-(t - last) / cfg.tau_pre_ms)
        a_post *= math.exp(-(t - last) / cfg.tau_post_ms)
        last = t
        if kind == "pre":
            a_pre += cfg.delta_pre
            w = min(max(w + a_post, lo), hi)
        else:
            a_post += cfg.delta_post
            w = min(max(w + a_pre, lo), hi)
        traj.append(w)
    return traj


def drive_group(events, cfg: PlasticityParams):
    group = PlasticSynapseGroup(1, cfg)
    traj = []
    for t, kind in events:
        if kind == "pre":
            group.on_pre(np.array([0]), t)
        else:
            group.on_post(t)
        traj.append(float(group.w[0]))
    return traj


def random_sequence(rng, n_events):
    times = np.sort(rng.uniform(0.0, 50.0, n_events))
    kinds = rng.choice(["pre", "post"], n_events)
    ev = sorted(zip(times, kinds), key=lambda e: (e[0], e[1] != "pre"))
    return ev


def test_single_pair_matches_closed_form():
    cfg = PlasticityParams(tau_pre_ms=10.0, tau_post_ms=10.0,
                           delta_pre=0.05, delta_post=-0.05, clamp_c=0.5)
    events = [(0.0, "pre"), (5.0, "post")]
    traj = drive_group(events, cfg)
    assert traj[0] == pytest.approx(1.0)  # a_post was zero at the pre event
    assert traj[1] == pytest.approx(1.0 + 0.05 * math.exp(-0.5), rel=1e-12)


def test_sign_convention_pre_before_post_potentiates():
    up = PlasticityParams(10.0, 10.0, 0.05, -0.05, 0.5)
    down = PlasticityParams(10.0, 10.0, -0.05, 0.05, 0.5)
    events = [(0.0, "pre"), (5.0, "post")]
    assert drive_group(events, up)[-1] > 1.0
    assert drive_group(events, down)[-1] < 1.0


def test_zero_clamp_pins_weight():
    cfg = PlasticityParams(10.0, 10.0, 0.05, 0.05, clamp_c=0.0)
    rng = np.random.default_rng(0)
    traj = drive_group(random_sequence(rng, 30), cfg)
    assert all(w == 1.0 for w in traj)


def test_isolated_pre_spike_leaves_weight():
    cfg = PlasticityParams(10.0, 10.0, 0.05, 0.05, clamp_c=0.5)
    traj = drive_group([(3.0, "pre")], cfg)
    assert traj[0] == pytest.approx(1.0)


def test_oracle_equivalence_random_sequences():
    rng = np.random.default_rng(42)
    for trial in range(50):
        cfg = PlasticityParams(
            tau_pre_ms=rng.uniform(1.0, 25.0),
            tau_post_ms=rng.uniform(1.0, 25.0),
            delta_pre=rng.uniform(-0.05, 0.05),
            delta_post=rng.uniform(-0.05, 0.05),
            clamp_c=rng.uniform(0.0, 1.0))
        events = random_sequence(rng, int(rng.integers(1, 21)))
        got = drive_group(events, cfg)
        want = replay_oracle(events, cfg)
        np.testing.assert_allclose(got, want, rtol=1e-9)
        lo, hi = 1.0 - cfg.clamp_c, 1.0 + cfg.clamp_c
        assert all(lo <= w <= hi for w in got)


def test_traces_shared_per_post_neuron():
    # multi-synapse group: post spike moves every weight by its own pre trace
    cfg = PlasticityParams(10.0, 10.0, 0.05, 0.02, clamp_c=0.5)
    group = PlasticSynapseGroup(3, cfg)
    group.on_pre(np.array([0]), 1.0)
    group.on_pre(np.array([1]), 6.0)
    group.on_post(6.0)
    w = group.w
    assert w[0] == pytest.approx(1.0 + 0.05 * math.exp(-0.5), rel=1e-12)
    assert w[1] == pytest.approx(1.0 + 0.05, rel=1e-12)
    assert w[2] == pytest.approx(1.0)
