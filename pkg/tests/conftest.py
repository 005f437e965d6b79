"""Shared fixtures and brute-force oracles."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from aoisched.kernel import joint_channel_probs
from aoisched.model import (
    ChannelModel,
    DeviceKind,
    DeviceSpec,
    State,
    SystemConfig,
    action_cost,
    device_aoi_successors,
    enumerate_actions,
    enumerate_states,
    next_dest_aoi,
)


def type1(tx, probs=None, lam=0.5, cap=4, weight=1.0, values=None):
    probs = probs or (1.0 / len(tx),) * len(tx)
    values = values or tuple(float(k + 1) for k in range(len(tx)))
    return DeviceSpec(DeviceKind.TYPE_I, tuple(tx), ChannelModel(values, probs), weight, arrival_rate=lam, aoi_cap=cap)


def type2(tx, cs=1.0, probs=None, weight=1.0, values=None):
    probs = probs or (1.0 / len(tx),) * len(tx)
    values = values or tuple(float(k + 1) for k in range(len(tx)))
    return DeviceSpec(DeviceKind.TYPE_II, tuple(tx), ChannelModel(values, probs), weight, sampling_cost=cs)


def naive_q(cfg: SystemConfig, v: np.ndarray) -> np.ndarray:
    """Q(s, u) by enumerating every joint successor (A', h') of every state and action."""
    space = enumerate_states(cfg)
    actions = enumerate_actions(cfg)
    ph = joint_channel_probs(cfg)
    chans = [tuple(c) for c in itertools.product(*[range(len(d.channel)) for d in cfg.devices])]
    n2 = cfg.n_devices - cfg.n_type1
    q = np.empty((space.size, len(actions)))
    for i in range(space.size):
        s = space.state_of_index(i)
        branches = [device_aoi_successors(d, s.device_aoi[n]) for n, d in enumerate(cfg.type1)]
        for u, a in enumerate(actions):
            d_next = next_dest_aoi(cfg, s, a)
            total = 0.0
            for combo in itertools.product(*branches):
                pa = float(np.prod([p for _, p in combo]))
                ages = tuple(t for t, _ in combo) + (0,) * n2
                # channel vectors are the last, contiguous block of the encoding
                start = space.flat_index(State(ages, d_next, chans[0]))
                total += pa * float(ph @ v[start : start + len(chans)])
            q[i, u] = s.dest_aoi + action_cost(cfg, a, s) + total
    return q


def policy_average_cost(cfg: SystemConfig, table: np.ndarray) -> float:
    """Long-run average cost of a stationary table policy via the full joint transition matrix."""
    space = enumerate_states(cfg)
    actions = enumerate_actions(cfg)
    ph = joint_channel_probs(cfg)
    chans = [tuple(c) for c in itertools.product(*[range(len(d.channel)) for d in cfg.devices])]
    n2 = cfg.n_devices - cfg.n_type1
    P = np.zeros((space.size, space.size))
    c = np.empty(space.size)
    for i in range(space.size):
        s = space.state_of_index(i)
        a = actions[int(table[i])]
        c[i] = s.dest_aoi + action_cost(cfg, a, s)
        d_next = next_dest_aoi(cfg, s, a)
        branches = [device_aoi_successors(d, s.device_aoi[n]) for n, d in enumerate(cfg.type1)]
        for combo in itertools.product(*branches):
            pa = float(np.prod([p for _, p in combo]))
            ages = tuple(t for t, _ in combo) + (0,) * n2
            for k, h in enumerate(chans):
                P[i, space.flat_index(State(ages, d_next, h))] += pa * ph[k]
    # The lazy chain (I + P) / 2 shares P's Cesaro limit but is aperiodic, so its
    # powers converge; repeated squaring reaches that limit to machine precision.
    lazy = 0.5 * (np.eye(space.size) + P)
    for _ in range(40):
        lazy = lazy @ lazy
        lazy /= lazy.sum(axis=1, keepdims=True)  # stop rounding drift from compounding
    start = space.flat_index(State((1,) * cfg.n_type1 + (0,) * n2, 1, (0,) * cfg.n_devices))
    return float(lazy[start] @ c)


@pytest.fixture
def small_cfg() -> SystemConfig:
    """One type-I and two type-II devices, non-uniform channel probabilities."""
    return SystemConfig(
        (
            type1((2.0, 1.2), probs=(0.3, 0.7), lam=0.4, cap=3),
            type2((1.5, 1.0, 0.6), cs=0.5, probs=(0.2, 0.5, 0.3), weight=0.7),
            type2((2.2, 0.9), cs=0.8, probs=(0.6, 0.4), weight=1.3),
        ),
        m_required=2,
        dest_aoi_cap=4,
    )
