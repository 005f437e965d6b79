"""Threshold extraction and numerical checks of the policy structure.

Three properties of a solved instance are checked:

* the relative value function is non-decreasing in every type-I age and in
  the destination age, and non-increasing in every channel index;
* for every ``(A, h)`` slice the set of destination ages at which some
  transmit action is chosen is an up-set ``{phi, ..., cap}``;
* the smallest transmit threshold of a slice never rises when a single
  channel index improves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .kernel import FactoredKernel
from .model import State, StateSpace, SystemConfig, enumerate_actions, enumerate_states
from .solver import PolicyTable, ValueFunction, greedy_policy

SLACK = 1e-9


class MonotonicityViolation(NamedTuple):
    lower: int  # flat index of the state with the smaller coordinate
    upper: int
    coordinate: str
    direction: str  # "decreasing" where non-decreasing was required, or vice versa
    magnitude: float


class ClosureViolation(NamedTuple):
    aoi_idx: int
    channel_idx: int
    transmit_delta: int
    noop_delta: int  # larger destination age at which no transmission is chosen


class ChannelMonotonicityViolation(NamedTuple):
    aoi_idx: int
    channel_idx: int
    device: int
    threshold: float
    threshold_better_channel: float


@dataclass
class ThresholdMap:
    """``phi[a, h, u-1]``: smallest destination age at which ``u`` is chosen (inf if never)."""

    phi: np.ndarray

    @property
    def min_threshold(self) -> np.ndarray:
        """Smallest transmit threshold over all transmit actions, shape ``(n_aoi, n_channel)``."""
        if self.phi.shape[2] == 0:
            return np.full(self.phi.shape[:2], np.inf)
        return self.phi.min(axis=2)


@dataclass
class StructureReport:
    value_monotonicity_violations: list = field(default_factory=list)
    upward_closure_violations: list = field(default_factory=list)
    channel_monotonicity_violations: list = field(default_factory=list)
    threshold_consistency_violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not (
            self.value_monotonicity_violations
            or self.upward_closure_violations
            or self.channel_monotonicity_violations
            or self.threshold_consistency_violations
        )

    def counts(self) -> dict[str, int]:
        return {
            "value_monotonicity": len(self.value_monotonicity_violations),
            "upward_closure": len(self.upward_closure_violations),
            "channel_monotonicity": len(self.channel_monotonicity_violations),
            "threshold_consistency": len(self.threshold_consistency_violations),
        }


def _coordinate_names(cfg: SystemConfig) -> list[str]:
    return [f"A_{n}" for n in range(cfg.n_type1)] + ["delta"] + [f"h_{n}" for n in range(cfg.n_devices)]


def check_value_monotonicity(v: np.ndarray, cfg: SystemConfig, slack: float = SLACK) -> list[MonotonicityViolation]:
    space = enumerate_states(cfg)
    grid = np.asarray(v, dtype=float).reshape(space.radices)
    n_age_axes = cfg.n_type1 + 1
    found = []
    for axis, name in enumerate(_coordinate_names(cfg)):
        if space.radices[axis] < 2:
            continue
        step = np.diff(grid, axis=axis)
        if axis < n_age_axes:
            bad = step < -slack
            direction = "decreasing"
        else:
            bad = step > slack
            direction = "increasing"
        for cell in np.argwhere(bad):
            lower = int(np.ravel_multi_index(tuple(cell), space.radices))
            found.append(
                MonotonicityViolation(lower, lower + space.strides[axis], name, direction, float(abs(step[tuple(cell)])))
            )
    return found


def thresholds_from_policy(policy: PolicyTable | np.ndarray, space: StateSpace, n_actions: int) -> ThresholdMap:
    pol = np.asarray(getattr(policy, "action_idx", policy)).reshape(space.shape)
    phi = np.full((space.n_aoi, space.n_channel, n_actions - 1), np.inf)
    deltas = np.arange(1, space.cfg.dest_aoi_cap + 1, dtype=float)
    for u in range(1, n_actions):
        chosen = pol == u
        hit = chosen.any(axis=1)
        first = deltas[chosen.argmax(axis=1)]
        phi[:, :, u - 1] = np.where(hit, first, np.inf)
    return ThresholdMap(phi)


def extract_thresholds(q: np.ndarray, cfg: SystemConfig) -> ThresholdMap:
    """Thresholds of the greedy policy of ``q`` (ties resolved as the solver does)."""
    space = enumerate_states(cfg)
    return thresholds_from_policy(greedy_policy(q), space, q.shape[1])


def check_threshold_structure(
    policy: PolicyTable | np.ndarray, thresholds: ThresholdMap, cfg: SystemConfig
) -> StructureReport:
    space = enumerate_states(cfg)
    pol = np.asarray(getattr(policy, "action_idx", policy)).reshape(space.shape)
    transmit = pol != 0
    report = StructureReport()

    for a, d, h in np.argwhere(transmit[:, :-1, :] & ~transmit[:, 1:, :]):
        above = np.flatnonzero(~transmit[a, d + 1 :, h])[0] + d + 1
        report.upward_closure_violations.append(ClosureViolation(int(a), int(h), int(d) + 1, int(above) + 1))

    phi_min = thresholds.min_threshold
    deltas = np.arange(1, cfg.dest_aoi_cap + 1)[None, :, None]
    predicted = deltas >= phi_min[:, None, :]
    for a, d, h in np.argwhere(predicted != transmit):
        report.threshold_consistency_violations.append((int(a), int(d) + 1, int(h)))

    ch_radices = space.radices[cfg.n_type1 + 1 :]
    ch_grid = phi_min.reshape((space.n_aoi, *ch_radices))
    for n in range(cfg.n_devices):
        if ch_radices[n] < 2:
            continue
        lo = np.take(ch_grid, np.arange(ch_radices[n] - 1), axis=n + 1)
        hi = np.take(ch_grid, np.arange(1, ch_radices[n]), axis=n + 1)
        for cell in np.argwhere(hi > lo):
            a = int(cell[0])
            h = int(np.ravel_multi_index(tuple(cell[1:]), ch_radices))
            report.channel_monotonicity_violations.append(
                ChannelMonotonicityViolation(a, h, n, float(lo[tuple(cell)]), float(hi[tuple(cell)]))
            )
    return report


def verify_structure(cfg: SystemConfig, value: ValueFunction, slack: float = SLACK):
    """Run every check on a solved instance.

    Returns ``(report, thresholds, policy)``; the policy is recomputed greedily
    from ``value`` so a stored artifact cannot smuggle in a different table.
    """
    kern = FactoredKernel(cfg)
    q = kern.q_values(value.v)
    policy = greedy_policy(q)
    thresholds = thresholds_from_policy(policy, kern.space, len(kern.actions))
    report = check_threshold_structure(policy, thresholds, cfg)
    report.value_monotonicity_violations = check_value_monotonicity(value.v, cfg, slack)
    return report, thresholds, policy


def policy_slice(
    cfg: SystemConfig,
    policy: PolicyTable | np.ndarray,
    axis: str = "aoi",
    device: int = 0,
    aoi: tuple[int, ...] | None = None,
    channel: tuple[int, ...] | None = None,
) -> list[tuple[int, int, str, str]]:
    """Rows ``(x, delta, action_class, scheduled)`` of a 2-D policy slice.

    ``axis="aoi"`` varies the age of type-I device ``device``; ``axis="channel"``
    varies the channel index of ``device``.  All other coordinates come from
    ``aoi`` / ``channel`` (default: ages 1, channel index 0).
    """
    space = enumerate_states(cfg)
    actions = enumerate_actions(cfg)
    pol = np.asarray(getattr(policy, "action_idx", policy))
    n1 = cfg.n_type1
    ages = list(aoi) if aoi is not None else [1] * n1
    chans = list(channel) if channel is not None else [0] * cfg.n_devices
    if len(ages) != n1 or len(chans) != cfg.n_devices:
        raise ValueError("fixed coordinates do not match the configuration")
    if axis == "aoi":
        if not 0 <= device < n1:
            raise ValueError("axis 'aoi' needs a type-I device")
        xs = range(1, cfg.devices[device].aoi_cap + 1)
    elif axis == "channel":
        if not 0 <= device < cfg.n_devices:
            raise ValueError("device out of range")
        xs = range(len(cfg.devices[device].channel))
    else:
        raise ValueError("axis must be 'aoi' or 'channel'")
    rows = []
    for x in xs:
        if axis == "aoi":
            ages[device] = x
        else:
            chans[device] = x
        for delta in range(1, cfg.dest_aoi_cap + 1):
            s = State(tuple(ages) + (0,) * (cfg.n_devices - n1), delta, tuple(chans))
            u = int(pol[space.flat_index(s)])
            scheduled = " ".join(str(n) for n in actions[u])
            rows.append((x, delta, "transmit" if u else "noop", scheduled))
    return rows
