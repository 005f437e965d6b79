"""Seeded slot-by-slot simulation and long-run policy metrics.

Slot ``t`` starts in state ``(A(t), delta(t), h(t))``.  The policy picks a
schedule, the slot is charged ``delta(t)`` plus the weighted update energy,
then ``delta(t+1)`` follows from ``A(t)``, the arrivals of slot ``t`` give
``A(t+1)`` and a fresh channel vector is drawn.  Runs start from all ages 1.

Randomness comes from one ``SeedSequence`` per run, spawned into an
independent stream per device channel and per type-I arrival process, so a
``(cfg, policy, slots, seed)`` tuple always reproduces the same trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .kernel import FactoredKernel
from .model import EMPTY, Action, State, SystemConfig, enumerate_actions, enumerate_states
from .solver import PolicyTable
from .special_case import ReducedModel, expand_reduced_policy

DEFAULT_BATCHES = 50


class Policy:
    """Stationary deterministic policy: a pure function of the state."""

    def decide(self, s: State) -> Action:
        raise NotImplementedError


class TablePolicy(Policy):
    def __init__(self, cfg: SystemConfig, table, name: str = "table"):
        self.cfg = cfg
        self.space = enumerate_states(cfg)
        self.actions = enumerate_actions(cfg)
        table = np.ascontiguousarray(getattr(table, "action_idx", table), dtype=np.int32)
        if table.shape != (self.space.size,):
            raise ValueError(f"policy table has shape {table.shape}, expected ({self.space.size},)")
        if len(table) and (table.min() < 0 or table.max() >= len(self.actions)):
            raise ValueError("policy table holds invalid action indices")
        self.table = table
        self.name = name

    def decide(self, s: State) -> Action:
        return self.actions[int(self.table[self.space.flat_index(s)])]


def policy_from_table(cfg: SystemConfig, policy: PolicyTable) -> TablePolicy:
    return TablePolicy(cfg, policy, name="optimal")


def never_policy(cfg: SystemConfig) -> TablePolicy:
    return TablePolicy(cfg, np.zeros(enumerate_states(cfg).size, dtype=np.int32), name="never")


def random_policy(cfg: SystemConfig, seed: int, transmit_prob: float = 0.5) -> TablePolicy:
    """A fixed random table: each state transmits w.p. ``transmit_prob`` with a uniform size-M subset."""
    size = enumerate_states(cfg).size
    n_actions = len(enumerate_actions(cfg))
    rng = np.random.default_rng(seed)
    tx = rng.random(size) < transmit_prob
    pick = rng.integers(1, n_actions, size=size) if n_actions > 1 else np.zeros(size, dtype=np.int64)
    return TablePolicy(cfg, np.where(tx, pick, 0).astype(np.int32), name="random")


def myopic_policy(cfg: SystemConfig, kernel: FactoredKernel | None = None) -> TablePolicy:
    """Maximise the one-slot age reduction minus the weighted energy.

    Equivalent to minimising ``delta' + cost``; exact ties prefer the empty
    schedule, then the lowest action index.
    """
    kern = kernel or FactoredKernel(cfg)
    n_aoi, n_dest, n_ch = kern.space.shape
    nxt = kern.next_dest.reshape(n_aoi * n_dest, 1, -1).astype(float)
    table = np.empty((n_aoi * n_dest, n_ch), dtype=np.int32)
    for lo in range(0, n_aoi * n_dest, 64):
        score = nxt[lo : lo + 64] + kern.cost[None, :, :]
        table[lo : lo + 64] = score.argmin(axis=2)
    return TablePolicy(cfg, table.ravel(), name="myopic")


class ReducedPolicyAdapter(Policy):
    """Runs a reduced ``(delta, C_h)`` decision grid on the full all-type-II system."""

    def __init__(self, model: ReducedModel, transmit: np.ndarray):
        self.model = model
        self.transmit = np.asarray(transmit, dtype=bool)
        if self.transmit.shape != (model.dest_cap, len(model.ch_values)):
            raise ValueError("decision grid does not match the reduced model")
        self.space = enumerate_states(model.cfg)
        self.name = "reduced"

    def decide(self, s: State) -> Action:
        h = self.space.flat_index(State(s.device_aoi, 1, s.channel_idx))
        if self.transmit[s.dest_aoi - 1, self.model.ch_index[h]]:
            return tuple(int(n) for n in self.model.designated[h])
        return EMPTY

    @property
    def table(self) -> np.ndarray:
        return expand_reduced_policy(self.model, self.transmit).action_idx


@dataclass
class SimMetrics:
    avg_dest_aoi: float
    avg_energy_per_device: tuple[float, ...]
    avg_weighted_cost: float
    slots_simulated: int
    seed: int
    sem_dest_aoi: float = float("nan")
    sem_weighted_cost: float = float("nan")
    sem_total_energy: float = float("nan")

    @property
    def avg_total_energy(self) -> float:
        return float(sum(self.avg_energy_per_device))


@dataclass
class Trajectory:
    delta: np.ndarray
    weighted_cost: np.ndarray
    energy: np.ndarray = field(repr=False)


def draw_randomness(cfg: SystemConfig, slots: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Channel indices ``(slots, N)`` and type-I arrivals ``(slots, N_1)``."""
    streams = np.random.SeedSequence(seed).spawn(cfg.n_devices + cfg.n_type1)
    channels = np.empty((slots, cfg.n_devices), dtype=np.int32)
    for n, dev in enumerate(cfg.devices):
        rng = np.random.default_rng(streams[n])
        channels[:, n] = rng.choice(len(dev.channel), size=slots, p=np.asarray(dev.channel.probs))
    arrivals = np.empty((slots, cfg.n_type1), dtype=np.uint8)
    for n, dev in enumerate(cfg.type1):
        rng = np.random.default_rng(streams[cfg.n_devices + n])
        arrivals[:, n] = rng.random(slots) < dev.arrival_rate
    return channels, arrivals


def _device_costs(cfg: SystemConfig) -> np.ndarray:
    width = max(len(d.channel) for d in cfg.devices)
    out = np.zeros((cfg.n_devices, width))
    for n, dev in enumerate(cfg.devices):
        out[n, : len(dev.channel)] = [dev.update_cost(k) for k in range(len(dev.channel))]
    return out


def _run_generic(cfg, policy, channels, arrivals, aoi, delta, energy, slot_cost, slot_energy, slot_delta):
    """Reference loop for policies without a table; same arithmetic as the kernels."""
    costs = _device_costs(cfg).tolist()
    weights = [d.weight for d in cfg.devices]
    caps = [d.aoi_cap for d in cfg.type1]
    n1, n2 = cfg.n_type1, cfg.n_devices - cfg.n_type1
    cap = cfg.dest_aoi_cap
    for t in range(len(channels)):
        h = tuple(int(k) for k in channels[t])
        u = policy.decide(State(tuple(int(a) for a in aoi) + (0,) * n2, delta, h))
        if len(u) not in (0, cfg.m_required):
            raise ValueError(f"policy returned an invalid schedule {u!r}")
        cw = 0.0
        ce = 0.0
        if u:
            maxage = 0
            for n in sorted(u):
                e = costs[n][h[n]]
                energy[n] += e
                ce = ce + e
                cw = cw + weights[n] * e
                if n < n1 and aoi[n] > maxage:
                    maxage = int(aoi[n])
            nd = maxage + 1
        else:
            nd = delta + 1
        nd = min(nd, cap)
        slot_delta[t] = delta
        slot_cost[t] = float(delta) + cw
        slot_energy[t] = ce
        delta = nd
        for n in range(n1):
            if arrivals[t, n]:
                aoi[n] = 1
            elif aoi[n] < caps[n]:
                aoi[n] += 1
    return delta


def _run(cfg, policy, channels, arrivals, aoi, delta, energy, kernels):
    slots = len(channels)
    slot_cost = np.empty(slots)
    slot_energy = np.empty(slots)
    slot_delta = np.empty(slots, dtype=np.int32)
    table = getattr(policy, "table", None)
    if table is None:
        delta = _run_generic(cfg, policy, channels, arrivals, aoi, delta, energy, slot_cost, slot_energy, slot_delta)
    else:
        space = enumerate_states(cfg)
        actions = enumerate_actions(cfg)
        delta = kernels.simulate_table(
            np.ascontiguousarray(table, dtype=np.int32),
            np.ascontiguousarray(actions.members().reshape(len(actions), -1)),
            np.asarray(space.strides, dtype=np.int64),
            np.asarray([d.aoi_cap for d in cfg.type1], dtype=np.int64),
            cfg.dest_aoi_cap,
            delta,
            aoi,
            _device_costs(cfg),
            np.asarray([d.weight for d in cfg.devices], dtype=float),
            arrivals,
            channels,
            energy,
            slot_cost,
            slot_energy,
            slot_delta,
        )
    return int(delta), Trajectory(slot_delta, slot_cost, slot_energy)


def _batch_sem(x: np.ndarray, batches: int) -> float:
    nb = min(batches, len(x))
    if nb < 2:
        return float("nan")
    size = len(x) // nb
    means = x[: nb * size].reshape(nb, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(nb))


def simulate(
    cfg: SystemConfig,
    policy: Policy,
    slots: int,
    seed: int,
    burn_in: int = 0,
    batches: int = DEFAULT_BATCHES,
    return_trajectory: bool = False,
    kernels=backend,
):
    """Simulate ``slots`` slots after an optional discarded ``burn_in`` prefix.

    Standard errors use batch means over ``batches`` contiguous batches.
    With ``return_trajectory=True`` returns ``(metrics, trajectory)``.
    """
    if slots < 1:
        raise ValueError("slots must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    channels, arrivals = draw_randomness(cfg, burn_in + slots, seed)
    aoi = np.ones(cfg.n_type1, dtype=np.int64)
    delta = 1
    if burn_in:
        scratch = np.zeros(cfg.n_devices)
        delta, _ = _run(cfg, policy, channels[:burn_in], arrivals[:burn_in], aoi, delta, scratch, kernels)
    energy = np.zeros(cfg.n_devices)
    _, traj = _run(cfg, policy, channels[burn_in:], arrivals[burn_in:], aoi, delta, energy, kernels)
    metrics = SimMetrics(
        avg_dest_aoi=float(traj.delta.sum(dtype=np.int64)) / slots,
        avg_energy_per_device=tuple(float(e) / slots for e in energy),
        avg_weighted_cost=float(traj.weighted_cost.sum()) / slots,
        slots_simulated=slots,
        seed=seed,
        sem_dest_aoi=_batch_sem(traj.delta.astype(float), batches),
        sem_weighted_cost=_batch_sem(traj.weighted_cost, batches),
        sem_total_energy=_batch_sem(traj.energy, batches),
    )
    if return_trajectory:
        return metrics, traj
    return metrics


@dataclass
class ExactMetrics:
    dest_aoi: float
    energy_per_device: tuple[float, ...]
    weighted_cost: float

    @property
    def total_energy(self) -> float:
        return float(sum(self.energy_per_device))


def evaluate_policy(cfg: SystemConfig, policy, kernel: FactoredKernel | None = None) -> ExactMetrics:
    """Exact long-run averages of a table policy from its stationary distribution.

    The channel vector of a slot is independent of ``(A, delta)`` in that slot,
    so the chain can be collapsed onto ``(A, delta)`` with channels averaged
    out.  Assumes the induced chain has a single recurrent class.
    """
    kern = kernel or FactoredKernel(cfg)
    table = np.asarray(getattr(policy, "table", getattr(policy, "action_idx", policy)))
    n_aoi, n_dest, n_ch = kern.space.shape
    n_ad = n_aoi * n_dest
    pol = table.reshape(n_ad, n_ch)
    ph = kern.channel_probs
    nxt = np.take_along_axis(kern.next_dest.reshape(n_ad, -1), pol, axis=1)  # (n_ad, n_ch)
    a_of = np.repeat(np.arange(n_aoi), n_dest)
    trans = np.zeros((n_ad, n_ad))
    rows = np.repeat(np.arange(n_ad), n_ch)
    for k in range(kern.succ_idx.shape[1]):
        cols = (kern.succ_idx[a_of, k][:, None] * n_dest + nxt - 1).ravel()
        weight = (kern.succ_prob[a_of, k][:, None] * ph[None, :]).ravel()
        np.add.at(trans, (rows, cols), weight)
    system = np.vstack([trans.T - np.eye(n_ad), np.ones((1, n_ad))])
    rhs = np.zeros(n_ad + 1)
    rhs[-1] = 1.0
    mu, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    deltas = np.tile(np.arange(1, n_dest + 1, dtype=float), n_aoi)
    aoi = float(mu @ deltas)
    members = kern.actions.members()
    energy = []
    for n, dev in enumerate(cfg.devices):
        unit = np.array([dev.update_cost(k) for k in range(len(dev.channel))])[kern.channel_vectors[:, n]]
        scheduled = (members[pol] == n).any(axis=2)  # (n_ad, n_ch)
        energy.append(float(mu @ (scheduled * unit[None, :]) @ ph))
    weighted = aoi + sum(dev.weight * e for dev, e in zip(cfg.devices, energy))
    return ExactMetrics(aoi, tuple(energy), weighted)
