"""Factored one-step transition structure and the Bellman backup built on it.

Channels are i.i.d. across slots and independent of everything else, so a
backup only needs the channel-marginalised value function
``W(A', delta') = E_h'[V(A', delta', h')]``.  The destination age moves
deterministically and each type-I age moves independently, which leaves at
most ``2**N_1`` successors per ``(A, u)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .model import (
    ActionSpace,
    State,
    StateSpace,
    SystemConfig,
    device_aoi_successors,
    enumerate_actions,
    enumerate_states,
    next_dest_aoi,
)


def successor_distribution(cfg: SystemConfig, s: State, a) -> tuple[list[tuple[tuple[int, ...], float]], int]:
    """Next type-I age vectors with probabilities, plus the deterministic next destination age."""
    branches = [device_aoi_successors(dev, s.device_aoi[n]) for n, dev in enumerate(cfg.type1)]
    out = []
    for combo in itertools.product(*branches):
        prob = 1.0
        for _, p in combo:
            prob *= p
        out.append((tuple(age for age, _ in combo), prob))
    return out, next_dest_aoi(cfg, s, a)


def joint_channel_probs(cfg: SystemConfig) -> np.ndarray:
    """Product-measure probability of each channel vector, in state-encoding order."""
    probs = np.ones(1)
    for dev in cfg.devices:
        probs = np.multiply.outer(probs, np.asarray(dev.channel.probs)).ravel()
    return probs


@dataclass
class FactoredKernel:
    """Precomputed tables for fast backups on one instance.

    ``succ_idx``/``succ_prob`` list each age vector's successors (padded with
    zero-probability entries), ``gather`` maps ``(A, delta, u)`` to the flat
    ``(A', delta')`` cell read after the age transition, and ``cost`` holds
    the weighted energy of every action under every channel vector.
    """

    cfg: SystemConfig
    space: StateSpace = field(init=False)
    actions: ActionSpace = field(init=False)

    def __post_init__(self):
        cfg = self.cfg
        self.space = enumerate_states(cfg)
        self.actions = enumerate_actions(cfg)
        n_aoi, n_dest, n_ch = self.space.shape
        self.channel_probs = joint_channel_probs(cfg)
        self.aoi_vectors = self.space.aoi_vectors()
        self.channel_vectors = self.space.channel_vectors()
        self._build_age_successors()
        self.next_dest = self._next_dest_table()
        self.gather = (np.arange(n_aoi)[:, None, None] * n_dest + self.next_dest - 1).reshape(
            n_aoi * n_dest, len(self.actions)
        )
        self.stage = np.tile(np.arange(1, n_dest + 1, dtype=float), n_aoi)
        self.cost = self._cost_table()

    def _build_age_successors(self):
        cfg = self.cfg
        n_aoi = self.space.n_aoi
        radices = self.space.radices[: cfg.n_type1]
        width = 2 ** cfg.n_type1
        self.succ_idx = np.zeros((n_aoi, width), dtype=np.int64)
        self.succ_prob = np.zeros((n_aoi, width))
        for i, ages in enumerate(self.aoi_vectors):
            s = State(tuple(int(x) for x in ages), 1, ())
            dist, _ = successor_distribution(cfg, s, ())
            for k, (nxt, p) in enumerate(dist):
                flat = 0
                for age, r in zip(nxt, radices):
                    flat = flat * r + (age - 1)
                self.succ_idx[i, k] = flat
                self.succ_prob[i, k] = p

    def _next_dest_table(self) -> np.ndarray:
        cfg = self.cfg
        n_aoi, n_dest, _ = self.space.shape
        n1 = cfg.n_type1
        table = np.empty((n_aoi, n_dest, len(self.actions)), dtype=np.int64)
        table[:, :, 0] = np.minimum(np.arange(2, n_dest + 2), n_dest)[None, :]
        ages = np.zeros((n_aoi, cfg.n_devices), dtype=np.int64)
        ages[:, :n1] = self.aoi_vectors
        for u, members in enumerate(self.actions.actions[1:], start=1):
            oldest = ages[:, list(members)].max(axis=1)
            table[:, :, u] = np.minimum(oldest + 1, n_dest)[:, None]
        return table

    def _cost_table(self) -> np.ndarray:
        cfg = self.cfg
        per_device = np.zeros((self.space.n_channel, cfg.n_devices))
        for n, dev in enumerate(cfg.devices):
            unit = np.array([dev.update_cost(k) for k in range(len(dev.channel))])
            per_device[:, n] = dev.weight * unit[self.channel_vectors[:, n]]
        cost = np.zeros((self.space.n_channel, len(self.actions)))
        for u, members in enumerate(self.actions.actions[1:], start=1):
            acc = np.zeros(self.space.n_channel)
            for n in members:  # ascending device order
                acc = acc + per_device[:, n]
            cost[:, u] = acc
        return cost

    # -- backup pieces --------------------------------------------------------

    def channel_expectation(self, v: np.ndarray) -> np.ndarray:
        """``W(A', delta')`` as an ``(n_aoi, dest_cap)`` array."""
        n_aoi, n_dest, n_ch = self.space.shape
        v2d = np.ascontiguousarray(v, dtype=float).reshape(n_aoi * n_dest, n_ch)
        out = np.empty(n_aoi * n_dest)
        backend.channel_expectation(v2d, self.channel_probs, out)
        return out.reshape(n_aoi, n_dest)

    def continuation(self, w: np.ndarray) -> np.ndarray:
        """``sum_A' Pr[A'|A] W(A', delta')`` for every ``(A, delta')``."""
        ew = np.zeros_like(w)
        for k in range(self.succ_idx.shape[1]):
            ew += self.succ_prob[:, k, None] * w[self.succ_idx[:, k]]
        return ew

    def action_base(self, v: np.ndarray) -> np.ndarray:
        """Stage age plus expected continuation, shape ``(n_aoi*dest_cap, |U|)``."""
        ew = self.continuation(self.channel_expectation(v))
        return np.ascontiguousarray(self.stage[:, None] + ew.ravel()[self.gather])

    def backup(self, v: np.ndarray, policy: bool = False):
        base = self.action_base(v)
        n_aoi, n_dest, n_ch = self.space.shape
        out = np.empty((n_aoi * n_dest, n_ch))
        pol = np.empty((n_aoi * n_dest, n_ch), dtype=np.int32)
        backend.backup_min(base, self.cost, out, pol)
        if policy:
            return out.ravel(), pol.ravel()
        return out.ravel()

    def q_values(self, v: np.ndarray) -> np.ndarray:
        """Full ``Q(s, u)`` table, shape ``(S, |U|)``."""
        base = self.action_base(v)
        q = base[:, None, :] + self.cost[None, :, :]
        return q.reshape(self.space.size, len(self.actions))


def channel_expectation(v: np.ndarray, cfg: SystemConfig | FactoredKernel) -> np.ndarray:
    kern = cfg if isinstance(cfg, FactoredKernel) else FactoredKernel(cfg)
    return kern.channel_expectation(v)
