"""Reduction of an all-type-II system to a (destination age, energy-cost) MDP.

With only generate-at-will devices every full schedule resets the
destination age to 1, so the only transmit action worth considering under
channel vector ``h`` is the ``M`` devices with the smallest weighted update
cost.  Their summed cost ``C_h`` is a sufficient statistic for ``h``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .kernel import joint_channel_probs
from .model import SystemConfig, enumerate_actions, enumerate_states
from .solver import DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOL, NonConvergence, PolicyTable, SolveReport

ROUND_DIGITS = 12


def _require_all_type2(cfg: SystemConfig) -> None:
    if not cfg.all_type2:
        raise ValueError("the reduced model only applies when every device is type-II")


def weighted_costs(cfg: SystemConfig, h) -> np.ndarray:
    return np.array([dev.weight * dev.update_cost(int(k)) for dev, k in zip(cfg.devices, h)])


def select_cheapest(cfg: SystemConfig, h) -> tuple[int, ...]:
    """The ``M`` devices with the smallest weighted update cost under ``h``; ties by device index."""
    _require_all_type2(cfg)
    order = np.argsort(weighted_costs(cfg, h), kind="stable")
    return tuple(sorted(int(n) for n in order[: cfg.m_required]))


@dataclass
class ReducedModel:
    cfg: SystemConfig
    ch_values: np.ndarray  # sorted distinct energy-cost states
    ch_probs: np.ndarray
    designated: np.ndarray  # (n_channel, M) devices scheduled under each channel vector
    ch_index: np.ndarray  # (n_channel,) position of each channel vector's C_h in ch_values

    @property
    def dest_cap(self) -> int:
        return self.cfg.dest_aoi_cap


def build_reduced_model(cfg: SystemConfig) -> ReducedModel:
    _require_all_type2(cfg)
    space = enumerate_states(cfg)
    vectors = space.channel_vectors()
    probs = joint_channel_probs(cfg)
    designated = np.empty((len(vectors), cfg.m_required), dtype=np.int32)
    costs = np.empty(len(vectors))
    for i, h in enumerate(vectors):
        chosen = select_cheapest(cfg, h)
        designated[i] = chosen
        total = 0.0
        for n in chosen:  # ascending device index
            dev = cfg.devices[n]
            total += dev.weight * dev.update_cost(int(h[n]))
        costs[i] = round(total, ROUND_DIGITS)
    ch_values, ch_index = np.unique(costs, return_inverse=True)
    ch_probs = np.zeros(len(ch_values))
    for i, k in enumerate(ch_index):  # fixed accumulation order
        ch_probs[k] += probs[i]
    return ReducedModel(cfg, ch_values, ch_probs, designated, ch_index.astype(np.int64))


@dataclass
class ReducedValueFunction:
    v: np.ndarray  # (dest_cap, n_ch)
    theta: float


def reduced_backup(model: ReducedModel, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One backup on the reduced chain: ``(v_new, transmit)``, ties resolved to no-op."""
    cap = model.dest_cap
    ev = (v * model.ch_probs[None, :]).sum(axis=1)  # E[V(delta, C')] per delta
    deltas = np.arange(1, cap + 1, dtype=float)
    q_noop = deltas + ev[np.minimum(np.arange(1, cap + 1), cap - 1)]
    q_tx = deltas[:, None] + model.ch_values[None, :] + ev[0]
    q_noop = np.broadcast_to(q_noop[:, None], q_tx.shape)
    transmit = q_tx < q_noop
    return np.where(transmit, q_tx, q_noop), transmit


def solve_reduced(
    model: ReducedModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = DEFAULT_DAMPING,
) -> tuple[ReducedValueFunction, np.ndarray, SolveReport]:
    """RVI on the reduced chain; reference state is (delta=1, smallest C_h).

    Same stopping rule and damping as :func:`relative_value_iteration`.

    The policy is a boolean ``(dest_cap, n_ch)`` array, True meaning "schedule
    the designated devices"; exact ties resolve to no transmission.
    """
    start = time.perf_counter()
    v = np.zeros((model.dest_cap, len(model.ch_values)))
    span = np.inf
    for it in range(1, max_iter + 1):
        tv, transmit = reduced_backup(model, v)
        diff = tv - v
        hi, lo = float(diff.max()), float(diff.min())
        span = hi - lo
        if span <= tol:
            theta = 0.5 * (hi + lo)
            report = SolveReport(it, span, theta, time.perf_counter() - start, backend="numpy")
            return ReducedValueFunction(v, theta), transmit, report
        tv = v + damping * diff
        v = tv - tv[0, 0]
    raise NonConvergence(max_iter, span)


class PsiViolation(NamedTuple):
    kind: str  # "upward_closure" or "monotone"
    ch_idx: int
    detail: str


def extract_psi(transmit: np.ndarray) -> np.ndarray:
    """Smallest transmitting destination age per C_h column (inf if none)."""
    transmit = np.asarray(transmit, dtype=bool)
    deltas = np.arange(1, transmit.shape[0] + 1, dtype=float)
    return np.where(transmit.any(axis=0), deltas[transmit.argmax(axis=0)], np.inf)


def check_psi_structure(transmit: np.ndarray) -> list[PsiViolation]:
    transmit = np.asarray(transmit, dtype=bool)
    found = []
    for k in range(transmit.shape[1]):
        col = transmit[:, k]
        gaps = np.flatnonzero(col[:-1] & ~col[1:])
        if len(gaps):
            found.append(PsiViolation("upward_closure", k, f"transmits at delta={gaps[0] + 1} but not at {gaps[0] + 2}"))
    psi = extract_psi(transmit)
    for k in np.flatnonzero(psi[1:] < psi[:-1]):
        found.append(PsiViolation("monotone", int(k) + 1, f"psi drops from {psi[k]} to {psi[k + 1]}"))
    return found


def expand_reduced_policy(model: ReducedModel, transmit: np.ndarray) -> PolicyTable:
    """Full-state policy table: transmit decisions map to the designated devices of each h."""
    cfg = model.cfg
    actions = enumerate_actions(cfg)
    tx_action = np.array([actions.index_of(tuple(row)) for row in model.designated], dtype=np.int32)
    decide = np.asarray(transmit, dtype=bool)[:, model.ch_index]  # (dest_cap, n_channel)
    return PolicyTable(np.where(decide, tx_action[None, :], 0).astype(np.int32).ravel())


def decision_grid(model: ReducedModel, transmit: np.ndarray) -> list[tuple[int, float, str]]:
    rows = []
    for d in range(model.dest_cap):
        for k, c in enumerate(model.ch_values):
            rows.append((d + 1, float(c), "transmit" if transmit[d, k] else "noop"))
    return rows
