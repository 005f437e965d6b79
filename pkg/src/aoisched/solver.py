"""Average-cost Bellman equation solved by relative value iteration."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import backend
from .kernel import FactoredKernel
from .model import SystemConfig

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
# Plain RVI (damping=1) cycles forever when the optimal chain is periodic, e.g.
# transmitting at every other slot; any damping < 1 removes the periodicity.
DEFAULT_DAMPING = 0.8


class NonConvergence(RuntimeError):
    def __init__(self, max_iter: int, final_span: float, value=None):
        self.max_iter = max_iter
        self.final_span = final_span
        self.value = value
        super().__init__(f"relative value iteration did not converge in {max_iter} iterations (span {final_span:.3e})")


@dataclass
class ValueFunction:
    v: np.ndarray
    theta: float


@dataclass
class PolicyTable:
    action_idx: np.ndarray

    def __len__(self) -> int:
        return len(self.action_idx)


@dataclass
class SolveReport:
    iterations: int
    final_span: float
    theta: float
    wall_time: float
    backend: str = backend.BACKEND
    span_increases: int = 0


def _as_kernel(cfg: SystemConfig | FactoredKernel) -> FactoredKernel:
    return cfg if isinstance(cfg, FactoredKernel) else FactoredKernel(cfg)


def bellman_backup(v: np.ndarray, cfg: SystemConfig | FactoredKernel) -> tuple[np.ndarray, np.ndarray]:
    """One backup: returns ``(min_u Q, Q)`` with ``Q`` of shape ``(S, |U|)``."""
    q = _as_kernel(cfg).q_values(np.asarray(v, dtype=float))
    return q.min(axis=1), q


def greedy_policy(q: np.ndarray) -> PolicyTable:
    """Row-wise argmin; ties go to the lowest action index, i.e. the empty schedule first."""
    return PolicyTable(np.asarray(q).argmin(axis=1).astype(np.int32))


def relative_value_iteration(
    cfg: SystemConfig | FactoredKernel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    ref: int = 0,
    damping: float = DEFAULT_DAMPING,
) -> tuple[ValueFunction, PolicyTable, SolveReport]:
    """Solve ``theta + V = min_u Q(., u)`` by RVI.

    Stops once ``span(T V - V) <= tol`` and reports ``theta`` as the midpoint
    of that difference vector.  The returned ``v`` is the last iterate (so
    ``T v - v - theta`` is within ``tol/2`` of zero) and the policy is greedy
    with respect to it.  Between sweeps the iterate moves by the aperiodicity transform
    ``v <- v + damping * (T v - v)`` before re-normalising at ``ref``; this
    changes only the iteration path, not ``theta`` or the greedy policy.
    ``damping=1`` is textbook RVI.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    kern = _as_kernel(cfg)
    if not 0 <= ref < kern.space.size:
        raise ValueError("reference state out of range")
    start = time.perf_counter()
    v = np.zeros(kern.space.size)
    prev_span = np.inf
    increases = 0
    span = np.inf
    for it in range(1, max_iter + 1):
        tv, pol = kern.backup(v, policy=True)
        diff = tv - v
        hi, lo = float(diff.max()), float(diff.min())
        span = hi - lo
        if span > prev_span:
            increases += 1
        prev_span = span
        if span <= tol:
            theta = 0.5 * (hi + lo)
            if increases:
                log.warning("RVI span increased on %d of %d iterations", increases, it)
            report = SolveReport(it, span, theta, time.perf_counter() - start, span_increases=increases)
            return ValueFunction(v, theta), PolicyTable(pol), report
        if damping != 1.0:
            tv = v + damping * diff
        v = tv - tv[ref]
    raise NonConvergence(max_iter, span, ValueFunction(v, float("nan")))
