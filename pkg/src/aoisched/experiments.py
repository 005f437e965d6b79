"""Randomised instances and the weight sweep comparing optimal and myopic scheduling.

Instance parameters are drawn uniformly: arrival rates of type-I devices,
base transmit costs ``C^u``, sampling costs of type-II devices and channel
gains ``h``.  Transmit cost under gain ``h`` is ``C^u / h``, so it falls as
the channel improves.  Channel states are equiprobable.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .kernel import FactoredKernel
from .model import ChannelModel, DeviceKind, DeviceSpec, SystemConfig
from .sim import evaluate_policy, myopic_policy, policy_from_table, simulate
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, NonConvergence, relative_value_iteration


def default_beta_grid() -> tuple[float, ...]:
    return tuple(float(b) for b in np.geomspace(0.05, 5.0, 7))


@dataclass(frozen=True)
class ExperimentSpec:
    n_type1: int = 2
    n_type2: int = 3
    m_required: int = 2
    dest_aoi_cap: int = 6
    aoi_cap: int = 6
    n_channel: int = 4
    arrival_range: tuple[float, float] = (0.3, 0.8)
    tx_cost_range: tuple[float, float] = (2.0, 3.0)
    sampling_range: tuple[float, float] = (1.0, 2.0)
    channel_range: tuple[float, float] = (1.0, 2.0)
    beta_grid: tuple[float, ...] = field(default_factory=default_beta_grid)
    slots: int = 50_000
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        for name in ("arrival_range", "tx_cost_range", "sampling_range", "channel_range", "beta_grid", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.n_type1 < 0 or self.n_type2 < 0 or self.n_type1 + self.n_type2 < self.m_required:
            raise ValueError("need at least m_required devices")
        if self.n_channel < 1 or self.slots < 1:
            raise ValueError("n_channel and slots must be positive")
        if not self.beta_grid or any(b <= 0 for b in self.beta_grid):
            raise ValueError("beta_grid must hold positive weights")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


def generate_instance(spec: ExperimentSpec, seed: int, beta: float = 1.0) -> SystemConfig:
    """Draw one instance; per device the order of draws is gains, ``C^u``, then rate or sampling cost."""
    rng = np.random.default_rng(seed)
    probs = (1.0 / spec.n_channel,) * spec.n_channel
    devices = []
    for n in range(spec.n_type1 + spec.n_type2):
        gains = np.sort(rng.uniform(*spec.channel_range, size=spec.n_channel))
        base = rng.uniform(*spec.tx_cost_range)
        tx = tuple(float(base / g) for g in gains)
        channel = ChannelModel(tuple(float(g) for g in gains), probs)
        if n < spec.n_type1:
            lam = float(rng.uniform(*spec.arrival_range))
            devices.append(DeviceSpec(DeviceKind.TYPE_I, tx, channel, beta, arrival_rate=lam, aoi_cap=spec.aoi_cap))
        else:
            cs = float(rng.uniform(*spec.sampling_range))
            devices.append(DeviceSpec(DeviceKind.TYPE_II, tx, channel, beta, sampling_cost=cs))
    return SystemConfig(tuple(devices), spec.m_required, spec.dest_aoi_cap)


def random_instance(seed: int, max_states: int = 5000, all_type2: bool = False) -> SystemConfig:
    """A small instance of random shape, for property-style checks.

    Weights differ across devices and channel probabilities are not uniform.
    """
    rng = np.random.default_rng(seed)
    while True:
        n1 = 0 if all_type2 else int(rng.integers(0, 3))
        n2 = int(rng.integers(max(0, 2 - n1), 4))
        if n1 + n2 < 2:
            continue
        m = int(rng.integers(2, min(3, n1 + n2) + 1))
        a_caps = [int(rng.integers(2, 6)) for _ in range(n1)]
        d_cap = int(rng.integers(2, 8))
        n_ch = [int(rng.integers(1, 4)) for _ in range(n1 + n2)]
        if d_cap * math.prod(a_caps) * math.prod(n_ch) <= max_states:
            break
    devices = []
    for n in range(n1 + n2):
        gains = np.sort(rng.uniform(1.0, 2.0, size=n_ch[n]))
        probs = rng.dirichlet(np.ones(n_ch[n]))
        base = rng.uniform(0.5, 3.0)
        channel = ChannelModel(tuple(gains), tuple(probs / probs.sum()))
        tx = tuple(base / gains)
        weight = float(rng.uniform(0.2, 2.0))
        if n < n1:
            devices.append(
                DeviceSpec(DeviceKind.TYPE_I, tx, channel, weight, arrival_rate=float(rng.uniform(0.1, 0.9)), aoi_cap=a_caps[n])
            )
        else:
            devices.append(DeviceSpec(DeviceKind.TYPE_II, tx, channel, weight, sampling_cost=float(rng.uniform(0.2, 2.0))))
    return SystemConfig(tuple(devices), m, d_cap)


SWEEP_COLUMNS = (
    "seed",
    "beta",
    "policy",
    "avg_weighted_cost",
    "avg_dest_aoi",
    "avg_total_energy",
    "sem_weighted_cost",
    "sem_dest_aoi",
    "sem_total_energy",
    "exact_weighted_cost",
    "exact_dest_aoi",
    "exact_total_energy",
    "theta",
    "slots",
)


@dataclass
class SweepRow:
    seed: int
    beta: float
    policy: str
    avg_weighted_cost: float
    avg_dest_aoi: float
    avg_total_energy: float
    sem_weighted_cost: float
    sem_dest_aoi: float
    sem_total_energy: float
    exact_weighted_cost: float
    exact_dest_aoi: float
    exact_total_energy: float
    theta: float
    slots: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


@dataclass
class SweepFailure:
    seed: int
    beta: float
    message: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    failures: list[SweepFailure]

    def select(self, seed: int, policy: str) -> list[SweepRow]:
        return sorted((r for r in self.rows if r.seed == seed and r.policy == policy), key=lambda r: r.beta)


def _sweep_point(job):
    spec, seed, beta = job
    cfg = generate_instance(spec, seed, beta)
    kern = FactoredKernel(cfg)
    try:
        value, table, _ = relative_value_iteration(kern, tol=spec.tol, max_iter=spec.max_iter)
    except NonConvergence as exc:
        return SweepFailure(seed, beta, str(exc))
    rows = []
    for name, pol, theta in (
        ("optimal", policy_from_table(cfg, table), value.theta),
        ("myopic", myopic_policy(cfg, kern), float("nan")),
    ):
        m = simulate(cfg, pol, spec.slots, seed)
        ex = evaluate_policy(cfg, pol, kern)
        rows.append(
            SweepRow(
                seed, beta, name,
                m.avg_weighted_cost, m.avg_dest_aoi, m.avg_total_energy,
                m.sem_weighted_cost, m.sem_dest_aoi, m.sem_total_energy,
                ex.weighted_cost, ex.dest_aoi, ex.total_energy,
                theta, spec.slots,
            )
        )
    return rows


def beta_sweep(spec: ExperimentSpec, workers: int = 1, progress=None) -> SweepResult:
    """Solve and simulate every ``(seed, beta)`` point; output order never depends on ``workers``."""
    jobs = [(spec, seed, float(beta)) for seed in spec.seeds for beta in spec.beta_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_sweep_point(job))
            if progress:
                progress(job[1], job[2])
    rows, failures = [], []
    for res in results:
        if isinstance(res, SweepFailure):
            failures.append(res)
        else:
            rows.extend(res)
    return SweepResult(rows, failures)


@dataclass
class TrendCheck:
    cost_ordering: list = field(default_factory=list)  # (seed, beta, optimal, myopic, 3 sigma)
    aoi_monotone: list = field(default_factory=list)
    energy_monotone: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not (self.cost_ordering or self.aoi_monotone or self.energy_monotone)


def check_trends(result: SweepResult, n_sigma: float = 3.0, exact: bool = False) -> TrendCheck:
    """Optimal beats myopic at every weight; optimal age rises and energy falls with the weight.

    Simulated values are compared with an ``n_sigma`` band built from the batch
    standard errors; ``exact=True`` uses the stationary values with a 1e-9 slack.
    """
    out = TrendCheck()
    seeds = sorted({r.seed for r in result.rows})
    for seed in seeds:
        opt = result.select(seed, "optimal")
        myo = {r.beta: r for r in result.select(seed, "myopic")}
        for r in opt:
            m = myo[r.beta]
            if exact:
                a, b, band = r.exact_weighted_cost, m.exact_weighted_cost, 1e-9
            else:
                a, b = r.avg_weighted_cost, m.avg_weighted_cost
                band = n_sigma * math.hypot(r.sem_weighted_cost, m.sem_weighted_cost)
            if a > b + band:
                out.cost_ordering.append((seed, r.beta, a, b, band))
        for lo, hi in zip(opt, opt[1:]):
            if exact:
                aoi_band = energy_band = 1e-9
                aoi = (lo.exact_dest_aoi, hi.exact_dest_aoi)
                en = (lo.exact_total_energy, hi.exact_total_energy)
            else:
                aoi_band = n_sigma * math.hypot(lo.sem_dest_aoi, hi.sem_dest_aoi)
                energy_band = n_sigma * math.hypot(lo.sem_total_energy, hi.sem_total_energy)
                aoi = (lo.avg_dest_aoi, hi.avg_dest_aoi)
                en = (lo.avg_total_energy, hi.avg_total_energy)
            if aoi[1] < aoi[0] - aoi_band:
                out.aoi_monotone.append((seed, lo.beta, hi.beta, *aoi, aoi_band))
            if en[1] > en[0] + energy_band:
                out.energy_monotone.append((seed, lo.beta, hi.beta, *en, energy_band))
    return out


def improvements(result: SweepResult, exact: bool = False) -> dict[str, float]:
    """Largest relative reduction (percent) of weighted cost and of age, optimal vs myopic."""
    best_cost = best_aoi = -math.inf
    for seed in sorted({r.seed for r in result.rows}):
        myo = {r.beta: r for r in result.select(seed, "myopic")}
        for r in result.select(seed, "optimal"):
            m = myo[r.beta]
            if exact:
                pairs = ((r.exact_weighted_cost, m.exact_weighted_cost), (r.exact_dest_aoi, m.exact_dest_aoi))
            else:
                pairs = ((r.avg_weighted_cost, m.avg_weighted_cost), (r.avg_dest_aoi, m.avg_dest_aoi))
            best_cost = max(best_cost, 100.0 * (pairs[0][1] - pairs[0][0]) / pairs[0][1])
            best_aoi = max(best_aoi, 100.0 * (pairs[1][1] - pairs[1][0]) / pairs[1][1])
    return {"max_weighted_cost_reduction_pct": best_cost, "max_aoi_reduction_pct": best_aoi}
