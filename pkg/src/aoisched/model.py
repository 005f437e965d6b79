"""Problem instance, state/action spaces and one-step dynamics.

States are points ``(A, delta, h)``: the ages held by the type-I devices,
the destination age, and one channel index per device.  They are encoded
mixed-radix, row-major, in that order (type-I ages first, then the
destination age, then the channel indices), so the last device's channel
index varies fastest.  Ages are 1-based in :class:`State` and 0-based in
the radix digits.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

DEFAULT_STATE_CAP = 50_000_000
PROB_TOL = 1e-12


class ConfigError(ValueError):
    """Invalid problem instance; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class StateSpaceTooLarge(ValueError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"state space has {size} states, exceeding the cap of {cap}")


class DeviceKind(str, Enum):
    TYPE_I = "I"
    TYPE_II = "II"


@dataclass(frozen=True)
class ChannelModel:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    def __len__(self) -> int:
        return len(self.values)

    def validate(self, path: str = "channel") -> None:
        if len(self.values) < 1:
            raise ConfigError(f"{path}.values", "must contain at least one channel state")
        if len(self.probs) != len(self.values):
            raise ConfigError(f"{path}.probs", "must have the same length as values")
        if any(not math.isfinite(v) for v in self.values):
            raise ConfigError(f"{path}.values", "must be finite")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError(f"{path}.values", "must be strictly increasing")
        if any(p < 0 or not math.isfinite(p) for p in self.probs):
            raise ConfigError(f"{path}.probs", "must be nonnegative")
        if abs(math.fsum(self.probs) - 1.0) > PROB_TOL:
            raise ConfigError(f"{path}.probs", f"must sum to 1 (got {math.fsum(self.probs)!r})")


@dataclass(frozen=True)
class DeviceSpec:
    kind: DeviceKind
    tx_cost: tuple[float, ...]
    channel: ChannelModel
    weight: float = 1.0
    arrival_rate: float = 0.0
    sampling_cost: float = 0.0
    aoi_cap: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", DeviceKind(self.kind))
        object.__setattr__(self, "tx_cost", tuple(float(c) for c in self.tx_cost))

    @property
    def is_type1(self) -> bool:
        return self.kind is DeviceKind.TYPE_I

    def update_cost(self, h_idx: int) -> float:
        """Unweighted energy of one update, ``C^s + C^u(h)``."""
        return self.sampling_cost + self.tx_cost[h_idx]

    def validate(self, path: str) -> None:
        self.channel.validate(f"{path}.channel")
        if len(self.tx_cost) != len(self.channel):
            raise ConfigError(f"{path}.tx_cost", "must align with channel.values")
        if any(c < 0 or not math.isfinite(c) for c in self.tx_cost):
            raise ConfigError(f"{path}.tx_cost", "must be finite and nonnegative")
        if any(b > a for a, b in zip(self.tx_cost, self.tx_cost[1:])):
            raise ConfigError(f"{path}.tx_cost", "must be non-increasing in channel quality")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ConfigError(f"{path}.weight", "must be positive")
        if self.is_type1:
            if not 0.0 <= self.arrival_rate <= 1.0:
                raise ConfigError(f"{path}.lambda", "must lie in [0, 1]")
            if self.sampling_cost != 0.0:
                raise ConfigError(f"{path}.sampling_cost", "must be 0 for type-I devices")
            if int(self.aoi_cap) != self.aoi_cap or self.aoi_cap < 1:
                raise ConfigError(f"{path}.aoi_cap", "must be an integer >= 1")
        else:
            if self.arrival_rate != 0.0:
                raise ConfigError(f"{path}.lambda", "type-II devices have no arrival process")
            if not (self.sampling_cost > 0 and math.isfinite(self.sampling_cost)):
                raise ConfigError(f"{path}.sampling_cost", "must be positive for type-II devices")


@dataclass(frozen=True)
class SystemConfig:
    devices: tuple[DeviceSpec, ...]
    m_required: int
    dest_aoi_cap: int

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        self.validate()

    def validate(self) -> None:
        if not self.devices:
            raise ConfigError("devices", "at least one device is required")
        seen_type2 = False
        for i, dev in enumerate(self.devices):
            path = f"devices[{i}]"
            dev.validate(path)
            if dev.is_type1 and seen_type2:
                raise ConfigError(f"{path}.kind", "type-I devices must precede type-II devices")
            seen_type2 = seen_type2 or not dev.is_type1
        if int(self.m_required) != self.m_required or not 2 <= self.m_required <= len(self.devices):
            raise ConfigError("m_required", f"must be an integer in [2, {len(self.devices)}]")
        if int(self.dest_aoi_cap) != self.dest_aoi_cap or self.dest_aoi_cap < 1:
            raise ConfigError("dest_aoi_cap", "must be an integer >= 1")

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_type1(self) -> int:
        return sum(d.is_type1 for d in self.devices)

    @property
    def type1(self) -> tuple[DeviceSpec, ...]:
        return self.devices[: self.n_type1]

    @property
    def all_type2(self) -> bool:
        return self.n_type1 == 0

    def with_weights(self, weight: float | Sequence[float]) -> "SystemConfig":
        if np.isscalar(weight):
            weight = [float(weight)] * self.n_devices
        devices = [replace(d, weight=float(w)) for d, w in zip(self.devices, weight)]
        return SystemConfig(tuple(devices), self.m_required, self.dest_aoi_cap)

    # -- JSON -----------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        devices = []
        for d in self.devices:
            entry: dict[str, Any] = {
                "kind": d.kind.value,
                "lambda": d.arrival_rate,
                "sampling_cost": d.sampling_cost,
                "tx_cost": list(d.tx_cost),
                "channel": {"values": list(d.channel.values), "probs": list(d.channel.probs)},
                "weight": d.weight,
            }
            if d.is_type1:
                entry["aoi_cap"] = d.aoi_cap
            devices.append(entry)
        return {"devices": devices, "m_required": self.m_required, "dest_aoi_cap": self.dest_aoi_cap}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: Any) -> "SystemConfig":
        if not isinstance(doc, dict):
            raise ConfigError("$", "expected a JSON object")
        raw_devices = _require(doc, "devices", "$", list)
        devices = [_device_from_dict(d, f"devices[{i}]") for i, d in enumerate(raw_devices)]
        m = _require(doc, "m_required", "$", int)
        cap = _require(doc, "dest_aoi_cap", "$", int)
        return cls(tuple(devices), m, cap)

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path: str | Path) -> "SystemConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _require(doc: dict, key: str, path: str, typ: type):
    prefix = "" if path == "$" else f"{path}."
    if key not in doc:
        raise ConfigError(f"{prefix}{key}", "missing required field")
    value = doc[key]
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{prefix}{key}", "must be an integer")
        return int(value)
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{prefix}{key}", "must be a number")
        return float(value)
    if typ is list:
        if not isinstance(value, list):
            raise ConfigError(f"{prefix}{key}", "must be a list")
        return value
    if not isinstance(value, typ):
        raise ConfigError(f"{prefix}{key}", f"must be of type {typ.__name__}")
    return value


def _number_list(doc: dict, key: str, path: str) -> list[float]:
    values = _require(doc, key, path, list)
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}.{key}[{i}]", "must be a number")
    return [float(v) for v in values]


def _device_from_dict(doc: Any, path: str) -> DeviceSpec:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    kind = _require(doc, "kind", path, str)
    try:
        kind = DeviceKind(kind)
    except ValueError:
        raise ConfigError(f"{path}.kind", "must be 'I' or 'II'") from None
    chan_doc = _require(doc, "channel", path, dict)
    channel = ChannelModel(
        tuple(_number_list(chan_doc, "values", f"{path}.channel")),
        tuple(_number_list(chan_doc, "probs", f"{path}.channel")),
    )
    kwargs: dict[str, Any] = {
        "kind": kind,
        "tx_cost": tuple(_number_list(doc, "tx_cost", path)),
        "channel": channel,
        "weight": _require(doc, "weight", path, float),
    }
    if "lambda" in doc:
        kwargs["arrival_rate"] = _require(doc, "lambda", path, float)
    if "sampling_cost" in doc:
        kwargs["sampling_cost"] = _require(doc, "sampling_cost", path, float)
    if kind is DeviceKind.TYPE_I:
        kwargs["aoi_cap"] = _require(doc, "aoi_cap", path, int)
        if "lambda" not in doc:
            raise ConfigError(f"{path}.lambda", "missing required field")
    dev = DeviceSpec(**kwargs)
    dev.validate(path)
    return dev


# -- states ---------------------------------------------------------------------


@dataclass(frozen=True)
class State:
    """``device_aoi`` holds one entry per device; type-II entries are 0."""

    device_aoi: tuple[int, ...]
    dest_aoi: int
    channel_idx: tuple[int, ...]


@dataclass(frozen=True)
class StateSpace:
    cfg: SystemConfig
    radices: tuple[int, ...]
    size: int
    strides: tuple[int, ...] = field(repr=False)

    @property
    def n_aoi(self) -> int:
        """Number of joint type-I age vectors."""
        return int(np.prod(self.radices[: self.cfg.n_type1], dtype=np.int64))

    @property
    def n_channel(self) -> int:
        return int(np.prod(self.radices[self.cfg.n_type1 + 1 :], dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(n_aoi, dest_aoi_cap, n_channel)``: the state array as three blocks."""
        return self.n_aoi, self.cfg.dest_aoi_cap, self.n_channel

    def flat_index(self, s: State) -> int:
        n1 = self.cfg.n_type1
        digits = [a - 1 for a in s.device_aoi[:n1]] + [s.dest_aoi - 1] + list(s.channel_idx)
        if len(digits) != len(self.radices):
            raise ValueError("state does not match this state space")
        idx = 0
        for d, r, st in zip(digits, self.radices, self.strides):
            if not 0 <= d < r:
                raise ValueError(f"state component out of range: {s}")
            idx += d * st
        return idx

    def state_of_index(self, i: int) -> State:
        if not 0 <= i < self.size:
            raise IndexError(i)
        digits = []
        for st, r in zip(self.strides, self.radices):
            digits.append((i // st) % r)
        n1 = self.cfg.n_type1
        n2 = self.cfg.n_devices - n1
        aoi = tuple(d + 1 for d in digits[:n1]) + (0,) * n2
        return State(aoi, digits[n1] + 1, tuple(int(d) for d in digits[n1 + 1 :]))

    def __iter__(self) -> Iterator[State]:
        for i in range(self.size):
            yield self.state_of_index(i)

    def aoi_vectors(self) -> np.ndarray:
        """All type-I age vectors (1-based) in encoding order, shape (n_aoi, N_1)."""
        ranges = [range(1, r + 1) for r in self.radices[: self.cfg.n_type1]]
        return np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(self.n_aoi, -1)

    def channel_vectors(self) -> np.ndarray:
        """All channel index vectors in encoding order, shape (n_channel, N)."""
        ranges = [range(r) for r in self.radices[self.cfg.n_type1 + 1 :]]
        return np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(self.n_channel, -1)


def enumerate_states(cfg: SystemConfig, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    radices = [d.aoi_cap for d in cfg.type1] + [cfg.dest_aoi_cap] + [len(d.channel) for d in cfg.devices]
    size = math.prod(radices)
    if size > cap:
        raise StateSpaceTooLarge(size, cap)
    strides = [1] * len(radices)
    for k in range(len(radices) - 2, -1, -1):
        strides[k] = strides[k + 1] * radices[k + 1]
    return StateSpace(cfg, tuple(radices), size, tuple(strides))


# -- actions --------------------------------------------------------------------

Action = tuple  # () for the empty schedule, else a sorted tuple of M device indices
EMPTY: Action = ()


@dataclass(frozen=True)
class ActionSpace:
    actions: tuple[Action, ...]
    n_devices: int

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, i: int) -> Action:
        return self.actions[i]

    def index_of(self, a: Sequence[int]) -> int:
        return self._lookup[tuple(sorted(a))]

    @property
    def _lookup(self) -> dict[Action, int]:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {a: i for i, a in enumerate(self.actions)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def members(self) -> np.ndarray:
        """Scheduled devices per action, shape (|U|, M); the empty row is -1."""
        m = max((len(a) for a in self.actions), default=0)
        out = np.full((len(self.actions), m), -1, dtype=np.int32)
        for i, a in enumerate(self.actions):
            out[i, : len(a)] = a
        return out


def enumerate_actions(cfg: SystemConfig) -> ActionSpace:
    subsets = itertools.combinations(range(cfg.n_devices), cfg.m_required)
    return ActionSpace((EMPTY, *subsets), cfg.n_devices)


def action_cost(cfg: SystemConfig, a: Action, s: State) -> float:
    """Weighted energy ``sum_n beta_n (C_n^s + C_n^u(h_n))`` over scheduled devices."""
    total = 0.0
    for n in sorted(a):
        dev = cfg.devices[n]
        total += dev.weight * dev.update_cost(s.channel_idx[n])
    return total


def next_dest_aoi(cfg: SystemConfig, s: State, a: Action) -> int:
    cap = cfg.dest_aoi_cap
    if len(a) == cfg.m_required:
        return min(max(s.device_aoi[n] for n in a) + 1, cap)
    return min(s.dest_aoi + 1, cap)


def device_aoi_successors(spec: DeviceSpec, aoi: int) -> list[tuple[int, float]]:
    """Next device age distribution of a type-I device, zero-mass branches dropped."""
    if not spec.is_type1:
        raise ValueError("age dynamics are only defined for type-I devices")
    if not 1 <= aoi <= spec.aoi_cap:
        raise ValueError(f"age {aoi} outside [1, {spec.aoi_cap}]")
    lam = spec.arrival_rate
    grown = min(aoi + 1, spec.aoi_cap)
    if grown == 1:
        return [(1, 1.0)]
    return [(t, p) for t, p in ((1, lam), (grown, 1.0 - lam)) if p > 0]
