"""Solved-instance artifacts and CSV output.

An artifact is a zip archive holding ``meta.json`` plus ``.npy`` arrays.
Entries carry a fixed timestamp and a fixed order so identical solves give
byte-identical files.  Wall-clock times are deliberately not stored.
"""

from __future__ import annotations

import csv
import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import SystemConfig
from .solver import PolicyTable, SolveReport, ValueFunction
from .special_case import ReducedModel, ReducedValueFunction

FORMAT = "aoisched-artifact"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


class ArtifactError(ValueError):
    pass


def _write_zip(path: Path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_EPOCH)
        info.compress_type = zipfile.ZIP_DEFLATED
        zf.writestr(info, json.dumps(meta, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, buf.getvalue())


def _read_zip(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            arrays = {}
            for name in zf.namelist():
                if name.endswith(".npy"):
                    arrays[name[:-4]] = np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{path}: not a valid artifact ({exc})") from None
    if meta.get("format") != FORMAT or meta.get("version") != VERSION:
        raise ArtifactError(f"{path}: unsupported artifact format {meta.get('format')!r} v{meta.get('version')!r}")
    return meta, arrays


@dataclass
class FullSolution:
    cfg: SystemConfig
    value: ValueFunction
    policy: PolicyTable
    report: SolveReport


@dataclass
class ReducedSolution:
    model: ReducedModel
    value: ReducedValueFunction
    transmit: np.ndarray
    report: SolveReport


def save_full(path, sol: FullSolution) -> None:
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "kind": "full",
        "config": sol.cfg.to_dict(),
        "theta": sol.value.theta,
        "iterations": sol.report.iterations,
        "final_span": sol.report.final_span,
    }
    _write_zip(path, meta, {"v": sol.value.v, "policy": sol.policy.action_idx.astype(np.int32)})


def save_reduced(path, sol: ReducedSolution) -> None:
    m = sol.model
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "kind": "reduced",
        "config": m.cfg.to_dict(),
        "theta": sol.value.theta,
        "iterations": sol.report.iterations,
        "final_span": sol.report.final_span,
    }
    arrays = {
        "v": sol.value.v,
        "transmit": sol.transmit.astype(np.uint8),
        "ch_values": m.ch_values,
        "ch_probs": m.ch_probs,
        "designated": m.designated,
        "ch_index": m.ch_index,
    }
    _write_zip(path, meta, arrays)


def load(path) -> FullSolution | ReducedSolution:
    meta, arrays = _read_zip(Path(path))
    cfg = SystemConfig.from_dict(meta["config"])
    report = SolveReport(meta["iterations"], meta["final_span"], meta["theta"], float("nan"), backend="stored")
    if meta["kind"] == "full":
        return FullSolution(cfg, ValueFunction(arrays["v"], meta["theta"]), PolicyTable(arrays["policy"]), report)
    if meta["kind"] == "reduced":
        model = ReducedModel(cfg, arrays["ch_values"], arrays["ch_probs"], arrays["designated"], arrays["ch_index"])
        value = ReducedValueFunction(arrays["v"], meta["theta"])
        return ReducedSolution(model, value, arrays["transmit"].astype(bool), report)
    raise ArtifactError(f"{path}: unknown artifact kind {meta['kind']!r}")


def write_csv(target, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows to a path, or to an open text stream when ``target`` has ``write``."""
    if hasattr(target, "write"):
        _emit(target, header, rows)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        _emit(fh, header, rows)


def _emit(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
