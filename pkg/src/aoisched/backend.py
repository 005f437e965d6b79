"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise the
NumPy implementation in ``_pykernels``.  Setting ``AOISCHED_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pykernels

try:
    if os.environ.get("AOISCHED_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _active
    BACKEND = "cython"
except ImportError:
    _active = _pykernels
    BACKEND = "python"

channel_expectation = _active.channel_expectation
backup_min = _active.backup_min
simulate_table = _active.simulate_table

fallback = _pykernels
