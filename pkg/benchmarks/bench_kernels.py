"""Compare the compiled and NumPy kernel backends on backups and simulation.

    python benchmarks/bench_kernels.py [--channels 5] [--slots 200000]

Prints one CSV row per (operation, backend) with the best-of-N wall time and
checks that both backends produce bit-identical output.
"""

import argparse
import sys
import time

import numpy as np

from aoisched import _pykernels, backend
from aoisched.experiments import ExperimentSpec, generate_instance
from aoisched.kernel import FactoredKernel
from aoisched.sim import random_policy, simulate


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--channels", type=int, default=5, help="channel states per device")
    p.add_argument("--slots", type=int, default=200_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    if backend.BACKEND != "cython":
        print("compiled kernels are not built; only the NumPy backend is available", file=sys.stderr)
    from importlib import import_module

    kernels = {"python": _pykernels}
    try:
        kernels["cython"] = import_module("aoisched._kernels")
    except ImportError:
        pass

    cfg = generate_instance(ExperimentSpec(n_channel=args.channels), 0)
    kern = FactoredKernel(cfg)
    n_aoi, n_dest, n_ch = kern.space.shape
    v = np.random.default_rng(0).normal(size=kern.space.size)
    base = kern.action_base(v)
    pol = random_policy(cfg, 0)

    print("operation,backend,states,seconds")
    results = {}
    for name, mod in kernels.items():
        def backup():
            out = np.empty((n_aoi * n_dest, n_ch))
            arg = np.empty((n_aoi * n_dest, n_ch), dtype=np.int32)
            mod.backup_min(base, kern.cost, out, arg)
            return out, arg

        def expectation():
            out = np.empty(n_aoi * n_dest)
            mod.channel_expectation(v.reshape(n_aoi * n_dest, n_ch), kern.channel_probs, out)
            return out

        def sim():
            return simulate(cfg, pol, args.slots, 0, kernels=mod)

        for op, fn in (("backup_min", backup), ("channel_expectation", expectation), ("simulate", sim)):
            secs, out = best_of(fn, args.repeat)
            results[(op, name)] = out
            print(f"{op},{name},{kern.space.size},{secs:.4f}")

    if "cython" in kernels:
        same = (
            all(np.array_equal(a, b) for a, b in zip(results[("backup_min", "cython")], results[("backup_min", "python")]))
            and np.array_equal(results[("channel_expectation", "cython")], results[("channel_expectation", "python")])
            and results[("simulate", "cython")] == results[("simulate", "python")]
        )
        print(f"# outputs bit-identical: {same}", file=sys.stderr)
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
