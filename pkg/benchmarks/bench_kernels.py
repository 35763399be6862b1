"""Timing comparison of the two trajectory kernels.

Runs the same frozen workloads through the compiled batch kernel and the
pure-Python fallback, checks that the outputs agree byte for byte, and
reports per-trajectory cost and speedup.

Usage: python benchmarks/bench_kernels.py [--samples 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from qcond import eprmc
from qcond.models import GroverSpec, IsingChainSpec

try:
    from qcond import _ctmc
except ImportError:
    _ctmc = None


def run_batch(mod, spec, start, t, n, seed, track=None):
    vkind, vu64, vf64 = spec.potential.kernel_params()
    weights = np.empty(n)
    finals = np.empty(n, dtype=np.uint64)
    njumps = np.empty(n, dtype=np.int64)
    kt = np.zeros(n, dtype=np.int64)
    lt = np.zeros(n, dtype=np.int64)
    qt = np.zeros(n, dtype=np.int64)
    mod.run_batch(seed, 0, n, spec.n_qubits, spec.gamma, t, start,
                  vkind, vu64, vf64, track, weights, finals, njumps,
                  kt, lt, qt)
    return weights, finals, njumps


def time_batch(mod, spec, start, t, n, seed, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run_batch(mod, spec, start, t, n, seed)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    from qcond import _ctmc_py

    cases = [
        ("grover N=5 G=0.7 t=1.5", GroverSpec(n_qubits=5, j=1.0, gamma=0.7).model(), 3, 1.5),
        ("grover N=8 G=0.5 t=1.0", GroverSpec(n_qubits=8, j=1.0, gamma=0.5).model(), 0, 1.0),
        ("ising  N=6 G=0.4 t=2.0", IsingChainSpec(n_qubits=6, j=1.0, gamma=0.4, k=1).model(), 9, 2.0),
    ]

    print(f"active backend: {eprmc.kernel_backend()}")
    print(f"{args.samples} trajectories per case, best of {args.repeat}\n")
    header = f"{'case':26s} {'pure us/traj':>13s} {'compiled us/traj':>17s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, spec, start, t in cases:
        t_pure, out_pure = time_batch(_ctmc_py, spec, start, t,
                                      args.samples, 12345, args.repeat)
        us_pure = 1e6 * t_pure / args.samples
        if _ctmc is None:
            print(f"{label:26s} {us_pure:13.3f} {'(not built)':>17s} {'-':>8s}")
            continue
        t_c, out_c = time_batch(_ctmc, spec, start, t,
                                args.samples, 12345, args.repeat)
        for a, b in zip(out_pure, out_c):
            if a.tobytes() != b.tobytes():
                raise SystemExit(f"backend mismatch on {label}")
        us_c = 1e6 * t_c / args.samples
        print(f"{label:26s} {us_pure:13.3f} {us_c:17.3f} {t_pure / t_c:7.1f}x")


if __name__ == "__main__":
    main()
