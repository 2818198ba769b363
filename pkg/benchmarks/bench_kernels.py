"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--t-end 2] [--repeat 3]

Each kernel is called once before timing so numba compilation is excluded.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qcycle import ModelParams, _kernels
from qcycle.harness import run_trajectory
from qcycle.rates import build_generator, build_topology
from qcycle.states import surface_potential


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=2.0, help="trajectory length in us")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    p = ModelParams()
    topo = build_topology(p)
    x = -1.2
    V = float(surface_potential(x, p))
    out = np.empty(topo.src.size)
    gen = build_generator(x, p)
    P = np.full(256, 1 / 256)
    buf = np.empty(256)

    cases = {
        "channel rates (x1000)": (
            lambda: [_kernels.channel_rates_numpy(x, V, *topo.kernel_args(), out) for _ in range(1000)],
            lambda: [_kernels.channel_rates_numba(x, V, *topo.kernel_args(), out) for _ in range(1000)]),
        "uniformize dt=1e-3 (x1000)": (
            lambda: [_kernels.uniformize_numpy(P, gen.src, gen.dst, gen.rates, 1e-3, 1e-12, buf)
                     for _ in range(1000)],
            lambda: [_kernels.uniformize_numba(P, gen.src, gen.dst, gen.rates, 1e-3, 1e-12, buf)
                     for _ in range(1000)]),
    }

    def traj(kernel):
        def go():
            saved = _kernels.trajectory
            _kernels.trajectory = kernel
            try:
                run_trajectory(p, 1, args.t_end)
            finally:
                _kernels.trajectory = saved
        return go

    cases[f"trajectory {args.t_end:g} us"] = (traj(_kernels.trajectory_numpy),
                                              traj(_kernels.trajectory_numba))

    print(f"{'kernel':<30}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}")
    for name, (slow, fast) in cases.items():
        a, b = best_of(slow, args.repeat), best_of(fast, args.repeat)
        print(f"{name:<30}{a:>12.4f}{b:>12.4f}{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
