"""Reaching kernel: numba vs pure numpy (and the scalar python loop).

    python3 benchmarks/bench_reaching.py [--repeat 5]

Graphs have m layers of s points each; the kernel relaxes (m - 1) s^2 + 2 s
edges. The numba timing excludes compilation (one warm-up call first).
"""
import argparse
import time

import numpy as np

from gnmcal._accel import HAVE_NUMBA
from gnmcal._kernels import _reach_python, reach
from gnmcal.dataset import ModelDataset, PhysicalDataset
from gnmcal.graph import build_graph

SHAPES = [(15, 30), (30, 30), (30, 100), (100, 100), (50, 400)]


def make_graph(m, s, seed=0):
    rng = np.random.default_rng(seed)
    xc = np.repeat(np.arange(m, dtype=float), s) + rng.uniform(-0.4, 0.4, m * s)
    physical = PhysicalDataset(np.arange(m, dtype=float), rng.uniform(-1, 1, m))
    model = ModelDataset(xc, rng.uniform(0, 3, m * s), rng.uniform(-1, 1, m * s))
    return build_graph(physical, model, 0.3)


def kernel_args(g):
    p = g.partition
    return (p.offsets, p.members, g.model.y, g.model.theta, g.physical.y, g.lam,
            g.terminal_response)


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--python", action="store_true", help="also time the scalar python loop")
    args = ap.parse_args()

    if HAVE_NUMBA:
        reach(*kernel_args(make_graph(3, 3)), use_numba=True)   # compile
    else:
        print("numba not installed: timing the numpy kernel only")

    print(f"{'m':>4} {'s':>5} {'edges':>10} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}"
          + (f" {'python ms':>10}" if args.python else ""))
    for m, s in SHAPES:
        g = make_graph(m, s)
        a = kernel_args(g)
        t_np = best_time(lambda: reach(*a, use_numba=False), args.repeat)
        line = f"{m:>4} {s:>5} {g.edge_count:>10} {1e3 * t_np:>10.3f}"
        if HAVE_NUMBA:
            t_nb = best_time(lambda: reach(*a, use_numba=True), args.repeat)
            # both paths must agree bit for bit
            assert np.array_equal(reach(*a, use_numba=False)[0], reach(*a, use_numba=True)[0])
            line += f" {1e3 * t_nb:>10.3f} {t_np / t_nb:>7.1f}x"
        else:
            line += f" {'-':>10} {'-':>8}"
        if args.python and g.edge_count <= 10 ** 6:
            t_py = best_time(lambda: _reach_python(*a), 1)
            line += f" {1e3 * t_py:>10.1f}"
        print(line)


if __name__ == "__main__":
    main()
