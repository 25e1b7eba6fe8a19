"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once first so JIT compilation stays out of the timings.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from wavepwr import _accel, kernels
from wavepwr.generators import planted_partition, ring_of_pairs
from wavepwr.graph import build_normalized_laplacian


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    cases = []
    steps = 2000
    graphs = [
        ("small", [50, 50], 0.2, 0.02),
        ("sparse", [2000, 2000], 0.005, 0.0005),
        ("dense rows", [680, 320], 0.3, 0.01),
    ]
    for label, blocks, p_in, p_out in graphs:
        g, _ = planted_partition(blocks, p_in, p_out, 1)
        L = build_normalized_laplacian(g).sparse()
        u0 = np.random.default_rng(0).random(g.n)
        cases.append((f"wave {label} n={g.n} nnz={L.nnz}",
                      lambda L=L, u0=u0: kernels.wave_propagate_numba(L, u0, 1.4, steps),
                      lambda L=L, u0=u0: kernels.wave_propagate_numpy(L, u0, 1.4, steps)))

    K = sp.csr_matrix(ring_of_pairs(40))
    rng = np.random.default_rng(1)
    batch = 10_000
    x = rng.normal(size=(batch, 80))
    omega = rng.random((batch, 80))
    rows = np.arange(80)
    cases.append((f"kuramoto rhs batch={batch} n=80",
                  lambda: kernels.kuramoto_rhs_numba(K, x, omega, rows),
                  lambda: kernels.kuramoto_rhs_numpy(K, x, omega, rows)))

    print(f"wave steps per run: {steps}")
    print(f"{'kernel':<44} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8}")
    for name, fast, slow in cases:
        a, b = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:<44} {a * 1e3:11.2f} {b * 1e3:11.2f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
