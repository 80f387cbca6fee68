#!/usr/bin/env python3
"""Benchmark: compiled tree-projection kernel vs the NumPy fallback.

The projection is the hot kernel of every solver iteration, so this is the
speedup that decides end-to-end solver throughput.  Run:

    python benchmarks/bench_projection.py
"""

from __future__ import annotations

import time

import numpy as np

from treeitp import _projection_py
from treeitp.trees import build_complete_tree

try:
    from treeitp import _projection_core
except ImportError:
    _projection_core = None

CASES = [
    (127, 2, 5),
    (1023, 2, 10),
    (1023, 2, 40),
    (4095, 2, 40),
    (4095, 2, 128),
    (1365, 4, 40),
]
REPEATS = 5


def run_kernel(mod, topo, energies, k):
    start, flat = topo._csr
    return mod.project_kernel(start, flat, topo.post_order, topo.subtree_size,
                              topo.root, energies, k)


def time_kernel(mod, topo, energies, k) -> float:
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        run_kernel(mod, topo, energies, k)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    rng = np.random.default_rng(0)
    print(f"{'N':>6} {'d':>3} {'k':>5} {'python':>12} {'native':>12} {'speedup':>9}")
    for n, d, k in CASES:
        topo = build_complete_tree(n, d)
        energies = rng.normal(size=n) ** 2
        t_py = time_kernel(_projection_py, topo, energies, k)
        if _projection_core is None:
            print(f"{n:>6} {d:>3} {k:>5} {t_py * 1e3:>10.2f}ms {'absent':>12} {'':>9}")
            continue
        t_c = time_kernel(_projection_core, topo, energies, k)
        s_py = run_kernel(_projection_py, topo, energies, k)
        s_c = run_kernel(_projection_core, topo, energies, k)
        assert np.array_equal(s_py, s_c), "backends disagree"
        print(f"{n:>6} {d:>3} {k:>5} {t_py * 1e3:>10.2f}ms {t_c * 1e3:>10.2f}ms "
              f"{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
