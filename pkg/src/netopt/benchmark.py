"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run as ``netopt benchmark`` or ``python -m netopt.benchmark``.  Each kernel is
timed on a representative workload and the backends' outputs are compared.
Set NETOPT_NO_NUMBA=1 to force the rest of the package onto the numpy path.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from . import _kernels


def _time(fn, *args, repeat=3):
    best = math.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def run_benchmarks(dp_size: int = 512, series_t: float = 0.9999,
                   bridge_paths: int = 2048) -> None:
    impls = _kernels.IMPLEMENTATIONS
    if "numba" not in impls:
        print("numba backend unavailable (NETOPT_NO_NUMBA set or import failed); "
              "timing the numpy fallback only")
    rows = []

    # partition DP on a synthetic grid problem
    rng = np.random.default_rng(0)
    grid = np.linspace(0.0, 1.0, dp_size + 1)
    dk = np.concatenate([[0.0], rng.random(dp_size - 1) * 1e-3, [0.0]])
    dg2 = np.concatenate([[0.0], rng.random(dp_size - 1) * 1e-3, [0.0]])
    tail = np.concatenate([rng.random(dp_size) * 1e-2, [0.0]])
    n_cells = min(128, dp_size // 2)
    for name, impl in impls.items():
        if name == "numba":  # compile outside the timed region
            impl["build_cost"](grid, dk, dg2, tail)
        t_cost, cost = _time(impl["build_cost"], grid, dk, dg2, tail)
        if name == "numba":
            impl["dp_solve"](np.asarray(cost), n_cells)
        t_dp, out = _time(impl["dp_solve"], np.asarray(cost), n_cells)
        rows.append((f"build_cost (M={dp_size})", name, t_cost, None))
        rows.append((f"dp_solve (M={dp_size}, n={n_cells})", name, t_dp, out[0]))

    for name, impl in impls.items():
        if name == "numba":
            impl["log_series_sum"](1.5, series_t, 1e-10, 1 << 26)
        t, out = _time(impl["log_series_sum"], 1.5, series_t, 1e-10, 1 << 26)
        rows.append((f"log_series_sum (t={series_t})", name, t, out[0]))

    m = 4096
    z = np.random.default_rng(1).standard_normal((bridge_paths, m))
    for name, impl in impls.items():
        if name == "numba":
            impl["bridge_fill"](z[:2], m)
        t, out = _time(impl["bridge_fill"], z, m)
        rows.append((f"bridge_fill ({bridge_paths}x{m})", name, t, float(out[0, m // 2])))

    width = max(len(r[0]) for r in rows) + 2
    print(f"{'kernel':<{width}}{'backend':<9}{'seconds':>12}   value")
    groups: dict[str, dict[str, float]] = {}
    for kernel, backend, seconds, value in rows:
        print(f"{kernel:<{width}}{backend:<9}{seconds:>12.6f}   "
              f"{'' if value is None else f'{value:.12g}'}")
        groups.setdefault(kernel, {})[backend] = seconds
    print()
    for kernel, times in groups.items():
        if "numba" in times and "numpy" in times:
            print(f"{kernel}: numba speedup x{times['numpy'] / times['numba']:.1f}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dp-size", type=int, default=512)
    ap.add_argument("--series-t", type=float, default=0.9999)
    ap.add_argument("--bridge-paths", type=int, default=2048)
    args = ap.parse_args(argv)
    run_benchmarks(args.dp_size, args.series_t, args.bridge_paths)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
