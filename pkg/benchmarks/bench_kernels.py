#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times the four hot kernels on a square grid and one full assignment solve
per backend, then prints a speedup table.

    python3 benchmarks/bench_kernels.py --size 128 --repeats 20
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from denseroute import backend, scenario_from_dict, solve_global
from denseroute.kernels import get_kernels


def time_call(fn, repeats):
    fn()  # warm-up (and numba compilation)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def kernel_benchmarks(n, repeats):
    rng = np.random.default_rng(0)
    east = rng.random((n - 1, n)) + 0.01
    south = rng.random((n, n - 1)) + 0.01
    target = np.zeros((n, n), dtype=bool)
    target[-1, -1] = True
    inject = rng.random((n, n)) * 0.1
    inject[-1, -1] = 0.0
    a1 = rng.random((n - 1, n)) + 0.5
    a2 = rng.random((n, n - 1)) + 0.5
    x = rng.standard_normal((n, n))
    c1 = rng.random((n, n)) + 0.1
    c2 = rng.random((n, n)) + 0.1
    h = 1.0 / n
    node = (np.arange(n) + 0.5) * h

    rows = {}
    for name in ("numpy", "numba"):
        if name == "numba" and not backend.numba_available():
            continue
        k = get_kernels(name)
        _, policy = k["value_sweep"](east, south, target)
        rows.setdefault("value_sweep", {})[name] = time_call(
            lambda: k["value_sweep"](east, south, target), repeats)
        rows.setdefault("load_greedy_flows", {})[name] = time_call(
            lambda: k["load_greedy_flows"](policy, inject, h, h), repeats)
        rows.setdefault("apply_flux_laplacian", {})[name] = time_call(
            lambda: k["apply_flux_laplacian"](a1, a2, x, h, h), repeats)
        rows.setdefault("lattice_edge_costs", {})[name] = time_call(
            lambda: k["lattice_edge_costs"](c1, c2, h, h, node, node), repeats)
    return rows


def solver_benchmark(n, tol):
    doc = {
        "grid": {"a": 1.0, "b": 1.0, "nx": n, "ny": n},
        "cost_model": {"type": "affine", "k1": 1.0, "k2": 1.2,
                       "h1": 0.05, "h2": 0.0},
        "demand": [{"class": 0, "cells": [{"cell": [0, 0], "rate": 1.0},
                                          {"cell": [n - 1, n - 1], "rate": -1.0}]}],
        "solver": {"tol": tol, "max_iters": 200000},
    }
    rows = {}
    for name in ("numpy", "numba"):
        if name == "numba" and not backend.numba_available():
            continue
        backend.set_backend(name)
        try:
            solve_global(scenario_from_dict(doc))  # warm-up / compile
            start = time.perf_counter()
            result = solve_global(scenario_from_dict(doc))
            rows[name] = (time.perf_counter() - start, result.iterations)
        finally:
            backend._active = None
    return rows


def main():
    parser = argparse.ArgumentParser(description="denseroute kernel benchmark")
    parser.add_argument("--size", type=int, default=128, help="grid side length")
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--solver-size", type=int, default=32)
    parser.add_argument("--solver-tol", type=float, default=1e-3)
    args = parser.parse_args()

    print(f"kernels at {args.size}x{args.size}, mean of {args.repeats} runs")
    print(f"{'kernel':24s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name, times in kernel_benchmarks(args.size, args.repeats).items():
        t_np = times.get("numpy")
        t_nb = times.get("numba")
        if t_nb is None:
            print(f"{name:24s} {t_np * 1e3:10.3f}ms {'n/a':>12s}")
            continue
        print(f"{name:24s} {t_np * 1e3:10.3f}ms {t_nb * 1e3:10.3f}ms "
              f"{t_np / t_nb:8.1f}x")

    print(f"\nfull assignment solve at {args.solver_size}x{args.solver_size}, "
          f"gap tolerance {args.solver_tol:g}")
    rows = solver_benchmark(args.solver_size, args.solver_tol)
    for name, (seconds, iters) in rows.items():
        print(f"{name:24s} {seconds:10.2f}s   ({iters} iterations)")
    if len(rows) == 2:
        print(f"{'speedup':24s} {rows['numpy'][0] / rows['numba'][0]:10.1f}x")


if __name__ == "__main__":
    main()
