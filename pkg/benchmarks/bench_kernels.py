#!/usr/bin/env python3
"""Compare the compiled kernels against the NumPy fallback.

Times the raw kernel passes and a full scenario x time evaluation on both
backends, and checks that the results agree bit for bit.  Sizes default to
the performance-contract workload (10000 scenarios x 100 steps, 10
sub-processes x 10 flows, 3 categories).

Usage:
    python benchmarks/bench_kernels.py [--scenarios N] [--timesteps N] [--repeat N]
"""

import argparse
import time

import numpy as np

from lcengine import (
    FlowDefinition,
    MatrixAmount,
    ProcessModel,
    ScalarAmount,
    ScenarioGrid,
    SubProcessDefinition,
    UnitValueTable,
    kernels,
    run_matrix,
)


def build_model(n_s, n_t, n_sp=10, n_flows=10, matrix_flows=2, seed=0):
    rng = np.random.default_rng(seed)
    cats = ("gwp", "ap", "water")
    sps = []
    for i in range(n_sp):
        flows = []
        for j in range(n_flows):
            if j < matrix_flows:
                amount = MatrixAmount(rng.uniform(0.5, 2.0, size=(n_s, n_t)))
            else:
                amount = ScalarAmount(float(rng.uniform(0.5, 2.0)))
            flows.append(FlowDefinition(
                f"f{i}_{j}", "inflow", amount,
                inline_unit_impact={c: float(rng.uniform(0.1, 3.0)) for c in cats},
                inline_unit_cost=float(rng.uniform(0.1, 3.0)),
            ))
        sps.append(SubProcessDefinition(f"sp{i}", ScalarAmount(1.0), tuple(flows)))
    return ProcessModel("bench", tuple(sps), ScenarioGrid(n_s, n_t), cats)


def time_call(fn, repeat):
    fn()  # warm allocator and caches
    best = min(timed(fn) for _ in range(repeat))
    return best


def timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def bench_kernel_passes(n_s, n_t, repeat):
    rng = np.random.default_rng(1)
    acc = np.zeros((n_s, n_t))
    x = rng.uniform(size=(n_s, n_t))
    u = rng.uniform(size=(n_s, n_t))
    em = rng.uniform(size=(min(n_s, 1000), n_t))
    taps = rng.uniform(size=11)
    out = np.zeros((em.shape[0], n_t + 10))
    cases = {
        "add_const": lambda: kernels.add_const(acc, 1.0),
        "add_scaled": lambda: kernels.add_scaled(acc, 1.0, x),
        "add_product": lambda: kernels.add_product(acc, u, x),
        "convolve_rows (11 taps)": lambda: kernels.convolve_rows_into(out, em, taps),
    }
    rows = []
    for name, fn in cases.items():
        per_backend = {}
        for backend in available_backends():
            with kernels.force_backend(backend):
                per_backend[backend] = time_call(fn, repeat)
        rows.append((name, per_backend))
    return rows


def available_backends():
    return ("cython", "numpy") if kernels.have_compiled() else ("numpy",)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenarios", type=int, default=10_000)
    parser.add_argument("--timesteps", type=int, default=100)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    print(f"default backend: {kernels.backend_name()} "
          f"(compiled available: {kernels.have_compiled()})")
    if not kernels.have_compiled():
        print("compiled kernels missing; reinstall without LCENGINE_NO_EXT to compare")

    print(f"\nkernel passes on {args.scenarios}x{args.timesteps} grids "
          f"(best of {args.repeat}):")
    for name, per_backend in bench_kernel_passes(args.scenarios, args.timesteps,
                                                 args.repeat):
        parts = "  ".join(f"{b}: {t * 1000:8.2f} ms" for b, t in per_backend.items())
        print(f"  {name:<24} {parts}")

    model = build_model(args.scenarios, args.timesteps)
    db = UnitValueTable(rows={})
    print(f"\nfull evaluation, 10 sub-processes x 10 flows x 3 categories "
          f"on {args.scenarios}x{args.timesteps} (best of {args.repeat}):")
    results = {}
    for backend in available_backends():
        with kernels.force_backend(backend):
            results[backend] = run_matrix(model, db)
            best = time_call(lambda: run_matrix(model, db), args.repeat)
        print(f"  {backend:<8} {best:8.2f} s")

    if len(results) == 2:
        a, b = results["cython"], results["numpy"]
        identical = all(
            np.array_equal(a.impacts[c], b.impacts[c]) for c in a.categories
        ) and np.array_equal(a.cost, b.cost)
        print(f"\nbackends bit-identical: {identical}")


if __name__ == "__main__":
    main()
