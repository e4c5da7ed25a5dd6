"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel on a quadrature-sized workload with both backends
and prints timings plus speedups. Usage:

    python benchmarks/bench_kernels.py [--points 1000000] [--repeats 5]

The same selection is available at runtime through XI_S3_BACKEND.
"""

import argparse
import time

import numpy as np

from xi_s3 import kernels
from xi_s3.harmonics import harmonic_basis
from xi_s3.quaternion import haar_array


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=1_000_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    numpy_impls = kernels.implementations("numpy")
    try:
        numba_impls = kernels.implementations("numba")
    except Exception as e:
        raise SystemExit(f"numba backend unavailable: {e}")

    pts = haar_array(1, args.points)
    basis = harmonic_basis(4)
    exps, coefs, offsets = kernels.pack_polys(basis.elements)
    single_exps, single_coefs = basis.elements[0].to_arrays()
    a = haar_array(2, args.points)
    b = haar_array(3, args.points)

    workloads = {
        "eval_poly (25-term degree-4, %.0e pts)" % args.points:
            lambda impl: impl["eval_poly"](pts, single_exps, single_coefs),
        "eval_poly_packed (25 basis polys)":
            lambda impl: impl["eval_poly_packed"](pts, exps, coefs, offsets),
        "hamilton (%.0e products)" % args.points:
            lambda impl: impl["hamilton"](a, b),
    }

    # trigger jit compilation outside the timed region
    for run in workloads.values():
        run(numba_impls)

    print(f"{'kernel':<45} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, run in workloads.items():
        t_np = best_of(lambda: run(numpy_impls), args.repeats)
        t_nb = best_of(lambda: run(numba_impls), args.repeats)
        print(f"{name:<45} {t_np:>9.4f}s {t_nb:>9.4f}s {t_np / t_nb:>8.2f}x")

    ref = numpy_impls["eval_poly_packed"](pts[:1000], exps, coefs, offsets)
    alt = numba_impls["eval_poly_packed"](pts[:1000], exps, coefs, offsets)
    print(f"\nbackends agree within {np.max(np.abs(ref - alt)):.2e}")


if __name__ == "__main__":
    main()
