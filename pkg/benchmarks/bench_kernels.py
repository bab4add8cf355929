"""Time the compiled and pure-numpy batch kernels on identical inputs.

    python benchmarks/bench_kernels.py [--paths 128] [--steps 2000] [--repeat 3]

The default batch is one experiment chunk (128 paths).  The numpy fallback
vectorizes across paths, so it catches up on very wide batches.  EM paths
blow up within a few steps and the compiled kernel stops there, so its EM
timing is not a like-for-like comparison.
"""

import argparse
import time

import numpy as np

from semidiscrete import kernels
from semidiscrete.analysis import CHUNK, estimate_strong_order, simulate_paths
from semidiscrete.noise import aux_normal_matrix, increment_matrix
from semidiscrete.schemes import IntegralMode, Scheme


def bench(scheme: Scheme, dw, aux, dt, backend, repeat):
    code, cap = scheme.kernel_args(dt)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = kernels.run_batch(code, 10.0, dw, dt, cap, scheme.exact, aux, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=CHUNK)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    ids = range(args.paths)
    dw = increment_matrix(0, ids, args.steps, args.dt)
    aux = aux_normal_matrix(0, ids, args.steps)
    backends = kernels.available_backends()
    print(f"{args.paths} paths x {args.steps} steps, backends: {', '.join(backends)}")
    print(f"{'scheme':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    cases = [Scheme.default(k) for k in ("TSD", "EXP_TSD", "LSD", "TEM", "EM")]
    cases.append(Scheme.default("TSD", IntegralMode.EXACT_GAUSSIAN))
    for sch in cases:
        label = sch.name + (" (exact)" if sch.exact else "")
        times, results = [], []
        for b in backends:
            t, term = bench(sch, dw, aux if sch.exact else None, args.dt, b, args.repeat)
            times.append(t)
            results.append(term)
        if len(results) == 2:
            np.testing.assert_allclose(results[0], results[1], rtol=1e-12, equal_nan=True)
        speed = f"{times[1] / times[0]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<22}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + speed)

    print("\nend to end (noise generation included)")
    for b in backends:
        t0 = time.perf_counter()
        simulate_paths("TSD", 10.0, 0.05, 50.0, 2000, record=False, backend=b)
        t1 = time.perf_counter()
        estimate_strong_order("EXP_TSD", n_paths=1000, backend=b)
        t2 = time.perf_counter()
        print(f"  {b:<8} 2000 paths x 1000 steps: {t1 - t0:.2f}s   strong-order run, 1000 paths: {t2 - t1:.2f}s")


if __name__ == "__main__":
    main()
