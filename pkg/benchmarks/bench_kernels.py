"""Benchmark the compiled sparse kernels against the NumPy fallback.

Times the three inner-loop primitives (masked row dot, scatter-add
adjoint, sum of squares) on a synthetic observation pattern and checks
that both backends produce the same numbers.

Usage: python benchmarks/bench_kernels.py [--m 2000] [--n 1500] [--r 10] [--p 0.1]
"""

import argparse
import time

import numpy as np


def _best_of(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--n", type=int, default=1500)
    ap.add_argument("--r", type=int, default=10)
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    from rankmin import _kernels_py
    try:
        from rankmin import _kernels
        backends = [("compiled", _kernels), ("python", _kernels_py)]
    except ImportError:
        print("compiled extension not built; timing the python backend only")
        backends = [("python", _kernels_py)]

    rng = np.random.default_rng(0)
    keep = rng.random((args.m, args.n)) < args.p
    rows, cols = (ix.astype(np.int64) for ix in np.nonzero(keep))
    nnz = len(rows)
    p_m = rng.standard_normal((args.m, args.r))
    p_n = rng.standard_normal((args.n, args.r))
    vals = rng.standard_normal(nnz)
    print(f"{args.m} x {args.n}, r={args.r}, |omega|={nnz}")

    results = {}
    for name, k in backends:
        t_dot = _best_of(lambda: k.masked_rowdot(rows, cols, p_m, p_n), args.repeats)
        t_adj = _best_of(lambda: k.scatter_add_rows(rows, cols, vals, p_n, args.m),
                         args.repeats)
        t_ss = _best_of(lambda: k.sum_sq(vals), args.repeats)
        results[name] = (t_dot, t_adj, t_ss)
        print(f"  {name:>8}: masked_rowdot {t_dot * 1e3:8.2f} ms   "
              f"scatter_add {t_adj * 1e3:8.2f} ms   sum_sq {t_ss * 1e3:8.2f} ms")

    if len(results) == 2:
        c, p = results["compiled"], results["python"]
        print("  speedup : " + "   ".join(
            f"{name} {pv / cv:5.1f}x"
            for name, cv, pv in zip(("masked_rowdot", "scatter_add", "sum_sq"), c, p)
        ))

    # a consistency spot check while both backends are loaded
    if len(backends) == 2:
        a = backends[0][1].masked_rowdot(rows, cols, p_m, p_n)
        b = backends[1][1].masked_rowdot(rows, cols, p_m, p_n)
        assert np.allclose(a, b, rtol=1e-12), "backend results diverge"
        print("  backends agree on masked_rowdot (rtol 1e-12)")


if __name__ == "__main__":
    main()
