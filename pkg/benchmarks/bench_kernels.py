"""Time the numpy and numba kernel backends on realistic shapes and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Shapes follow the default experiment: 100 training samples, d=2000,
projections up to k=2000. The first numba call per kernel includes
compilation (or a cache load) and is reported separately.
"""

import argparse
import time

import numpy as np

from sparse_rp.kernels import _numba, _numpy


def _best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def _cases(rng):
    d, k, n = 2000, 1000, 200
    # one nonzero per column, as in the StM ensemble
    indptr = np.arange(d + 1, dtype=np.int64)
    indices = rng.integers(0, k, d).astype(np.int64)
    data = np.where(rng.random(d) < 0.5, -1.0, 1.0) * np.sqrt(k)
    X = rng.standard_normal((n, d))

    m, s = 1 << 15, 10
    floyd = (rng.random((m, s)), np.where(rng.random((m, s)) < 0.5, 1.0, -1.0),
             np.where(rng.random((m, s)) < 0.5, 1.0, -1.0), rng.standard_normal((m, s)), 1000, 1000, 1.0, 0.0,
             np.sqrt(100.0))

    ns = 100
    P = rng.standard_normal((ns, 400))
    y = np.where(P[:, 0] + rng.standard_normal(ns) > 0, 1.0, -1.0)
    Q = np.ascontiguousarray((P @ P.T + 1.0) * np.outer(y, y))
    orders = rng.permuted(np.tile(np.arange(ns, dtype=np.int64), (100, 1)), axis=1)
    Z = np.hstack([P, np.ones((ns, 1))])

    return {
        "csc_project (n=200, d=2000, k=1000)": ("csc_project", (indptr, indices, data, X, k)),
        "floyd_abs_dot (32768 rows, s=10)": ("floyd_abs_dot", floyd),
        "pair_histogram (d=20, w=8)": ("pair_histogram", (20, 8)),
        "dcd_svm (n=100)": ("dcd_svm", (Q, np.full(ns, 1.0 / ns), orders, 1e-5)),
        "pegasos_svm (n=100, k=400)": ("pegasos_svm", (Z, y, 1.0, orders, 1e-5)),
    }


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return bool(np.allclose(np.asarray(a), np.asarray(b), rtol=1e-10, atol=1e-10))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<40} {'numpy s':>10} {'numba s':>10} {'speedup':>8} {'first call':>11}  agree")
    for label, (name, call_args) in _cases(rng).items():
        t0 = time.perf_counter()
        getattr(_numba, name)(*call_args)
        first = time.perf_counter() - t0
        t_np, out_np = _best_of(lambda: getattr(_numpy, name)(*call_args), args.repeat)
        t_nb, out_nb = _best_of(lambda: getattr(_numba, name)(*call_args), args.repeat)
        ok = _agree(out_np, out_nb)
        print(f"{label:<40} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {first:11.3f}  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
