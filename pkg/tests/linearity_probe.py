"""Subprocess body for the sample-linearity measurement.

Run as a fresh interpreter so heap and BLAS-pool state from earlier tests
cannot distort the wall-time comparison; prints a JSON dict of 2n/n ratios.
"""

import contextlib
import ctypes
import json
import sys
import time

import numpy as np


def timing_hygiene():
    # single-threaded BLAS plus heap reuse for multi-MB temporaries; both
    # otherwise dominate the measurement on small shared machines
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 64 << 20)  # M_MMAP_THRESHOLD
    except OSError:  # pragma: no cover
        pass
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=1)
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()


def main() -> int:
    hygiene = timing_hygiene()

    from stpca import dp, mp
    from stpca.dp import DpConfig
    from stpca.mp import MpConfig
    from stpca.tensor import DIR1, DIR2, DenseTensor, centralize

    rng = np.random.default_rng(0)
    n = 2000
    datasets = {}
    for count in (n, 2 * n):
        arr = (rng.standard_normal((8, 8, count))
               + 1j * rng.standard_normal((8, 8, count)))
        datasets[count] = centralize(DenseTensor(arr), 3)

    # negative tolerances disable every early exit: both sizes do identical
    # structural work
    def dp_fit(count, variant):
        dp.fit(datasets[count],
               DpConfig(variant=variant, lam=1.0, eta=1.0, tol=-1.0, max_iter=6,
                        inner_tol=-1.0, inner_max_iter=8))

    def mp_fit(count, order_set):
        mp.fit(datasets[count],
               MpConfig(order_set=order_set, lam=1.0, eta=1.0, tol=-1.0, max_iter=10))

    def best_time(fn, count):
        best = float("inf")
        for _ in range(5):
            t0 = time.perf_counter()
            fn(count)
            best = min(best, time.perf_counter() - t0)
        return best

    ratios = {}
    with hygiene:
        for variant in ("1sd", "2sd", "md"):
            fn = lambda c, v=variant: dp_fit(c, v)
            fn(n)  # warmup
            ratios[f"dp-{variant}"] = best_time(fn, 2 * n) / best_time(fn, n)
        for name, order_set in (("mp-dir1", DIR1), ("mp-dir2", DIR2)):
            fn = lambda c, o=order_set: mp_fit(c, o)
            fn(n)
            ratios[name] = best_time(fn, 2 * n) / best_time(fn, n)
    print(json.dumps(ratios))
    return 0


if __name__ == "__main__":
    sys.exit(main())
