"""Benchmark the subproblem kernel: compiled extension vs pure-numpy twin.

The reweighted HPSD update loop is the hot kernel of both solvers; at the
small matrix sides the solvers mostly see (9-100), per-iteration Python
overhead is comparable to the LAPACK work, which is what the extension
removes.

Run:  python3 benchmarks/bench_subproblem.py
"""

import time

import numpy as np

from stpca import _kernels
from stpca._kernels import _subproblem_py
from stpca.dp import init_recon


def bench(impl, s, a0, lam, eta, repeat):
    best = np.inf
    iters = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        _, iters, _ = impl.solve_subproblem(s, lam, eta, 1e-12, 1e-8, a0,
                                            tol=1e-8, max_iter=50)
        best = min(best, time.perf_counter() - t0)
    return best, iters


def main():
    try:
        from stpca._kernels import _subproblem_cy
    except ImportError:
        _subproblem_cy = None
    print(f"active backend: {_kernels.BACKEND}")
    if _subproblem_cy is None:
        print("extension not built; benchmarking the pure backend only")

    rng = np.random.default_rng(0)
    print(f"{'side':>6} {'n':>6} {'python':>16} {'compiled':>16} {'speedup':>8}")
    for b, n in ((9, 4100), (15, 4100), (10, 8000), (42, 280), (100, 800)):
        x = rng.standard_normal((b, n)) + 1j * rng.standard_normal((b, n))
        s = x @ x.conj().T
        a0 = init_recon(b, 1)
        lam, eta = float(np.trace(s).real / b) * 0.05, 1.0
        repeat = 5 if b < 50 else 3
        t_py, it_py = bench(_subproblem_py, s, a0, lam, eta, repeat)
        if _subproblem_cy is not None:
            t_cy, it_cy = bench(_subproblem_cy, s, a0, lam, eta, repeat)
            print(f"{b:>6} {n:>6} {t_py * 1e3:>9.2f}ms/{it_py:>3}it "
                  f"{t_cy * 1e3:>9.2f}ms/{it_cy:>3}it {t_py / t_cy:>7.2f}x")
        else:
            print(f"{b:>6} {n:>6} {t_py * 1e3:>9.2f}ms/{it_py:>3}it {'-':>16} {'-':>8}")


if __name__ == "__main__":
    main()
