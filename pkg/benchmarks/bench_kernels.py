"""Compare the numba and numpy kernel backends on realistic batch sizes.

Run:  python benchmarks/bench_kernels.py [N ...]

The batch layout matches the nonlinear solver: N quadrature nodes, one
3x3 deformation gradient and one weight per node.  The numba path is
warmed up before timing so compilation is excluded.
"""

import sys
import time

import numpy as np

from traction_gap import _kernels as K


def timeit(fn, *args, repeats=20):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(sizes):
    if not K.HAVE_NUMBA:
        print("numba not available: only the numpy path can be timed")
    pairs = [
        ("ksv_density_sum", "_ksv_density_sum_nb", "ksv_density_sum_np"),
        ("ksv_weighted_stress", "_ksv_weighted_stress_nb", "ksv_weighted_stress_np"),
        ("det_penalty_sum", "_det_penalty_sum_nb", "det_penalty_sum_np"),
        ("det_penalty_weighted_stress", "_det_penalty_weighted_stress_nb",
         "det_penalty_weighted_stress_np"),
        ("sym_norm_sq_sum", "_sym_norm_sq_sum_nb", "sym_norm_sq_sum_np"),
    ]
    rng = np.random.default_rng(0)
    print(f"{'kernel':<30} {'N':>8} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8}")
    for n in sizes:
        F = np.ascontiguousarray(np.eye(3) + 0.1 * rng.normal(size=(n, 3, 3)))
        w = np.ascontiguousarray(rng.uniform(0.1, 1.0, n))
        for label, nb_name, np_name in pairs:
            plain = getattr(K, np_name)
            t_np = timeit(plain, F, w)
            if K.HAVE_NUMBA:
                fast = getattr(K, nb_name)
                fast(F, w)  # warm-up / compile
                t_nb = timeit(fast, F, w)
                print(f"{label:<30} {n:>8} {1e3 * t_np:>12.3f} {1e3 * t_nb:>12.3f} "
                      f"{t_np / t_nb:>8.1f}x")
            else:
                print(f"{label:<30} {n:>8} {1e3 * t_np:>12.3f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    sizes = [int(a) for a in sys.argv[1:]] or [4096, 32768]
    main(sizes)
