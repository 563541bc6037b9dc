"""Timing comparison of the jitted and pure-numpy Gram kernels.

Runs both implementations directly (no env flag needed) on batch sizes
covering the training regime and prints a table of per-call times.

    python3 benchmarks/bench_backends.py [--repeats 50]
"""

import argparse
import time

import numpy as np

from condalign import _gram_numpy
from condalign.kernels import KernelSpec

try:
    from condalign import _gram_numba
except ImportError:
    _gram_numba = None


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--dim", type=int, default=64)
    args = parser.parse_args()

    bws, ws = KernelSpec().arrays()
    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'kernel':>14} {'numpy (us)':>12} {'numba (us)':>12} {'speedup':>8}")
    for n in (32, 64, 128, 256):
        a = rng.standard_normal((n, args.dim))
        b = rng.standard_normal((n, args.dim))
        coeff = rng.standard_normal((n, n))
        cases = [
            ("gram", (a, b, bws, ws), "mixture_gram"),
            ("gram_gradient", (a, b, bws, ws, coeff), "mixture_gram_gradient"),
        ]
        for label, call_args, fname in cases:
            t_np = best_of(getattr(_gram_numpy, fname), call_args, args.repeats)
            if _gram_numba is not None:
                jitted = getattr(_gram_numba, fname)
                jitted(*call_args)  # compile outside the timed region
                t_nb = best_of(jitted, call_args, args.repeats)
                print(
                    f"{n:>6} {label:>14} {t_np * 1e6:>12.1f} {t_nb * 1e6:>12.1f}"
                    f" {t_np / t_nb:>7.1f}x"
                )
            else:
                print(f"{n:>6} {label:>14} {t_np * 1e6:>12.1f} {'n/a':>12} {'':>8}")


if __name__ == "__main__":
    main()
