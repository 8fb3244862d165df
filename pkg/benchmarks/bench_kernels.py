"""Timing comparison of the numba and numpy kernel backends.

Runs each hot kernel under both backends at a few sizes, reports best-of-n
wall times and the speedup ratio, and cross-checks that the two backends
agree numerically (pairwise_sum must agree bitwise; the rest to 1e-12
relative). The numba path is warmed once per shape so JIT compilation is
excluded from the timings.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from gjsd import backend


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(rng):
    x1 = rng.standard_normal(200_000)
    pts = rng.standard_normal((256, 16))
    data = rng.standard_normal((4096, 16))
    xa = rng.standard_normal((256, 8))
    ya = rng.standard_normal((256, 8))
    return [
        ("pairwise_sum 200k", "pairwise_sum", (x1,), True),
        ("logsumexp 256x4096x16", "logsumexp_neg_half_sqdist", (pts, data), False),
        ("mmd2 256x256x8", "mmd2_unbiased", (xa, ya, 1.0), False),
        ("mmd2_grad 256x256x8", "mmd2_unbiased_grad_x", (xa, ya, 1.0), False),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="best-of-n timing")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = _cases(rng)
    results = {}
    for name in ("numpy", "numba"):
        try:
            backend.use_backend(name)
        except Exception as exc:
            print(f"backend {name}: unavailable ({exc})")
            continue
        kernels = backend.get_kernels()
        for label, attr, arrs, _ in cases:
            fn = getattr(kernels, attr)
            out = fn(*arrs)  # warm-up; also the value used for agreement
            if isinstance(out, tuple):  # mmd2_unbiased_grad_x -> (value, grad)
                out = np.concatenate([[out[0]], np.ravel(out[1])])
            results.setdefault(label, {})[name] = (
                _best_of(lambda: fn(*arrs), args.repeats),
                np.asarray(out, dtype=np.float64),
            )

    print(f"{'kernel':<24} {'numpy':>10} {'numba':>10} {'speedup':>8}  agreement")
    for label, _, _, bitwise in cases:
        row = results.get(label, {})
        if "numba" not in row:
            t_np = row["numpy"][0]
            print(f"{label:<24} {t_np*1e3:9.3f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_np, v_np = row["numpy"]
        t_nb, v_nb = row["numba"]
        if bitwise:
            agree = "bitwise" if np.array_equal(v_np, v_nb) else "MISMATCH"
        else:
            rel = np.max(np.abs(v_np - v_nb) / (np.abs(v_np) + 1e-300))
            agree = f"rel {rel:.2e}" if rel < 1e-12 else f"MISMATCH rel {rel:.2e}"
        print(
            f"{label:<24} {t_np*1e3:9.3f}ms {t_nb*1e3:9.3f}ms {t_np/t_nb:7.2f}x  {agree}"
        )


if __name__ == "__main__":
    main()
