"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 100,500,1000] [--repeat 5]

Prints one row per (kernel, N) with the best time of each backend and the
speedup. Without a built extension only the fallback is timed.
"""

import argparse
import timeit

import numpy as np

from multidep._backend import KIND_PRODUCT, KIND_TOTAL, available_backends


def cases(mod, N, rng):
    x = rng.normal(size=(N, 3))
    dist = mod.pairwise_power(x, 1.0)
    stack = np.stack([mod.double_center(mod.pairwise_power(rng.normal(size=(N, 1)), 1.0)) for _ in range(3)])
    dists = np.stack([mod.pairwise_power(rng.normal(size=(N, 1)), 1.0) for _ in range(3)])
    w = np.full(N, 1.0 / N)
    perms = [np.arange(N)] + [rng.permutation(N) for _ in range(2)]
    idx = [rng.integers(0, N, N) for _ in range(3)]
    return {
        "pairwise_power": lambda: mod.pairwise_power(x, 1.0),
        "double_center": lambda: mod.double_center(dist),
        "product_sum": lambda: mod.product_sum(stack, w, KIND_PRODUCT, 0),
        "total_sum": lambda: mod.product_sum(stack, w, KIND_TOTAL, 0),
        "permuted_sum": lambda: mod.permuted_product_sum(stack, perms, KIND_PRODUCT, 0),
        "resampled_sum": lambda: mod.resampled_product_sum(dists, idx, True, KIND_PRODUCT, 0),
    }


def best_time(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,500,1000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = available_backends()
    names = sorted(backends)
    print(f"{'kernel':16s} {'N':>6s} " + " ".join(f"{n + ' ms':>12s}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for N in (int(s) for s in args.sizes.split(",")):
        timings = {n: {k: best_time(f, args.repeat) for k, f in cases(backends[n], N, np.random.default_rng(0)).items()}
                   for n in names}
        for kernel in timings[names[0]]:
            row = f"{kernel:16s} {N:6d} " + " ".join(f"{timings[n][kernel] * 1e3:12.3f}" for n in names)
            if "cython" in timings:
                row += f"   {timings['python'][kernel] / timings['cython'][kernel]:7.2f}x"
            print(row)


if __name__ == "__main__":
    main()
