"""Benchmark the numba kernels against the pure-numpy fallback.

Times one fused assignment+accumulation pass and a full clustering run at a
few sizes, for whichever backends are available in this interpreter.

    python benchmarks/bench_kernels.py [--sizes 20000x768x141 ...] [--repeat 3]

Backend note: the same comparison can also be driven end to end through the
env flag (CORPUSMIX_BACKEND=numpy python ...), which is what the CLI honors;
here both backends are toggled in-process so one run prints one table.
"""

import argparse
import time

import numpy as np

from corpusmix import _kernels
from corpusmix.diversity import EmbeddingStore, kmeans

DEFAULT_SIZES = ["5000x128x70", "20000x256x141", "20000x768x141"]


def parse_size(text):
    n, dim, k = (int(v) for v in text.split("x"))
    return n, dim, k


def make_instance(n, dim, k, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    centroids = np.ascontiguousarray(x[:k])
    return x, centroids


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", nargs="*", default=DEFAULT_SIZES, metavar="NxDIMxK")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--kmeans-iters", type=int, default=10)
    args = parser.parse_args()

    backends = ["numpy"]
    if _kernels.numba is not None:
        backends.insert(0, "numba")
        # trigger JIT compilation outside the timed region
        x, c = make_instance(256, 16, 8)
        _kernels.BACKEND = "numba"
        _kernels.assign_accumulate(x, c)
        _kernels.assign_rows(x, c)

    print(f"{'size':>18} {'backend':>8} {'pass (s)':>10} {'kmeans (s)':>11}")
    for size in args.sizes:
        n, dim, k = parse_size(size)
        x, centroids = make_instance(n, dim, k)
        store = EmbeddingStore(x, normalized=True)
        results = {}
        for backend in backends:
            _kernels.BACKEND = backend
            t_pass = timeit(lambda: _kernels.assign_accumulate(x, centroids), args.repeat)
            t_km = timeit(
                lambda: kmeans(store, k=k, iters=args.kmeans_iters, seed=0), 1
            )
            results[backend] = (t_pass, t_km)
            print(f"{size:>18} {backend:>8} {t_pass:>10.4f} {t_km:>11.4f}")
        if len(results) == 2:
            ratio = results["numpy"][0] / results["numba"][0]
            print(f"{'':>18} {'ratio':>8} {ratio:>10.2f}x (numpy / numba, fused pass)")


if __name__ == "__main__":
    main()
