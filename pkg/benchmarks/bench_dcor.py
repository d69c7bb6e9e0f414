"""Benchmark the distance-correlation kernels: compiled vs numpy backend.

The statistic and its gradient run once per minibatch per penalty term
during training, so these O(n^2 d) kernels dominate the penalized
training loop.  Usage:

    python benchmarks/bench_dcor.py [--repeats 5] [--batch 500]
"""

import argparse
import time

import numpy as np

from skdae import dcor

# (label, sample dimension) pairs matching what training actually feeds
# the statistic: stacked context windows, latent codes, and features.
CASES = [("context-440d", 440), ("latent-128d", 128), ("features-40d", 40)]


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def run(batch, repeats):
    rng = np.random.default_rng(0)
    backends = dcor.available_backends()
    print(f"batch size {batch}, best of {repeats} runs, times in ms")
    header = f"{'case':>14} {'kernel':>10}" + "".join(f"{b:>12}" for b in backends)
    print(header)
    print("-" * len(header))
    for label, dim in CASES:
        x = rng.standard_normal((batch, dim))
        y = rng.standard_normal((batch, 40))
        rows = {"pairwise": {}, "grad": {}}
        for backend in backends:
            dcor.use_backend(backend)
            rows["pairwise"][backend] = best_of(
                lambda: dcor.pairwise_distance_matrix(x), repeats
            )
            rows["grad"][backend] = best_of(
                lambda: dcor.dcor_with_gradient(y, x), repeats
            )
        for kernel in ("pairwise", "grad"):
            cells = "".join(f"{rows[kernel][b] * 1e3:>12.2f}" for b in backends)
            print(f"{label:>14} {kernel:>10}{cells}")
    dcor.use_backend("auto")
    print(f"\nactive backend after reset: {dcor.active_backend()}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--batch", type=int, default=500)
    args = parser.parse_args()
    run(args.batch, args.repeats)


if __name__ == "__main__":
    main()
