"""Time the compiled metric kernels against the pure-Python fallback.

Run from the repository root:

    python3 benchmarks/bench_metrics.py

Workloads mirror real usage: longest-common-subsequence tables and clipped
n-gram counting over token-id sequences at dialogue-turn lengths (tens of
tokens) and at a stress length. Both implementations run the identical
inputs; results are checked to agree before timing is reported.
"""

from __future__ import annotations

import random
import statistics
import time

from vid2dialog.evalharness import _kernels_py as pure
from vid2dialog.evalharness import kernels

REPEATS = 5


def make_pairs(rng: random.Random, count: int, length: int, vocab: int):
    pairs = []
    for _ in range(count):
        a = [rng.randrange(vocab) for _ in range(length)]
        # reference shares most of the candidate plus local edits, like a
        # paraphrase would; disjoint ids would short-circuit the interesting paths
        b = list(a)
        for _ in range(max(1, length // 5)):
            b[rng.randrange(length)] = rng.randrange(vocab)
        rng.shuffle(b)
        pairs.append((a, b))
    return pairs


def check_agreement(pairs):
    for a, b in pairs:
        assert kernels.lcs_length(a, b) == pure.lcs_length(a, b)
        for n in (1, 2, 3, 4):
            assert kernels.clipped_ngram_stats(a, b, n) == pure.clipped_ngram_stats(a, b, n)


def bench(label: str, func, pairs) -> float:
    times = []
    for _ in range(REPEATS):
        start = time.perf_counter()
        func(pairs)
        times.append(time.perf_counter() - start)
    best = min(times)
    jitter = statistics.pstdev(times)
    print(f"  {label:<14} best {best * 1e3:8.2f} ms   spread {jitter * 1e3:6.2f} ms")
    return best


def run_lcs(impl):
    def task(pairs):
        for a, b in pairs:
            impl.lcs_length(a, b)

    return task


def run_ngrams(impl):
    def task(pairs):
        for a, b in pairs:
            for n in (1, 2, 3, 4):
                impl.clipped_ngram_stats(a, b, n)

    return task


def main() -> None:
    rng = random.Random(20240817)
    active = "compiled" if kernels.USING_COMPILED else "pure python (fallback)"
    print(f"active kernels: {active}")
    if not kernels.USING_COMPILED:
        print("note: extension not built here, so both columns time the same code")
    print()

    workloads = (
        ("turn-sized (40 tokens x 2000 pairs)", make_pairs(rng, 2000, 40, 600)),
        ("long-form (400 tokens x 60 pairs)", make_pairs(rng, 60, 400, 2000)),
    )
    for title, pairs in workloads:
        check_agreement(pairs[: min(len(pairs), 200)])
        print(title)
        for kernel_name, runner in (("lcs", run_lcs), ("ngrams 1-4", run_ngrams)):
            print(f" {kernel_name}:")
            active_time = bench("active", runner(kernels), pairs)
            pure_time = bench("pure python", runner(pure), pairs)
            if kernels.USING_COMPILED and active_time > 0:
                print(f"  {'speedup':<14} {pure_time / active_time:8.1f}x")
        print()


if __name__ == "__main__":
    main()
