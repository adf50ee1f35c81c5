"""Pure-Python metric kernels; behaviour-identical to the compiled module.

Both kernels operate on token-id sequences (small non-negative ints), not
strings; the metrics layer owns tokenization and id assignment.
"""

from __future__ import annotations


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two id sequences."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    cur = [0] * (len(b) + 1)
    for x in a:
        cur[0] = 0
        for j, y in enumerate(b, 1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                left, up = cur[j - 1], prev[j]
                cur[j] = left if left >= up else up
        prev, cur = cur, prev
    return prev[-1]


def clipped_ngram_stats(cand, ref, n: int) -> tuple[int, int, int]:
    """Return (clipped matches, candidate n-gram count, reference n-gram count).

    A candidate n-gram matches at most as many times as it occurs in the
    reference (count clipping).
    """
    c_total = len(cand) - n + 1 if len(cand) >= n else 0
    r_total = len(ref) - n + 1 if len(ref) >= n else 0
    if c_total == 0 or r_total == 0:
        return 0, c_total, r_total
    remaining: dict[tuple, int] = {}
    for i in range(r_total):
        gram = tuple(ref[i : i + n])
        remaining[gram] = remaining.get(gram, 0) + 1
    matches = 0
    for i in range(c_total):
        gram = tuple(cand[i : i + n])
        left = remaining.get(gram, 0)
        if left:
            remaining[gram] = left - 1
            matches += 1
    return matches, c_total, r_total
