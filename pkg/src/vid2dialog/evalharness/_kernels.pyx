# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled metric kernels; behaviour-identical to _kernels_py.

The LCS dynamic program is the quadratic hot loop of corpus-level
evaluation; n-gram counting gets integer-packed dict keys when ids fit.
"""

from cpython cimport array

import array

_LONG = array.array('q', [])


def lcs_length(a, b):
    """Length of the longest common subsequence of two id sequences."""
    cdef Py_ssize_t la = len(a), lb = len(b)
    if la == 0 or lb == 0:
        return 0
    cdef array.array aa = array.array('q', a)
    cdef array.array bb = array.array('q', b)
    cdef long long[::1] av = aa
    cdef long long[::1] bv = bb
    cdef array.array prev_arr = array.clone(_LONG, lb + 1, zero=True)
    cdef array.array cur_arr = array.clone(_LONG, lb + 1, zero=True)
    cdef long long[::1] prev = prev_arr
    cdef long long[::1] cur = cur_arr
    cdef Py_ssize_t i, j
    cdef long long best
    for i in range(la):
        cur[0] = 0
        for j in range(1, lb + 1):
            if av[i] == bv[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                best = cur[j - 1]
                if prev[j] > best:
                    best = prev[j]
                cur[j] = best
        prev, cur = cur, prev
    return prev[lb]


def clipped_ngram_stats(cand, ref, Py_ssize_t n):
    """Return (clipped matches, candidate n-gram count, reference n-gram count)."""
    cdef Py_ssize_t lc = len(cand), lr = len(ref)
    cdef Py_ssize_t c_total = lc - n + 1 if lc >= n else 0
    cdef Py_ssize_t r_total = lr - n + 1 if lr >= n else 0
    if c_total == 0 or r_total == 0:
        return 0, c_total, r_total

    cdef array.array ca = array.array('q', cand)
    cdef array.array ra = array.array('q', ref)
    cdef long long[::1] cv = ca
    cdef long long[::1] rv = ra
    cdef long long max_id = 0
    cdef Py_ssize_t i, k
    for i in range(lc):
        if cv[i] > max_id:
            max_id = cv[i]
    for i in range(lr):
        if rv[i] > max_id:
            max_id = rv[i]

    cdef Py_ssize_t matches = 0
    cdef long long key
    cdef dict remaining = {}
    if n <= 4 and max_id < (1 << 15):
        for i in range(r_total):
            key = 0
            for k in range(n):
                key = (key << 15) | rv[i + k]
            remaining[key] = remaining.get(key, 0) + 1
        for i in range(c_total):
            key = 0
            for k in range(n):
                key = (key << 15) | cv[i + k]
            left = remaining.get(key, 0)
            if left:
                remaining[key] = left - 1
                matches += 1
    else:
        # ids too large to pack; tuple keys are still correct
        for i in range(r_total):
            gram = tuple(ref[i:i + n])
            remaining[gram] = remaining.get(gram, 0) + 1
        for i in range(c_total):
            gram = tuple(cand[i:i + n])
            left = remaining.get(gram, 0)
            if left:
                remaining[gram] = left - 1
                matches += 1
    return matches, c_total, r_total
