"""Turn-level text-generation metrics.

Tokenization is fixed and documented: text is lowercased, word tokens are
runs of ``[a-z0-9]`` (internal apostrophes allowed) and every other
non-space character becomes its own token.

BLEU: brevity-penalized geometric mean of clipped n-gram precisions for
n = 1..4. Orders for which the candidate has no n-grams are skipped; a
higher order (n >= 2) with zero matches gets add-one smoothing,
1 / (count + 1); zero unigram overlap scores 0. The brevity penalty is
exp(1 - r/c) when the candidate is shorter than the reference.

ROUGE-1/2: F-measure of clipped n-gram overlap, 2m / (c + r).
ROUGE-L: F-measure over the longest common subsequence, 2·LCS / (c + r).
"""

from __future__ import annotations

import math
import re

from .kernels import clipped_ngram_stats, lcs_length

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*|[^\sa-z0-9]")

BLEU_MAX_ORDER = 4


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _encode(cand: list[str], ref: list[str]) -> tuple[list[int], list[int]]:
    ids: dict[str, int] = {}
    for tok in cand:
        ids.setdefault(tok, len(ids))
    for tok in ref:
        ids.setdefault(tok, len(ids))
    return [ids[t] for t in cand], [ids[t] for t in ref]


def bleu(candidate: str, reference: str) -> float:
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return 0.0
    cand_ids, ref_ids = _encode(cand, ref)
    log_sum = 0.0
    orders = 0
    for n in range(1, BLEU_MAX_ORDER + 1):
        matches, c_total, _ = clipped_ngram_stats(cand_ids, ref_ids, n)
        if c_total == 0:
            continue
        if matches == 0:
            if n == 1:
                return 0.0
            log_sum += math.log(1.0 / (c_total + 1))
        else:
            log_sum += math.log(matches / c_total)
        orders += 1
    if orders == 0:
        return 0.0
    if len(cand) >= len(ref):
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum / orders)


def _f_measure(matches: int, c_total: int, r_total: int) -> float:
    if matches == 0 or c_total == 0 or r_total == 0:
        return 0.0
    return 2.0 * matches / (c_total + r_total)


def rouge(candidate: str, reference: str) -> dict[str, float]:
    """ROUGE-1, ROUGE-2 and ROUGE-L F-measures, each in [0, 1]."""
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0}
    cand_ids, ref_ids = _encode(cand, ref)
    scores = {}
    for n, name in ((1, "rouge1"), (2, "rouge2")):
        matches, c_total, r_total = clipped_ngram_stats(cand_ids, ref_ids, n)
        scores[name] = _f_measure(matches, c_total, r_total)
    scores["rougeL"] = _f_measure(
        lcs_length(cand_ids, ref_ids), len(cand), len(ref)
    )
    return scores
