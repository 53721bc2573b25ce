"""Sentence-level smoothed BLEU-4 and exact match over token sequences."""

from __future__ import annotations

import math
import sys
from collections import Counter

from .errors import EmptyReference


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def ngram_precisions(hypothesis, reference, max_n: int = 4) -> list[tuple[int, int]]:
    """Clipped match count and hypothesis n-gram count for n = 1..max_n."""
    out = []
    for n in range(1, max_n + 1):
        hyp, ref = _ngrams(hypothesis, n), _ngrams(reference, n)
        matches = sum(min(c, ref[g]) for g, c in hyp.items())
        out.append((matches, max(len(hypothesis) - n + 1, 0)))
    return out


def smoothed_bleu4(hypothesis, reference) -> float:
    """BLEU-4 in [0, 100] with add-one smoothing of zero higher-order counts.

    A precision with no matches becomes ``1 / (count + 1)`` for n >= 2.  A
    zero unigram precision is floored at the smallest positive float, which
    keeps the score positive but negligible.  Orders the hypothesis is too
    short to contain count as precision 1, so identical sequences of any
    length score 100.
    """
    hypothesis, reference = list(hypothesis), list(reference)
    if not reference:
        raise EmptyReference("reference must contain at least one token")
    if not hypothesis:
        return 0.0
    log_sum = 0.0
    for n, (matches, count) in enumerate(ngram_precisions(hypothesis, reference), start=1):
        if count == 0:
            p = 1.0
        elif matches > 0:
            p = matches / count
        elif n == 1:
            p = sys.float_info.min
        else:
            p = 1.0 / (count + 1)
        log_sum += math.log(p)
    c, r = len(hypothesis), len(reference)
    log_bp = 0.0 if c >= r else 1.0 - r / c
    return 100.0 * math.exp(log_bp + log_sum / 4)


def exact_match(hypothesis, reference) -> int:
    return int(list(hypothesis) == list(reference))
