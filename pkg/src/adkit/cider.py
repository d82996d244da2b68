"""Consensus-based n-gram similarity (CIDEr-D variant) for AD text.

Candidates and their reference groups are tokenized with the shared text
normalization, turned into TF-IDF n-gram vectors for n = 1..4 with document
frequencies taken from the reference corpus, and compared by clipped cosine
similarity with a Gaussian length penalty (sigma = 6). The per-n scores are
averaged and scaled by 10, so an exact match in a corpus of distinct items
scores 10.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

from .textalign import tokenize

NGRAM_MAX = 4
LENGTH_SIGMA = 6.0
SCALE = 10.0


def _ngram_counts(tokens: Sequence[str], n_max: int = NGRAM_MAX) -> list[Counter]:
    counts = [Counter() for _ in range(n_max)]
    for n in range(1, n_max + 1):
        grams = zip(*(tokens[i:] for i in range(n)))
        counts[n - 1].update(grams)
    return counts


@dataclass(frozen=True)
class CiderResult:
    corpus_score: float
    item_scores: tuple[float, ...]


def cider_d(
    candidates: Sequence[str],
    references: Sequence[Sequence[str]],
    sigma: float = LENGTH_SIGMA,
) -> CiderResult:
    """Score each candidate against its reference group; corpus score is the mean.

    candidates[i] is compared with every sentence in references[i]. Document
    frequencies count, per reference group, the n-grams appearing in any of
    its sentences; idf = log(corpus size) - log(max(1, df)).
    """
    if len(candidates) != len(references):
        raise ValueError(
            f"candidate/reference count mismatch: {len(candidates)} vs {len(references)}"
        )
    if not candidates:
        raise ValueError("empty corpus")
    for i, group in enumerate(references):
        if not group:
            raise ValueError(f"candidate {i} has no references")

    cand_counts = [_ngram_counts(tokenize(c)) for c in candidates]
    cand_lengths = [len(tokenize(c)) for c in candidates]
    ref_counts = [[_ngram_counts(tokenize(r)) for r in group] for group in references]
    ref_lengths = [[len(tokenize(r)) for r in group] for group in references]

    doc_freq: dict[tuple, int] = defaultdict(int)
    for group in ref_counts:
        seen = set()
        for counts in group:
            for per_n in counts:
                seen.update(per_n)
        for gram in seen:
            doc_freq[gram] += 1
    log_corpus = math.log(len(candidates))

    def tfidf(counts: list[Counter]) -> tuple[list[dict], list[float]]:
        vecs: list[dict] = []
        norms: list[float] = []
        for per_n in counts:
            vec = {}
            sq = 0.0
            for gram, tf in per_n.items():
                weight = tf * (log_corpus - math.log(max(1.0, doc_freq[gram])))
                vec[gram] = weight
                sq += weight * weight
            vecs.append(vec)
            norms.append(math.sqrt(sq))
        return vecs, norms

    def similarity(
        hyp_vec, hyp_norm, hyp_len, ref_vec, ref_norm, ref_len
    ) -> float:
        delta = float(hyp_len - ref_len)
        penalty = math.exp(-(delta**2) / (2.0 * sigma**2))
        total = 0.0
        for n in range(NGRAM_MAX):
            num = 0.0
            for gram, weight in hyp_vec[n].items():
                rw = ref_vec[n].get(gram, 0.0)
                num += min(weight, rw) * rw  # clipped, as in CIDEr-D
            if hyp_norm[n] != 0.0 and ref_norm[n] != 0.0:
                total += penalty * num / (hyp_norm[n] * ref_norm[n])
        return total / NGRAM_MAX

    scores = []
    for i in range(len(candidates)):
        hyp_vec, hyp_norm = tfidf(cand_counts[i])
        item = 0.0
        for counts, rlen in zip(ref_counts[i], ref_lengths[i]):
            ref_vec, ref_norm = tfidf(counts)
            item += similarity(
                hyp_vec, hyp_norm, cand_lengths[i], ref_vec, ref_norm, rlen
            )
        scores.append(SCALE * item / len(ref_counts[i]))

    return CiderResult(sum(scores) / len(scores), tuple(scores))
