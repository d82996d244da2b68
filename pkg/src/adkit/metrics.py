"""Protocol metrics: temporal IoU, Recall@k/N, inter-rater pairing, duplicates.

These operate on plain text and timestamped tracks, independent of any
model. Recall@k/N takes a pluggable similarity scorer; the built-in default
is TF-IDF cosine over unigrams and bigrams fit on the reference corpus.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .corpus import TimedSegment, TranscriptTrack
from .textalign import tokenize

logger = logging.getLogger(__name__)

Scorer = Callable[[str, str], float]

DEFAULT_DUPLICATE_COUNT_THRESHOLD = 1


def tiou(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Temporal intersection-over-union of two [start, end] intervals.

    Returns 0 for disjoint intervals and, with a warning, for degenerate
    (zero-length) ones.
    """
    a0, a1 = a
    b0, b1 = b
    if a1 < a0 or b1 < b0:
        raise ValueError(f"invalid interval: {a} vs {b}")
    len_a = a1 - a0
    len_b = b1 - b0
    if len_a == 0.0 or len_b == 0.0:
        logger.warning("degenerate interval in tIoU: %s vs %s", a, b)
        return 0.0
    inter = min(a1, b1) - max(a0, b0)
    if inter <= 0.0:
        return 0.0
    return inter / (len_a + len_b - inter)


# ---------------------------------------------------------------------------
# Recall@k/N
# ---------------------------------------------------------------------------


def make_tfidf_scorer(references: Sequence[str]) -> Scorer:
    """TF-IDF cosine over unigrams and bigrams, idf fit on the references."""
    n_docs = len(references)
    df: Counter = Counter()
    for ref in references:
        df.update(set(_grams(ref)))

    def idf(gram) -> float:
        return math.log((1.0 + n_docs) / (1.0 + df[gram])) + 1.0

    def vectorize(text: str) -> dict:
        vec = {}
        for gram, tf in Counter(_grams(text)).items():
            vec[gram] = tf * idf(gram)
        return vec

    def score(a: str, b: str) -> float:
        va, vb = vectorize(a), vectorize(b)
        dot = sum(w * vb.get(g, 0.0) for g, w in va.items())
        na = math.sqrt(sum(w * w for w in va.values()))
        nb = math.sqrt(sum(w * w for w in vb.values()))
        if na == 0.0 or nb == 0.0:
            return 0.0
        return dot / (na * nb)

    return score


def _grams(text: str) -> list[tuple]:
    tokens = tokenize(text)
    grams: list[tuple] = [(t,) for t in tokens]
    grams.extend(zip(tokens, tokens[1:]))
    return grams


def _neighbor_window(i: int, total: int, n: int) -> range:
    """N indices balanced around i, shifted inward at corpus edges.

    For even N the extra neighbor goes to the earlier side.
    """
    lo = max(0, min(i - n // 2, total - n))
    return range(lo, lo + n)


def recall_at_k(
    predictions: Sequence[str],
    references: Sequence[str],
    k: int,
    n: int,
    scorer: Scorer | None = None,
) -> float:
    """Percentage of predictions whose true reference ranks in the top k
    among its N temporally neighboring references.

    predictions[i] belongs to references[i]; references must be in time
    order. Ties are broken pessimistically against the hit, so a constant
    scorer yields 0.
    """
    if len(predictions) != len(references):
        raise ValueError("prediction and reference counts differ")
    total = len(references)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    if total < n:
        raise ValueError(f"corpus of {total} items smaller than window N={n}")
    if scorer is None:
        scorer = make_tfidf_scorer(list(references))

    hits = 0
    for i, pred in enumerate(predictions):
        window = _neighbor_window(i, total, n)
        true_score = scorer(pred, references[i])
        rank = 1 + sum(
            1 for j in window if j != i and scorer(pred, references[j]) >= true_score
        )
        if rank <= k:
            hits += 1
    return 100.0 * hits / total


# ---------------------------------------------------------------------------
# Inter-rater pairing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterRaterPair:
    ad_a: TimedSegment
    ad_b: TimedSegment
    tiou: float


def pair_inter_rater(
    track_a: TranscriptTrack, track_b: TranscriptTrack, threshold: float
) -> list[InterRaterPair]:
    """Greedy one-to-one matching of two AD versions by descending tIoU.

    Both tracks must already be on a common timeline. Only pairs with
    tIoU >= threshold are kept; no segment appears in two pairs.
    """
    candidates = []
    for i, seg_a in enumerate(track_a.segments):
        for j, seg_b in enumerate(track_b.segments):
            t = tiou((seg_a.start, seg_a.end), (seg_b.start, seg_b.end))
            if t >= threshold and t > 0.0:
                candidates.append((-t, i, j))
    candidates.sort()

    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs = []
    for neg_t, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append(InterRaterPair(track_a.segments[i], track_b.segments[j], -neg_t))
    return pairs


def dump_pairs(pairs: Sequence[InterRaterPair], path: str | Path) -> None:
    """Tab-delimited pair dump for side-by-side inspection."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("start_a\tend_a\ttext_a\tstart_b\tend_b\ttext_b\ttiou\n")
        for p in pairs:
            fh.write(
                f"{p.ad_a.start:.3f}\t{p.ad_a.end:.3f}\t{p.ad_a.text}\t"
                f"{p.ad_b.start:.3f}\t{p.ad_b.end:.3f}\t{p.ad_b.text}\t{p.tiou:.4f}\n"
            )


def detect_duplicate_versions(
    track_a: TranscriptTrack,
    track_b: TranscriptTrack,
    duplicate_count_threshold: int = DEFAULT_DUPLICATE_COUNT_THRESHOLD,
) -> tuple[bool, float]:
    """Spot AD versions that merely re-narrate the same script.

    match_rate is the fraction of segments in the smaller track whose
    normalized text appears verbatim in the other; the pair counts as a
    duplicate when the number of exact matches exceeds the threshold.
    """
    if len(track_a) == 0 or len(track_b) == 0:
        return False, 0.0
    small, large = (track_a, track_b) if len(track_a) <= len(track_b) else (track_b, track_a)
    large_texts = {" ".join(tokenize(seg.text)) for seg in large.segments}
    matches = sum(
        1 for seg in small.segments if " ".join(tokenize(seg.text)) in large_texts
    )
    rate = matches / len(small)
    return matches > duplicate_count_threshold, rate
