"""Stage-1 rough clip localization by sliding-window word-error-rate.

A clip transcript is concatenated into one paragraph and compared against
every same-length window of the full-movie transcript; the window with the
lowest WER gives the rough start time used to cut the audio search chunk
for stage 2.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .corpus import TranscriptTrack

_PUNCT = re.compile(r"[^\w\s]+")

DEFAULT_WER_ACCEPT_THRESHOLD = 0.8


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation to spaces, split on whitespace."""
    return _PUNCT.sub(" ", text.casefold()).split()


@dataclass(frozen=True)
class TextAlignResult:
    """Outcome of locating a clip paragraph inside the movie transcript."""

    best_index: int  # starting subtitle index in the movie track
    best_time: float  # start time of that subtitle, seconds
    best_wer: float
    accepted: bool


def _as_tokens(value: str | Sequence[str]) -> list[str]:
    if isinstance(value, str):
        return tokenize(value)
    return list(value)


def _edit_distance_ids(hyp: np.ndarray, ref: np.ndarray) -> int:
    """Levenshtein distance between integer token-id sequences.

    Row-vectorized: after taking the vertical and diagonal transitions, the
    horizontal (insertion) chain cur[j] = min(cur[j], cur[j-1] + 1) is folded
    in via a running minimum of (cur - column index).
    """
    n_ref = len(ref)
    if len(hyp) == 0:
        return n_ref
    offsets = np.arange(n_ref + 1, dtype=np.int64)
    prev = offsets.copy()
    cur = np.empty(n_ref + 1, dtype=np.int64)
    for i, h in enumerate(hyp, start=1):
        cur[0] = i
        np.minimum(prev[1:] + 1, prev[:-1] + (ref != h), out=cur[1:])
        cur[:] = np.minimum.accumulate(cur - offsets) + offsets
        prev, cur = cur, prev
    return int(prev[-1])


def _ids(tokens: Sequence[str], vocab: dict[str, int]) -> np.ndarray:
    out = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        out[i] = vocab.setdefault(tok, len(vocab))
    return out


def word_error_rate(hypothesis: str | Sequence[str], reference: str | Sequence[str]) -> float:
    """(substitutions + deletions + insertions) / |reference| over word tokens.

    Accepts raw strings (normalized via tokenize) or pre-split token
    sequences. The reference must be non-empty.
    """
    hyp = _as_tokens(hypothesis)
    ref = _as_tokens(reference)
    if not ref:
        raise ValueError("WER reference is empty")
    vocab: dict[str, int] = {}
    return _edit_distance_ids(_ids(hyp, vocab), _ids(ref, vocab)) / len(ref)


def locate_clip(
    clip: TranscriptTrack,
    movie: TranscriptTrack,
    wer_accept_threshold: float = DEFAULT_WER_ACCEPT_THRESHOLD,
) -> TextAlignResult:
    """Find the movie subtitle index whose n-entry window best matches the clip.

    The clip texts are joined into one paragraph; for every window start i in
    [0, m - n] the movie subtitles i..i+n-1 are joined and scored by WER with
    the clip paragraph as hypothesis. The argmin index wins (first index on
    ties); the result is accepted iff the minimum WER is at or below the
    threshold.
    """
    n = len(clip.segments)
    m = len(movie.segments)
    if n < 1:
        raise ValueError("clip track is empty")
    if m < n:
        raise ValueError(f"movie track ({m} segments) shorter than clip ({n})")

    vocab: dict[str, int] = {}
    clip_ids = _ids(tokenize(clip.text_of()), vocab)
    seg_ids = [_ids(tokenize(seg.text), vocab) for seg in movie.segments]

    best_index = 0
    best_wer = float("inf")
    for i in range(m - n + 1):
        ref_ids = np.concatenate(seg_ids[i : i + n]) if n > 1 else seg_ids[i]
        if len(ref_ids) == 0:
            continue
        wer = _edit_distance_ids(clip_ids, ref_ids) / len(ref_ids)
        if wer < best_wer:
            best_wer = wer
            best_index = i
    if not np.isfinite(best_wer):
        raise ValueError("movie windows contain no tokens")

    return TextAlignResult(
        best_index=best_index,
        best_time=movie.segments[best_index].start,
        best_wer=best_wer,
        accepted=best_wer <= wer_accept_threshold,
    )
