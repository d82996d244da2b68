"""Turn instructional-video captions into pseudo-AD with character banks.

Captions arrive with externally produced annotations: the subject span of
each sentence, the number of unique person names heard in the source audio,
and whether an intro frame with a face exists. Videos failing the quality
filters are dropped; for each kept video one name is sampled from a pool
and substituted for the subject of every caption, and a character bank is
assembled from the video's portrait plus distractor faces from other
videos.
"""

from __future__ import annotations

import json
import random
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

MAX_UNIQUE_NAMES = 5
DEFAULT_DISTRACTORS = 4


@dataclass(frozen=True)
class CaptionRecord:
    """One caption sentence with its external annotations."""

    video_id: str
    text: str
    start: float
    end: float
    subject_span: Optional[tuple[int, int]] = None  # character offsets into text
    unique_name_count: int = 0
    has_face_frame: bool = True
    portrait: Optional[str] = None  # face exemplar path for this video

    def __post_init__(self) -> None:
        if self.subject_span is not None:
            lo, hi = self.subject_span
            if not (0 <= lo < hi <= len(self.text)):
                raise ValueError(
                    f"subject span ({lo}, {hi}) out of bounds for text of "
                    f"length {len(self.text)}"
                )
            object.__setattr__(self, "subject_span", (int(lo), int(hi)))


@dataclass(frozen=True)
class CharacterBank:
    """Sampled character name with portrait and off-screen distractor faces."""

    name: str
    portrait_ref: str
    distractor_refs: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.portrait_ref in self.distractor_refs:
            raise ValueError("portrait must not appear among distractors")


@dataclass(frozen=True)
class PseudoAD:
    video_id: str
    text: str
    start: float
    end: float
    name: str


_SENTENCE_END = (".", "!", "?")


def _at_sentence_start(text: str, pos: int) -> bool:
    prefix = text[:pos].rstrip()
    return not prefix or prefix.endswith(_SENTENCE_END)


def replace_subject(caption: CaptionRecord, name: str) -> str:
    """Substitute the annotated subject span with a character name.

    Only the span characters change; when the span opens a sentence the
    inserted name is upper-cased on its first letter.
    """
    if caption.subject_span is None:
        raise ValueError(f"caption in video {caption.video_id!r} has no subject span")
    lo, hi = caption.subject_span
    inserted = name
    if _at_sentence_start(caption.text, lo) and inserted:
        inserted = inserted[0].upper() + inserted[1:]
    return caption.text[:lo] + inserted + caption.text[hi:]


def _video_rng(seed: int, video_id: str) -> random.Random:
    # str seeds hash deterministically across runs and processes
    return random.Random(f"{seed}:{video_id}")


def transform_video(
    captions: Sequence[CaptionRecord],
    name_pool: Sequence[str],
    seed: int,
    distractor_pool: Sequence[str] = (),
    distractors: int = DEFAULT_DISTRACTORS,
) -> tuple[list[PseudoAD], CharacterBank]:
    """Build the pseudo-AD sentences and character bank for one video.

    One name is sampled per video (seeded on the video id, so parallel runs
    agree) and used in every caption that carries a subject span; span-less
    captions are skipped. Distractor faces are drawn from other videos'
    portraits, never equal to this video's own.
    """
    if not captions:
        raise ValueError("empty caption set")
    video_id = captions[0].video_id
    if any(c.video_id != video_id for c in captions):
        raise ValueError("captions from multiple videos passed to transform_video")
    if not name_pool:
        raise ValueError("name pool is empty")

    rng = _video_rng(seed, video_id)
    name = name_pool[rng.randrange(len(name_pool))]

    pseudo = [
        PseudoAD(video_id, replace_subject(c, name), c.start, c.end, name)
        for c in captions
        if c.subject_span is not None
    ]

    portrait = next((c.portrait for c in captions if c.portrait), None) or f"{video_id}.jpg"
    candidates = sorted({p for p in distractor_pool if p != portrait})
    k = min(distractors, len(candidates))
    chosen = tuple(rng.sample(candidates, k)) if k else ()
    bank = CharacterBank(name=name, portrait_ref=portrait, distractor_refs=chosen)
    return pseudo, bank


REJECT_TOO_MANY_NAMES = "too_many_names"
REJECT_NO_SUBJECT = "no_subject"
REJECT_NO_FACE = "no_face"


@dataclass(frozen=True)
class VideoFilterResult:
    kept: tuple[str, ...]
    rejected: dict[str, str]  # video_id -> reason

    @property
    def reason_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for reason in self.rejected.values():
            counts[reason] = counts.get(reason, 0) + 1
        return counts


def filter_videos(videos: dict[str, Sequence[CaptionRecord]]) -> VideoFilterResult:
    """Apply the three quality filters, tallying rejection reasons.

    A video is dropped when more than MAX_UNIQUE_NAMES unique names were
    heard in its audio, when none of its captions has a subject span, or
    when no face frame was found for the character bank. The first failing
    check is the recorded reason.
    """
    kept: list[str] = []
    rejected: dict[str, str] = {}
    for video_id in sorted(videos):
        captions = videos[video_id]
        if any(c.unique_name_count > MAX_UNIQUE_NAMES for c in captions):
            rejected[video_id] = REJECT_TOO_MANY_NAMES
        elif not any(c.subject_span is not None for c in captions):
            rejected[video_id] = REJECT_NO_SUBJECT
        elif not any(c.has_face_frame for c in captions):
            rejected[video_id] = REJECT_NO_FACE
        else:
            kept.append(video_id)
    return VideoFilterResult(tuple(kept), rejected)


# ---------------------------------------------------------------------------
# File interfaces
# ---------------------------------------------------------------------------


def load_caption_file(path: str | Path) -> dict[str, list[CaptionRecord]]:
    """Read caption annotations (JSON lines) grouped by video id.

    Each record carries video_id, text, start, end, subject_start,
    subject_end (both null when no subject), unique_name_count,
    has_face_frame, and optionally portrait.
    """
    videos: dict[str, list[CaptionRecord]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            span = None
            if rec.get("subject_start") is not None and rec.get("subject_end") is not None:
                span = (int(rec["subject_start"]), int(rec["subject_end"]))
            caption = CaptionRecord(
                video_id=str(rec["video_id"]),
                text=str(rec["text"]),
                start=float(rec["start"]),
                end=float(rec["end"]),
                subject_span=span,
                unique_name_count=int(rec.get("unique_name_count", 0)),
                has_face_frame=bool(rec.get("has_face_frame", True)),
                portrait=rec.get("portrait"),
            )
            videos.setdefault(caption.video_id, []).append(caption)
    if not videos:
        raise ValueError(f"{path}: no caption records")
    return videos


def load_name_pool(path: str | Path) -> list[str]:
    """One given name per line; blanks and # comments ignored."""
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            names.append(line)
    if not names:
        raise ValueError(f"{path}: empty name pool")
    return names
