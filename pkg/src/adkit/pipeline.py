"""End-to-end per-clip alignment and dataset emission.

align_clip chains the two stages: rough text localization, audio chunk
extraction around the rough point, AD masking on the movie side, window
correlation, and the robust line fit. Sub-stage failures are recorded on
the returned ClipAlignment instead of raised, so one bad clip never aborts
a batch.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .corpus import ADRecord, AudioBuffer, TranscriptTrack, write_ad_records
from .linefit import (
    DEFAULT_GATES,
    DEFAULT_ITERATIONS,
    DEFAULT_RESIDUAL_THRESHOLD,
    AlignmentFit,
    FitGates,
    TimeMapping,
    ransac_line_fit,
    to_time_mapping,
)
from .melalign import (
    DEFAULT_MEL,
    DEFAULT_WINDOW_FRAMES,
    MelConfig,
    correlate_windows,
    mask_ad_regions,
    mel_spectrogram,
)
from .textalign import DEFAULT_WER_ACCEPT_THRESHOLD, TextAlignResult, locate_clip

logger = logging.getLogger(__name__)


class AlignStatus(str, Enum):
    ALIGNED = "aligned"
    STAGE1_FAILED = "stage1_failed"
    STAGE2_REJECTED = "stage2_rejected"


@dataclass(frozen=True)
class AlignParams:
    """Tunable knobs of the two-stage pipeline, with pinned defaults."""

    wer_accept_threshold: float = DEFAULT_WER_ACCEPT_THRESHOLD
    chunk_pad_s: float = 120.0  # search margin each side of the rough point
    window_frames: int = DEFAULT_WINDOW_FRAMES
    residual_threshold: float = DEFAULT_RESIDUAL_THRESHOLD
    iterations: int = DEFAULT_ITERATIONS
    seed: int = 0
    gates: FitGates = DEFAULT_GATES
    mel: MelConfig = DEFAULT_MEL

    def validate(self) -> None:
        if not 0.0 <= self.wer_accept_threshold:
            raise ValueError("wer_accept_threshold must be non-negative")
        if self.chunk_pad_s < 0:
            raise ValueError("chunk_pad_s must be non-negative")
        if self.window_frames < 1:
            raise ValueError("window_frames must be positive")
        if self.residual_threshold <= 0:
            raise ValueError("residual_threshold must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.gates.min_inliers < 2:
            raise ValueError("min_inliers must be at least 2")


@dataclass(frozen=True)
class ClipAlignment:
    """Full provenance for one clip: both stage outcomes and the verdict."""

    clip_id: str
    movie_id: str
    stage1: Optional[TextAlignResult]
    fit: Optional[AlignmentFit]
    mapping: Optional[TimeMapping]
    status: AlignStatus
    reason: str = ""

    def report(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "movie_id": self.movie_id,
            "status": self.status.value,
            "reason": self.reason,
            "stage1": None
            if self.stage1 is None
            else {
                "best_index": self.stage1.best_index,
                "best_time": self.stage1.best_time,
                "best_wer": self.stage1.best_wer,
                "accepted": self.stage1.accepted,
            },
            "fit": None if self.fit is None else self.fit.report(),
        }


def align_clip(
    clip_audio: AudioBuffer,
    clip_transcript: TranscriptTrack,
    movie_audio: AudioBuffer,
    movie_transcript: TranscriptTrack,
    ad_track: TranscriptTrack,
    params: AlignParams = AlignParams(),
) -> ClipAlignment:
    """Run the two-stage pipeline for one clip against its movie.

    movie_transcript should hold the character dialogue (AD narration
    separated out into ad_track), since only dialogue exists on both sides.
    """
    clip_id = clip_transcript.source_id
    movie_id = movie_transcript.source_id

    try:
        stage1 = locate_clip(clip_transcript, movie_transcript, params.wer_accept_threshold)
    except ValueError as exc:
        return ClipAlignment(
            clip_id, movie_id, None, None, None, AlignStatus.STAGE1_FAILED, str(exc)
        )
    if not stage1.accepted:
        return ClipAlignment(
            clip_id,
            movie_id,
            stage1,
            None,
            None,
            AlignStatus.STAGE1_FAILED,
            f"best WER {stage1.best_wer:.3f} above threshold",
        )

    clip_duration = clip_audio.duration
    chunk_start = max(0.0, stage1.best_time - params.chunk_pad_s)
    chunk_end = min(
        movie_audio.duration, stage1.best_time + clip_duration + params.chunk_pad_s
    )
    try:
        chunk = movie_audio.slice_seconds(chunk_start, chunk_end)
        movie_spec = mask_ad_regions(
            mel_spectrogram(chunk, params.mel), ad_track, chunk_offset=chunk_start
        )
        clip_spec = mel_spectrogram(clip_audio, params.mel)
        matches = correlate_windows(movie_spec, clip_spec, params.window_frames)
        if len(matches) == 0:
            return ClipAlignment(
                clip_id,
                movie_id,
                stage1,
                None,
                None,
                AlignStatus.STAGE2_REJECTED,
                "all movie windows masked",
            )
        fit = ransac_line_fit(
            matches,
            residual_threshold=params.residual_threshold,
            iterations=params.iterations,
            seed=params.seed,
            gates=params.gates,
        )
    except ValueError as exc:
        return ClipAlignment(
            clip_id, movie_id, stage1, None, None, AlignStatus.STAGE2_REJECTED, str(exc)
        )

    if not fit.accepted:
        return ClipAlignment(
            clip_id,
            movie_id,
            stage1,
            fit,
            None,
            AlignStatus.STAGE2_REJECTED,
            "fit rejected by gates",
        )
    mapping = to_time_mapping(fit, params.mel.seconds_per_frame, av_offset=chunk_start)
    return ClipAlignment(clip_id, movie_id, stage1, fit, mapping, AlignStatus.ALIGNED)


def project_ad(
    ad_track: TranscriptTrack,
    mapping: TimeMapping,
    clip_duration: float,
    movie_id: str = "",
    clip_id: str = "",
) -> list[ADRecord]:
    """Map AD narration segments onto the clip timeline.

    Segments entirely outside [0, clip_duration] are dropped; partial
    overlaps are clipped to the range. Original movie-side timestamps are
    preserved on each record.
    """
    records: list[ADRecord] = []
    for seg in ad_track.segments:
        start = mapping.to_clip(seg.start)
        end = mapping.to_clip(seg.end)
        if end <= 0.0 or start >= clip_duration:
            continue
        records.append(
            ADRecord(
                movie_id=movie_id,
                clip_id=clip_id,
                text=seg.text,
                start_clip=max(0.0, start),
                end_clip=min(clip_duration, end),
                start_movie=seg.start,
                end_movie=seg.end,
            )
        )
    return records


@dataclass(frozen=True)
class SplitManifest:
    """Movie-level train/eval assignment; the two sets must be disjoint."""

    train_movies: frozenset[str]
    eval_movies: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_movies", frozenset(self.train_movies))
        object.__setattr__(self, "eval_movies", frozenset(self.eval_movies))
        overlap = self.train_movies & self.eval_movies
        if overlap:
            raise ValueError(f"movies assigned to both splits: {sorted(overlap)}")

    def split_of(self, movie_id: str) -> str:
        if movie_id in self.eval_movies:
            return "eval"
        if movie_id in self.train_movies:
            return "train"
        raise ValueError(f"movie {movie_id!r} is in neither split")


@dataclass(frozen=True)
class ClipResult:
    alignment: ClipAlignment
    records: tuple[ADRecord, ...] = field(default=())


def emit_dataset(
    results: Sequence[ClipResult],
    manifest: SplitManifest,
    out_dir: str | Path,
) -> dict:
    """Write per-split AD record files plus a statistics summary.

    Records are only emitted for clips whose status is aligned; emitted
    counts are checked against the inputs. Returns the summary record,
    which is also written to summary.json.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    per_split: dict[str, list[ADRecord]] = {"train": [], "eval": []}
    movies: set[str] = set()
    aligned = 0
    for res in results:
        movies.add(res.alignment.movie_id)
        if res.alignment.status != AlignStatus.ALIGNED:
            continue
        aligned += 1
        split = manifest.split_of(res.alignment.movie_id)
        per_split[split].extend(res.records)

    counts = {}
    for split, records in per_split.items():
        path = out_dir / f"ad_{split}.jsonl"
        written = write_ad_records(records, path)
        if written != len(records):
            raise IOError(f"{path}: wrote {written} records, expected {len(records)}")
        counts[split] = written

    total_clips = len(results)
    summary = {
        "movies": len(movies),
        "clips": total_clips,
        "aligned_clips": aligned,
        "success_rate": (aligned / total_clips) if total_clips else 0.0,
        "ads": counts["train"] + counts["eval"],
        "ads_train": counts["train"],
        "ads_eval": counts["eval"],
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    logger.info(
        "emitted %d AD records for %d/%d aligned clips", summary["ads"], aligned, total_clips
    )
    return summary
