"""Domain types and ingestion for transcripts, AD tracks, cast lists, and audio.

All timestamps are quantized to millisecond precision on construction so that
sorting and equality are deterministic; the public API works in seconds.
Audio is carried as mono 16 kHz PCM; other sample rates are resampled at
ingest by linear interpolation.

Every type in this module is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.io import wavfile

logger = logging.getLogger(__name__)

TARGET_SAMPLE_RATE = 16000


def _quantize_ms(seconds: float) -> float:
    """Snap a seconds value to the millisecond grid."""
    return round(seconds * 1000.0) / 1000.0


class TrackKind(str, Enum):
    DIALOGUE = "dialogue"
    AD_NARRATION = "ad_narration"
    MIXED = "mixed"


@dataclass(frozen=True)
class TimedSegment:
    """One timestamped text unit (a subtitle line or an AD narration)."""

    text: str
    start: float  # seconds, millisecond-quantized
    end: float  # seconds, millisecond-quantized
    speaker: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("segment text is empty")
        object.__setattr__(self, "start", _quantize_ms(self.start))
        object.__setattr__(self, "end", _quantize_ms(self.end))
        if self.start < 0:
            raise ValueError(f"segment start {self.start} is negative")
        if not self.start < self.end:
            raise ValueError(f"segment has start {self.start} >= end {self.end}")

    @property
    def start_ms(self) -> int:
        return round(self.start * 1000)

    @property
    def end_ms(self) -> int:
        return round(self.end * 1000)

    @property
    def duration(self) -> float:
        return self.end - self.start


def _segment_sort_key(seg: TimedSegment) -> tuple[int, int, str]:
    return (seg.start_ms, seg.end_ms, seg.text)


@dataclass(frozen=True)
class TranscriptTrack:
    """An ordered sequence of segments from one source (movie or clip).

    Segments are sorted ascending by start on construction; ties are broken
    by end then text so the order is total.
    """

    segments: tuple[TimedSegment, ...]
    source_id: str
    kind: TrackKind = TrackKind.MIXED

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.segments, key=_segment_sort_key))
        object.__setattr__(self, "segments", ordered)
        object.__setattr__(self, "kind", TrackKind(self.kind))

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def speakers(self) -> set[str]:
        return {s.speaker for s in self.segments if s.speaker is not None}

    def text_of(self) -> str:
        """All segment texts joined with single spaces, in time order."""
        return " ".join(s.text for s in self.segments)


@dataclass(frozen=True)
class CastMember:
    character: str
    actor: Optional[str] = None
    face: Optional[str] = None


def canonical_name(name: str) -> str:
    """Case-folded, whitespace-normalized form used for name identity."""
    return " ".join(name.split()).casefold()


@dataclass(frozen=True)
class CastList:
    """Ordered list of characters; names unique after canonicalization."""

    characters: tuple[CastMember, ...]

    def __post_init__(self) -> None:
        seen = set()
        for member in self.characters:
            key = canonical_name(member.character)
            if key in seen:
                raise ValueError(f"duplicate character name {member.character!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.characters)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.character for m in self.characters)


@dataclass(frozen=True)
class ADRecord:
    """One AD sentence projected onto a clip timeline.

    Clip timestamps are millisecond-quantized; the original movie-side
    timestamps are preserved untouched.
    """

    movie_id: str
    clip_id: str
    text: str
    start_clip: float
    end_clip: float
    start_movie: float
    end_movie: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "start_clip", _quantize_ms(self.start_clip))
        object.__setattr__(self, "end_clip", _quantize_ms(self.end_clip))
        if not self.start_clip < self.end_clip:
            raise ValueError(
                f"AD record has start_clip {self.start_clip} >= end_clip {self.end_clip}"
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "movie_id": self.movie_id,
                "clip_id": self.clip_id,
                "text": self.text,
                "start_clip": self.start_clip,
                "end_clip": self.end_clip,
                "start_movie": self.start_movie,
                "end_movie": self.end_movie,
            },
            ensure_ascii=False,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "ADRecord":
        d = json.loads(line)
        return cls(
            movie_id=d["movie_id"],
            clip_id=d["clip_id"],
            text=d["text"],
            start_clip=d["start_clip"],
            end_clip=d["end_clip"],
            start_movie=d["start_movie"],
            end_movie=d["end_movie"],
        )


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono PCM audio at 16 kHz, amplitudes nominally in [-1, 1]."""

    samples: np.ndarray = field(repr=False)
    sample_rate: int = TARGET_SAMPLE_RATE

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float32)
        if arr.ndim != 1:
            raise ValueError(f"expected mono audio, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("audio buffer is empty")
        if self.sample_rate != TARGET_SAMPLE_RATE:
            raise ValueError(
                f"audio buffers are fixed at {TARGET_SAMPLE_RATE} Hz after ingestion, "
                f"got {self.sample_rate}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def slice_seconds(self, start: float, end: float) -> "AudioBuffer":
        """Sub-buffer covering [start, end), clamped to the valid range."""
        i = max(0, int(round(start * self.sample_rate)))
        j = min(len(self.samples), int(round(end * self.sample_rate)))
        if j <= i:
            raise ValueError(f"empty audio slice [{start}, {end})")
        return AudioBuffer(self.samples[i:j], self.sample_rate)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def _records_from_file(path: Path, fmt: str) -> list[dict]:
    raw = path.read_text(encoding="utf-8")
    if fmt == "json":
        data = json.loads(raw)
        if isinstance(data, dict):
            data = data.get("segments")
        if not isinstance(data, list):
            raise ValueError(f"{path}: expected a top-level list of segment records")
        return data
    if fmt == "jsonl":
        return [json.loads(line) for line in raw.splitlines() if line.strip()]
    raise ValueError(f"unknown transcript format {fmt!r} (expected 'json' or 'jsonl')")


def parse_transcript(
    path: str | Path,
    fmt: str = "json",
    source_id: Optional[str] = None,
    kind: TrackKind = TrackKind.MIXED,
) -> TranscriptTrack:
    """Read a transcript file into a validated, sorted TranscriptTrack.

    The file holds a sequence of records with fields "start", "end", "text"
    and optional "speaker" (seconds, as emitted by WhisperX-style tools),
    either as a JSON array / {"segments": [...]} object or as JSON lines.
    Malformed entries (end <= start, empty text) are dropped and the drop
    count is reported via a warning.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"transcript file not found: {path}")
    records = _records_from_file(path, fmt)

    segments: list[TimedSegment] = []
    dropped = 0
    for rec in records:
        try:
            segments.append(
                TimedSegment(
                    text=str(rec["text"]),
                    start=float(rec["start"]),
                    end=float(rec["end"]),
                    speaker=rec.get("speaker"),
                )
            )
        except (ValueError, KeyError, TypeError):
            dropped += 1
    if dropped:
        logger.warning("%s: dropped %d malformed segment(s)", path, dropped)
    if not segments:
        raise ValueError(f"{path}: no valid segments")

    return TranscriptTrack(
        segments=tuple(segments),
        source_id=source_id if source_id is not None else path.stem,
        kind=kind,
    )


def write_transcript(track: TranscriptTrack, path: str | Path) -> None:
    """Serialize a track so that parse_transcript reads it back identically."""
    payload = {
        "source_id": track.source_id,
        "kind": track.kind.value,
        "segments": [
            {"start": s.start, "end": s.end, "text": s.text, "speaker": s.speaker}
            for s in track.segments
        ],
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )


def split_by_narrator(
    track: TranscriptTrack, narrator_speaker: str
) -> tuple[TranscriptTrack, TranscriptTrack]:
    """Partition a diarized track into (AD narration, character dialogue).

    Every segment goes to exactly one side: segments labeled with
    narrator_speaker become the AD track, everything else the dialogue track.
    """
    if narrator_speaker not in track.speakers:
        raise ValueError(
            f"narrator speaker {narrator_speaker!r} not present in track "
            f"{track.source_id!r} (speakers: {sorted(track.speakers)})"
        )
    ad = tuple(s for s in track.segments if s.speaker == narrator_speaker)
    dialogue = tuple(s for s in track.segments if s.speaker != narrator_speaker)
    return (
        TranscriptTrack(ad, track.source_id, TrackKind.AD_NARRATION),
        TranscriptTrack(dialogue, track.source_id, TrackKind.DIALOGUE),
    )


def guess_narrator(track: TranscriptTrack) -> str:
    """Experimental heuristic: pick the speaker with the most segments.

    AD narration typically dominates a described movie soundtrack. This is a
    convenience for exploration only; production runs should pass the
    narrator speaker explicitly.
    """
    if not track.speakers:
        raise ValueError("track has no speaker labels")
    counts: dict[str, int] = {}
    for seg in track.segments:
        if seg.speaker is not None:
            counts[seg.speaker] = counts.get(seg.speaker, 0) + 1
    best = max(sorted(counts), key=lambda sp: counts[sp])
    logger.warning(
        "narrator heuristic picked %r (%d/%d segments); pass --narrator to override",
        best,
        counts[best],
        len(track),
    )
    return best


def load_cast_list(path: str | Path) -> CastList:
    """Load a cast list file: one record per character with fields
    "character", optional "actor", optional "face".

    Accepts a JSON array, a {"characters": [...]} object, or JSON lines.
    Duplicate names (after case-fold and trim) are merged with a warning,
    keeping the first occurrence.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"cast list file not found: {path}")
    raw = path.read_text(encoding="utf-8").strip()
    if not raw:
        raise ValueError(f"{path}: empty cast list")
    if raw.startswith(("[", "{")):
        data = json.loads(raw)
        if isinstance(data, dict):
            data = data.get("characters")
        records = data
    else:
        records = [json.loads(line) for line in raw.splitlines() if line.strip()]
    if not isinstance(records, list) or not records:
        raise ValueError(f"{path}: empty cast list")

    members: list[CastMember] = []
    seen: set[str] = set()
    merged = 0
    for rec in records:
        name = str(rec["character"]).strip()
        key = canonical_name(name)
        if not key:
            continue
        if key in seen:
            merged += 1
            continue
        seen.add(key)
        members.append(CastMember(name, rec.get("actor"), rec.get("face")))
    if merged:
        logger.warning("%s: merged %d duplicate character name(s)", path, merged)
    if not members:
        raise ValueError(f"{path}: empty cast list")
    return CastList(tuple(members))


# ---------------------------------------------------------------------------
# Audio ingestion
# ---------------------------------------------------------------------------

_PCM_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
    np.dtype(np.uint8): 128.0,
}


def load_wav(path: str | Path) -> AudioBuffer:
    """Load a mono PCM WAV file, resampling to 16 kHz if needed.

    Resampling uses linear interpolation; stereo input is rejected
    (multi-channel handling is out of scope).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"audio file not found: {path}")
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype in _PCM_SCALE:
        samples = data.astype(np.float32) / _PCM_SCALE[data.dtype]
        if data.dtype == np.uint8:
            samples -= 1.0
    else:
        samples = data.astype(np.float32)
    if rate != TARGET_SAMPLE_RATE:
        samples = resample_linear(samples, rate, TARGET_SAMPLE_RATE)
    return AudioBuffer(samples, TARGET_SAMPLE_RATE)


def save_wav(buffer: AudioBuffer, path: str | Path) -> None:
    pcm = np.clip(buffer.samples, -1.0, 1.0)
    wavfile.write(str(path), buffer.sample_rate, (pcm * 32767.0).astype(np.int16))


def resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    """Resample by linear interpolation, preserving total duration."""
    if src_rate == dst_rate:
        return np.asarray(samples, dtype=np.float32)
    n_src = len(samples)
    n_dst = int(round(n_src * dst_rate / src_rate))
    src_t = np.arange(n_src, dtype=np.float64) / src_rate
    dst_t = np.arange(n_dst, dtype=np.float64) / dst_rate
    return np.interp(dst_t, src_t, samples).astype(np.float32)


def write_ad_records(records: Iterable[ADRecord], path: str | Path) -> int:
    """Write line-delimited AD records (UTF-8). Returns the count written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
            n += 1
    return n


def read_ad_records(path: str | Path) -> list[ADRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(ADRecord.from_json(line))
    return out


def segments_from_records(
    records: Sequence[tuple[float, float, str]], speaker: Optional[str] = None
) -> tuple[TimedSegment, ...]:
    """Convenience builder from (start, end, text) triples."""
    return tuple(TimedSegment(text, start, end, speaker) for start, end, text in records)
