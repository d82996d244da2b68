"""Stage-2 audio representation and sliding-window correlation matching.

The movie chunk and the clip are both turned into per-frame L2-normalized
power mel spectrograms at a fixed 512/16000 = 0.032 s frame resolution.
AD regions are zeroed out on the movie side, the movie chunk is cut into
non-overlapping windows, and each surviving window scans the clip for its
maximum-correlation position. The resulting (clip-frame, movie-frame,
weight) scatter is the input to the robust line fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import AudioBuffer, TrackKind, TranscriptTrack

DEFAULT_WINDOW_FRAMES = 50  # 50 frames * 0.032 s = 1.6 s matching windows


@dataclass(frozen=True)
class MelConfig:
    """Spectrogram parameters, pinned for bit-reproducible outputs.

    Only the hop (512 samples at 16 kHz) is load-bearing for the frame
    resolution; the rest are explicit so two runs always agree: FFT 1024,
    periodic Hann window, zero center-padding, 64 Slaney-style mel bands
    spanning 0-8000 Hz, power (magnitude squared) spectrogram.
    """

    sample_rate: int = 16000
    n_fft: int = 1024
    hop: int = 512
    n_mels: int = 64
    fmin: float = 0.0
    fmax: float = 8000.0

    @property
    def seconds_per_frame(self) -> float:
        return self.hop / self.sample_rate


DEFAULT_MEL = MelConfig()


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    """n_mels x T matrix of non-negative mel energies.

    When normalized, every non-zero column has unit L2 norm; all-zero
    columns stay zero.
    """

    frames: np.ndarray = field(repr=False)
    seconds_per_frame: float
    normalized: bool

    def __post_init__(self) -> None:
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D mel matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @property
    def n_mels(self) -> int:
        return self.frames.shape[0]

    @property
    def n_frames(self) -> int:
        return self.frames.shape[1]

    def frame_of(self, seconds: float) -> int:
        return int(np.floor(seconds / self.seconds_per_frame))


def _hz_to_mel(freq: np.ndarray) -> np.ndarray:
    # Slaney scale: linear below 1 kHz, logarithmic above.
    f_sp = 200.0 / 3.0
    mel = freq / f_sp
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    log_part = freq >= min_log_hz
    mel = np.where(log_part, min_log_mel + np.log(np.maximum(freq, 1e-10) / min_log_hz) / logstep, mel)
    return mel


def _mel_to_hz(mel: np.ndarray) -> np.ndarray:
    f_sp = 200.0 / 3.0
    freq = mel * f_sp
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    log_part = mel >= min_log_mel
    return np.where(log_part, min_log_hz * np.exp(logstep * (mel - min_log_mel)), freq)


def mel_filterbank(config: MelConfig = DEFAULT_MEL) -> np.ndarray:
    """Triangular Slaney-normalized filterbank, shape (n_mels, 1 + n_fft // 2)."""
    fft_freqs = np.linspace(0.0, config.sample_rate / 2.0, 1 + config.n_fft // 2)
    mel_pts = np.linspace(
        _hz_to_mel(np.asarray([config.fmin]))[0],
        _hz_to_mel(np.asarray([config.fmax]))[0],
        config.n_mels + 2,
    )
    hz_pts = _mel_to_hz(mel_pts)
    fdiff = np.diff(hz_pts)
    ramps = hz_pts[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    enorm = 2.0 / (hz_pts[2:] - hz_pts[:-2])
    return weights * enorm[:, None]


def mel_spectrogram(audio: AudioBuffer, config: MelConfig = DEFAULT_MEL) -> MelSpectrogram:
    """Per-frame L2-normalized power mel spectrogram.

    Center padding gives T = floor(N / hop) + 1 frames; zero-energy frames
    are left as zero columns rather than producing NaNs.
    """
    if audio.sample_rate != config.sample_rate:
        raise ValueError(
            f"audio sample rate {audio.sample_rate} != configured {config.sample_rate}"
        )
    if len(audio) == 0:
        raise ValueError("audio buffer is empty")

    pad = config.n_fft // 2
    padded = np.pad(audio.samples.astype(np.float64), (pad, pad))
    frames = np.lib.stride_tricks.sliding_window_view(padded, config.n_fft)[:: config.hop]
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(config.n_fft) / config.n_fft))
    spectrum = np.fft.rfft(frames * window, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    mel = mel_filterbank(config) @ power.T

    norms = np.sqrt((mel * mel).sum(axis=0))
    nonzero = norms > 0.0
    mel[:, nonzero] /= norms[nonzero]
    return MelSpectrogram(mel, config.seconds_per_frame, normalized=True)


def mask_ad_regions(
    spec: MelSpectrogram, ad_track: TranscriptTrack, chunk_offset: float = 0.0
) -> MelSpectrogram:
    """Zero the frame ranges covered by AD narration segments.

    Segment times are absolute; chunk_offset is the absolute time of the
    spectrogram's first frame. Each segment zeroes frames
    [floor((start - offset) / spf), floor((end - offset) / spf)), clamped to
    the chunk; segments entirely outside are ignored.
    """
    if ad_track.kind != TrackKind.AD_NARRATION:
        raise ValueError(f"expected an ad_narration track, got {ad_track.kind.value}")
    spf = spec.seconds_per_frame
    masked = spec.frames.copy()
    for seg in ad_track.segments:
        lo = int(np.floor((seg.start - chunk_offset) / spf))
        hi = int(np.floor((seg.end - chunk_offset) / spf))
        lo = max(lo, 0)
        hi = min(hi, spec.n_frames)
        if hi > lo:
            masked[:, lo:hi] = 0.0
    return MelSpectrogram(masked, spf, normalized=spec.normalized)


@dataclass(frozen=True, eq=False)
class MatchPointSet:
    """Weighted (clip-frame x, movie-frame y) correlation matches.

    Each raw window match is expanded into 5 collinear samples, so the point
    count is 5 x the number of surviving movie windows.
    """

    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    window_frames: int = DEFAULT_WINDOW_FRAMES

    def __post_init__(self) -> None:
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        ws = np.asarray(self.weights, dtype=np.float64)
        if not (xs.shape == ys.shape == ws.shape) or xs.ndim != 1:
            raise ValueError("xs, ys, weights must be 1-D arrays of equal length")
        for arr in (xs, ys, ws):
            arr.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "weights", ws)

    def __len__(self) -> int:
        return len(self.xs)

    def dump_scatter(self, path: str | Path) -> None:
        """Tab-delimited (x, y, weight) dump for plotting and inspection."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("clip_frame\tmovie_frame\tweight\n")
            for x, y, w in zip(self.xs, self.ys, self.weights):
                fh.write(f"{x:.6f}\t{y:.6f}\t{w:.8f}\n")


def correlate_windows(
    movie_spec: MelSpectrogram,
    clip_spec: MelSpectrogram,
    window_frames: int = DEFAULT_WINDOW_FRAMES,
) -> MatchPointSet:
    """Match every unmasked movie window against its best clip position.

    The (masked) movie spectrogram is cut into non-overlapping windows of
    window_frames; windows containing any all-zero frame are dropped. Each
    surviving window starting at movie frame y scans the clip with stride 1,
    taking the clip frame x that maximizes the raw inner product c (first x
    on ties). Matches are expanded into 5 collinear samples at offsets
    linspace(0, window_frames, 5) added to both coordinates, each carrying
    weight c / window_frames.

    An all-masked movie chunk yields an empty point set, which callers treat
    as an alignment failure; a clip shorter than one window is an error.
    """
    if not (movie_spec.normalized and clip_spec.normalized):
        raise ValueError("spectrograms must be normalized before correlation")
    if movie_spec.n_mels != clip_spec.n_mels:
        raise ValueError(
            f"mel band mismatch: movie {movie_spec.n_mels} vs clip {clip_spec.n_mels}"
        )
    w = int(window_frames)
    if w < 1:
        raise ValueError("window_frames must be positive")
    if clip_spec.n_frames < w:
        raise ValueError(
            f"clip too short to correlate: {clip_spec.n_frames} frames < window {w}"
        )

    n_windows = max(0, (movie_spec.n_frames - w) // w + 1)
    empty = MatchPointSet(
        np.empty(0), np.empty(0), np.empty(0), window_frames=w
    )
    if n_windows == 0:
        return empty

    starts = np.arange(n_windows) * w
    movie = movie_spec.frames
    windows = movie[:, : n_windows * w].T.reshape(n_windows, w, movie.shape[0])
    # a window is masked if any of its frames is entirely zero
    frame_energy = windows.sum(axis=2)
    keep = ~np.any(frame_energy == 0.0, axis=1)
    if not np.any(keep):
        return empty
    starts = starts[keep]
    flat_windows = windows[keep].reshape(keep.sum(), -1)  # (kept, w * n_mels)

    clip = clip_spec.frames
    clip_views = np.lib.stride_tricks.sliding_window_view(clip, w, axis=1)
    # (positions, w, n_mels) -> (positions, w * n_mels), matching window layout
    clip_flat = np.ascontiguousarray(clip_views.transpose(1, 2, 0)).reshape(
        clip_views.shape[1], -1
    )

    corr = clip_flat @ flat_windows.T  # (clip positions, kept windows)
    best_pos = corr.argmax(axis=0)
    best_cor = corr[best_pos, np.arange(corr.shape[1])]

    offsets = np.linspace(0.0, w, 5)
    xs = (best_pos[:, None] + offsets[None, :]).ravel()
    ys = (starts[:, None] + offsets[None, :]).ravel()
    weights = np.repeat(best_cor / w, 5)
    return MatchPointSet(xs, ys, weights, window_frames=w)
