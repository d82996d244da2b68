"""Weighted RANSAC line fitting on the correlation scatter, with acceptance gates.

The fitted line y = slope * x + intercept maps clip frames to movie-chunk
frames. A fit is accepted only when the slope lies strictly inside the
plausible speed-ratio band (0.8, 1.25), the inlier mean squared residual is
strictly below 100 frames^2, and the consensus set is large enough.
Everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .melalign import MatchPointSet

DEFAULT_RESIDUAL_THRESHOLD = 50.0  # frames
DEFAULT_ITERATIONS = 2000
DEFAULT_MIN_INLIERS = 10  # 10 expanded samples = 2 raw windows


@dataclass(frozen=True)
class FitGates:
    """Accept/reject thresholds; slope and MSE bounds are strict."""

    slope_min: float = 0.8
    slope_max: float = 1.25
    mse_max: float = 100.0
    min_inliers: int = DEFAULT_MIN_INLIERS


DEFAULT_GATES = FitGates()


def evaluate_gates(slope: float, mse: float, inlier_count: int, gates: FitGates = DEFAULT_GATES) -> bool:
    """True iff slope_min < slope < slope_max, mse < mse_max, inliers >= minimum."""
    return (
        gates.slope_min < slope < gates.slope_max
        and mse < gates.mse_max
        and inlier_count >= gates.min_inliers
    )


@dataclass(frozen=True)
class AlignmentFit:
    """Fitted clip->movie frame mapping plus its quality verdict."""

    slope: float  # movie frames per clip frame
    intercept: float  # movie frames
    mse: float  # weighted mean squared residual over inliers, frames^2
    inlier_count: int
    total_points: int
    accepted: bool
    rng_seed: int

    def report(self) -> dict:
        return {
            "slope": self.slope,
            "intercept_frames": self.intercept,
            "mse": self.mse,
            "inliers": self.inlier_count,
            "total": self.total_points,
            "accepted": self.accepted,
            "seed": self.rng_seed,
        }


def _weighted_line(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    wsum = w.sum()
    xm = (w * x).sum() / wsum
    ym = (w * y).sum() / wsum
    dx = x - xm
    denom = (w * dx * dx).sum()
    if denom == 0.0:
        raise ValueError("all consensus points share one x; cannot fit a line")
    slope = (w * dx * (y - ym)).sum() / denom
    return float(slope), float(ym - slope * xm)


def ransac_line_fit(
    points: MatchPointSet,
    residual_threshold: float = DEFAULT_RESIDUAL_THRESHOLD,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    gates: FitGates = DEFAULT_GATES,
) -> AlignmentFit:
    """Fit a line through the match scatter, robust to outlier matches.

    Each iteration samples two distinct points and counts the points within
    residual_threshold of their exact line; the consensus set maximizing
    total match weight wins, with ties broken by lower weighted MSE and then
    by iteration order. The winning consensus set is refit by weighted least
    squares and the weighted mean squared residual over its inliers becomes
    the reported MSE. The gate verdict is recorded on the returned fit.
    """
    x = points.xs
    y = points.ys
    w = points.weights
    n = len(points)
    if n < 2 or np.unique(x).size < 2:
        raise ValueError(f"need at least 2 points with distinct x, got {n}")

    rng = np.random.default_rng(seed)
    # all candidate pairs drawn up front so results are schedule-independent
    idx_a = rng.integers(0, n, size=iterations)
    idx_b = rng.integers(0, n, size=iterations)

    x1, y1 = x[idx_a], y[idx_a]
    dx = x[idx_b] - x1
    usable = dx != 0.0
    if not np.any(usable):
        raise ValueError("all sampled candidate lines are vertical")
    slopes = np.zeros(iterations)
    slopes[usable] = (y[idx_b][usable] - y1[usable]) / dx[usable]
    intercepts = y1 - slopes * x1

    scores = np.full(iterations, -np.inf)
    mses = np.full(iterations, np.inf)
    chunk = max(1, min(iterations, 8_000_000 // max(n, 1)))
    for lo in range(0, iterations, chunk):
        hi = min(lo + chunk, iterations)
        resid = y[None, :] - (slopes[lo:hi, None] * x[None, :] + intercepts[lo:hi, None])
        inliers = np.abs(resid) <= residual_threshold
        wmat = inliers * w[None, :]
        score = wmat.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            mse = (wmat * resid**2).sum(axis=1) / score
        ok = usable[lo:hi] & (score > 0.0)
        scores[lo:hi] = np.where(ok, score, -np.inf)
        mses[lo:hi] = np.where(ok, mse, np.inf)
    if not np.any(np.isfinite(scores)):
        raise ValueError("no candidate line gathered any inlier weight")

    # highest weight wins; ties broken by lower weighted MSE, then iteration order
    best_i = int(np.lexsort((np.arange(iterations), mses, -scores))[0])
    resid = y - (slopes[best_i] * x + intercepts[best_i])
    best_mask = np.abs(resid) <= residual_threshold

    xin, yin, win = x[best_mask], y[best_mask], w[best_mask]
    slope, intercept = _weighted_line(xin, yin, win)
    resid = yin - (slope * xin + intercept)
    mse = float((win * resid**2).sum() / win.sum())
    inlier_count = int(best_mask.sum())

    return AlignmentFit(
        slope=slope,
        intercept=intercept,
        mse=mse,
        inlier_count=inlier_count,
        total_points=n,
        accepted=evaluate_gates(slope, mse, inlier_count, gates),
        rng_seed=seed,
    )


@dataclass(frozen=True)
class TimeMapping:
    """Invertible linear map between movie (AV) time and clip time, seconds.

    movie_time = av_offset + intercept + slope * clip_time, where av_offset
    is the absolute movie time of the correlated chunk's first frame.
    """

    slope: float  # movie seconds per clip second
    intercept: float  # seconds, chunk-relative
    av_offset: float = 0.0  # absolute movie time of chunk start

    def to_clip(self, t_movie: float) -> float:
        return (t_movie - self.av_offset - self.intercept) / self.slope

    def to_movie(self, t_clip: float) -> float:
        return self.av_offset + self.intercept + self.slope * t_clip


def to_time_mapping(
    fit: AlignmentFit, seconds_per_frame: float, av_offset: float = 0.0
) -> TimeMapping:
    """Convert an accepted frame-domain fit into a seconds-domain mapping."""
    if not fit.accepted:
        raise ValueError("cannot build a time mapping from a rejected fit")
    if fit.slope == 0.0:
        raise ValueError("fit slope is zero")
    return TimeMapping(
        slope=fit.slope,
        intercept=fit.intercept * seconds_per_frame,
        av_offset=av_offset,
    )
