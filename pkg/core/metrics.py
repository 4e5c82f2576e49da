"""
MOTIONTOK Pose Metrics
MPJPE, scale-normalised MPJPE and horizon arithmetic.
"""

from typing import Union

import numpy as np

from errors import ShapeError, NumericError, DataError
from .skeleton import PoseSequence

PoseLike = Union[PoseSequence, np.ndarray]

SCALE_METHODS = ("optimal", "least_squares")


def _pair(pred: PoseLike, gt: PoseLike) -> tuple:
    if isinstance(pred, PoseSequence) and isinstance(gt, PoseSequence):
        if pred.coordinate_space is not gt.coordinate_space:
            raise ShapeError(
                f"Coordinate spaces differ: {pred.coordinate_space.value} vs {gt.coordinate_space.value}"
            )
    p = pred.data if isinstance(pred, PoseSequence) else np.asarray(pred, dtype=np.float64)
    g = gt.data if isinstance(gt, PoseSequence) else np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeError(f"Shape mismatch: {p.shape} vs {g.shape}")
    if p.ndim != 3 or p.shape[-1] != 3:
        raise ShapeError(f"Expected F x N x 3 poses, got {p.shape}")
    return p, g


def per_frame_errors(pred: PoseLike, gt: PoseLike) -> np.ndarray:
    """Mean joint error of each frame (F-vector)."""
    p, g = _pair(pred, gt)
    return np.linalg.norm(p - g, axis=-1).mean(axis=1)


def mpjpe(pred: PoseLike, gt: PoseLike) -> float:
    """Mean Euclidean distance between corresponding joints over all frames."""
    p, g = _pair(pred, gt)
    return float(np.linalg.norm(p - g, axis=-1).mean())


def least_squares_scale(pred: np.ndarray, gt: np.ndarray) -> float:
    """Closed-form s* = <pred, gt> / <pred, pred>."""
    denom = float(np.sum(pred * pred))
    if denom == 0.0:
        raise NumericError("Scale is undefined for an all-zero prediction")
    return float(np.sum(pred * gt)) / denom


def _mean_distance(scale: float, p: np.ndarray, g: np.ndarray) -> float:
    return float(np.linalg.norm(scale * p - g, axis=-1).mean())


def optimal_scale(pred: np.ndarray, gt: np.ndarray, iterations: int = 200) -> float:
    """
    Scale minimising the mean joint distance.

    The objective is convex in the scale and its minimiser lies between the
    smallest and largest per-joint scales, so bisection on the subgradient
    converges to the global minimum. The least-squares scale breaks ties.
    """
    p = pred.reshape(-1, 3)
    g = gt.reshape(-1, 3)
    s_ls = least_squares_scale(p, g)

    norms = np.sum(p * p, axis=-1)
    moving = norms > 0
    per_joint = np.sum(p[moving] * g[moving], axis=-1) / norms[moving]
    lo, hi = float(per_joint.min()), float(per_joint.max())
    if hi - lo == 0.0:
        return lo

    def slope(s: float) -> float:
        resid = s * p[moving] - g[moving]
        dist = np.linalg.norm(resid, axis=-1)
        active = dist > 0
        return float(np.sum(np.sum(resid[active] * p[moving][active], axis=-1) / dist[active]))

    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            hi = mid
        else:
            lo = mid
    best = 0.5 * (lo + hi)

    if _mean_distance(s_ls, p, g) <= _mean_distance(best, p, g):
        return s_ls
    return best


def n_mpjpe(pred: PoseLike, gt: PoseLike, per_frame: bool = False,
            method: str = "optimal") -> float:
    """
    MPJPE after a global scale alignment of the prediction.

    Args:
        pred: Predicted poses
        gt: Ground-truth poses
        per_frame: One scale per frame instead of one per sequence
        method: 'optimal' (minimises MPJPE, never worse than the
            least-squares scale) or 'least_squares' (closed form only)
    """
    if method not in SCALE_METHODS:
        raise DataError(f"Unknown scale method {method!r}")
    p, g = _pair(pred, gt)
    pick = optimal_scale if method == "optimal" else least_squares_scale

    if per_frame:
        scaled = np.stack([pick(p[f], g[f]) * p[f] for f in range(p.shape[0])])
    else:
        scaled = pick(p, g) * p
    return mpjpe(scaled, g)


def horizon_frames(ms: int, rate_hz: float) -> int:
    """Frame count covering `ms` milliseconds; must be integral."""
    frames = ms * rate_hz / 1000.0
    rounded = int(round(frames))
    if abs(frames - rounded) > 1e-9:
        raise DataError(f"{ms} ms at {rate_hz} Hz is not a whole number of frames ({frames})")
    return rounded


def motion_magnitude(seq: PoseLike) -> float:
    """Mean distance of each joint from its clip-mean position."""
    data = seq.data if isinstance(seq, PoseSequence) else np.asarray(seq, dtype=np.float64)
    centred = data - data.mean(axis=0, keepdims=True)
    return float(np.linalg.norm(centred, axis=-1).mean())
