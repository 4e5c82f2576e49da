"""
MOTIONTOK Synthetic Motion
Deterministic pseudo-gait generator used in place of recorded clips.

Each joint rotates its child bones by a sum of low-frequency sinusoids;
rotations compose down the kinematic tree so bone lengths are kept. The root
sways and drifts at constant velocity.
"""

from typing import Tuple, Optional
from dataclasses import dataclass, field

import numpy as np

import config
from errors import DataError, ShapeError
from .skeleton import (
    PoseSequence,
    JointLayout,
    CoordinateSpace,
    H36M_LAYOUT,
    H36M_REST_POSE,
)


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings."""

    frames: int = config.CLIP_FRAMES
    layout: JointLayout = H36M_LAYOUT
    rest_pose: Optional[np.ndarray] = None
    components: int = config.SYNTH_COMPONENTS
    amplitude_range: Tuple[float, float] = config.SYNTH_AMPLITUDE_RANGE
    frequency_range: Tuple[float, float] = config.SYNTH_FREQUENCY_RANGE
    root_sway_mm: float = config.SYNTH_ROOT_SWAY_MM
    root_speed_range: Tuple[float, float] = config.SYNTH_ROOT_SPEED_RANGE
    subject_depth: float = config.DEFAULT_SUBJECT_DEPTH
    frame_rate_hz: float = config.FRAME_RATE_HZ
    random_heading: bool = True

    def __post_init__(self):
        if self.frames < 1:
            raise DataError(f"frames must be >= 1, got {self.frames}")
        if not self.layout.parents:
            raise DataError("Synthetic motion needs a layout with a kinematic tree")
        lo, hi = self.amplitude_range
        if lo < 0 or hi < lo:
            raise DataError(f"Invalid amplitude range {self.amplitude_range}")

    @classmethod
    def static(cls, frames: int = config.CLIP_FRAMES) -> 'SynthConfig':
        """Settings that reproduce the rest pose in every frame."""
        return cls(
            frames=frames,
            amplitude_range=(0.0, 0.0),
            root_sway_mm=0.0,
            root_speed_range=(0.0, 0.0),
            random_heading=False,
        )

    def rest(self) -> np.ndarray:
        if self.rest_pose is not None:
            return np.asarray(self.rest_pose, dtype=np.float64)
        return H36M_REST_POSE


def rotation_matrices(axis_angle: np.ndarray) -> np.ndarray:
    """Rodrigues formula for ... x 3 axis-angle vectors."""
    theta = np.linalg.norm(axis_angle, axis=-1, keepdims=True)
    safe = np.where(theta > 0, theta, 1.0)
    k = axis_angle / safe
    kx, ky, kz = k[..., 0], k[..., 1], k[..., 2]
    zero = np.zeros_like(kx)
    K = np.stack([
        np.stack([zero, -kz, ky], axis=-1),
        np.stack([kz, zero, -kx], axis=-1),
        np.stack([-ky, kx, zero], axis=-1),
    ], axis=-2)
    s = np.sin(theta)[..., None]
    c = np.cos(theta)[..., None]
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + s * K + (1 - c) * (K @ K)


def _sinusoids(rng: np.random.Generator, cfg: SynthConfig, count: int, t: np.ndarray) -> np.ndarray:
    """count x F x 3 sums of sinusoids."""
    shape = (count, cfg.components, 3)
    amp = rng.uniform(*cfg.amplitude_range, size=shape) / cfg.components
    freq = rng.uniform(*cfg.frequency_range, size=shape)
    phase = rng.uniform(0.0, 2 * np.pi, size=shape)
    arg = 2 * np.pi * freq[..., None, :] * t[None, None, :, None] + phase[..., None, :]
    return np.sum(amp[..., None, :] * np.sin(arg), axis=1)


def synth_motion(cfg: SynthConfig, seed: int) -> PoseSequence:
    """
    Generate one camera-space clip.

    Args:
        cfg: Generator settings
        seed: Random seed (same seed, same clip)

    Returns:
        PoseSequence in camera_mm space at cfg.frame_rate_hz
    """
    rng = np.random.default_rng(seed)
    layout = cfg.layout
    rest = cfg.rest()
    n = layout.num_joints
    t = np.arange(cfg.frames) / cfg.frame_rate_hz

    angles = _sinusoids(rng, cfg, n, t)                       # N x F x 3
    local = rotation_matrices(angles)                          # N x F x 3 x 3

    heading = rng.uniform(-np.pi / 2, np.pi / 2) if cfg.random_heading else 0.0
    yaw = rotation_matrices(np.array([0.0, heading, 0.0]))

    sway_phase = rng.uniform(0.0, 2 * np.pi, size=3)
    sway_freq = rng.uniform(*cfg.frequency_range, size=3)
    speed = rng.uniform(*cfg.root_speed_range)
    direction = rng.uniform(0.0, 2 * np.pi)
    velocity = speed * np.array([np.cos(direction), 0.0, np.sin(direction)])
    sway = cfg.root_sway_mm * np.sin(2 * np.pi * sway_freq[None, :] * t[:, None] + sway_phase[None, :])
    root_pos = np.array([0.0, 0.0, cfg.subject_depth]) + sway + velocity[None, :] * t[:, None]

    glob = np.empty((n, cfg.frames, 3, 3))
    pos = np.empty((cfg.frames, n, 3))
    root = layout.root_index
    glob[root] = yaw[None] @ local[root]
    pos[:, root] = root_pos

    # parents precede children in the layout order
    for j in range(n):
        parent = layout.parents[j]
        if parent < 0:
            continue
        bone = rest[j] - rest[parent]
        pos[:, j] = pos[:, parent] + np.einsum('fij,j->fi', glob[parent], bone)
        glob[j] = glob[parent] @ local[j]

    return PoseSequence(
        data=pos,
        frame_rate_hz=cfg.frame_rate_hz,
        coordinate_space=CoordinateSpace.CAMERA_MM,
        layout=layout,
    )


def bone_lengths(seq: PoseSequence) -> np.ndarray:
    """F x (N-1) bone lengths along the kinematic tree."""
    parents = seq.layout.parents
    children = [j for j in range(seq.num_joints) if parents[j] >= 0]
    diffs = seq.data[:, children] - seq.data[:, [parents[j] for j in children]]
    return np.linalg.norm(diffs, axis=-1)


def constant_velocity_motion(frames: int, velocity_mm: Tuple[float, float, float],
                             depth: float = config.DEFAULT_SUBJECT_DEPTH,
                             frame_rate_hz: float = config.FRAME_RATE_HZ) -> PoseSequence:
    """Rest pose translated by a fixed displacement every frame."""
    step = np.asarray(velocity_mm, dtype=np.float64)
    base = H36M_REST_POSE + np.array([0.0, 0.0, depth])
    data = base[None] + np.arange(frames)[:, None, None] * step[None, None, :]
    return PoseSequence(data=data, frame_rate_hz=frame_rate_hz,
                        coordinate_space=CoordinateSpace.CAMERA_MM)


def linear_motion(frames: int, start: np.ndarray, end: np.ndarray,
                  frame_rate_hz: float = config.FRAME_RATE_HZ) -> PoseSequence:
    """Joint-wise linear interpolation from `start` to `end` (N x 3 camera-space poses)."""
    if frames < 2:
        raise DataError(f"Linear motion needs at least 2 frames, got {frames}")
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    if start.shape != end.shape:
        raise ShapeError(f"Start {start.shape} and end {end.shape} poses differ")
    alpha = np.linspace(0.0, 1.0, frames)[:, None, None]
    return PoseSequence(data=(1 - alpha) * start[None] + alpha * end[None],
                        frame_rate_hz=frame_rate_hz, coordinate_space=CoordinateSpace.CAMERA_MM)
