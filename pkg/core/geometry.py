"""
MOTIONTOK Geometry
Camera-space to pixel/root-relative preprocessing and its inverse.
"""

from typing import Sequence

import numpy as np

from errors import CoordinateSpaceError, DegenerateProjectionError, ShapeError
from .skeleton import PoseSequence, CameraModel, CoordinateSpace


def root_depths(seq: PoseSequence) -> np.ndarray:
    """Per-frame depth of the root joint (camera space, mm)."""
    if seq.coordinate_space is not CoordinateSpace.CAMERA_MM:
        raise CoordinateSpaceError("Root depth is only defined in camera_mm space")
    return seq.data[:, seq.layout.root_index, 2].copy()


def preprocess(seq: PoseSequence, cam: CameraModel) -> PoseSequence:
    """
    Project XY to pixels and make depth relative to the root joint.

    The root is not translated to the origin in XY.

    Raises:
        CoordinateSpaceError: input is not in camera_mm space
        DegenerateProjectionError: a joint has non-positive depth
    """
    if seq.coordinate_space is not CoordinateSpace.CAMERA_MM:
        raise CoordinateSpaceError(
            f"preprocess expects camera_mm input, got {seq.coordinate_space.value}"
        )

    xyz = seq.data
    depth = xyz[..., 2]
    if np.any(depth <= 0):
        frame, joint = np.argwhere(depth <= 0)[0]
        raise DegenerateProjectionError(
            f"Non-positive depth {depth[frame, joint]} at frame {frame}, joint {joint}"
        )

    fx, fy = cam.focal
    cx, cy = cam.principal_point
    out = np.empty_like(xyz)
    out[..., 0] = fx * xyz[..., 0] / depth + cx
    out[..., 1] = fy * xyz[..., 1] / depth + cy
    out[..., 2] = depth - depth[:, seq.layout.root_index:seq.layout.root_index + 1]

    return seq.with_data(out, coordinate_space=CoordinateSpace.PIXEL_ROOTREL)


def unproject(seq: PoseSequence, cam: CameraModel, root_depth: Sequence[float]) -> PoseSequence:
    """
    Inverse of preprocess given the per-frame root depth (mm).
    """
    if seq.coordinate_space is not CoordinateSpace.PIXEL_ROOTREL:
        raise CoordinateSpaceError(
            f"unproject expects pixel_rootrel input, got {seq.coordinate_space.value}"
        )
    root_depth = np.asarray(root_depth, dtype=np.float64).reshape(-1)
    if root_depth.shape[0] != seq.num_frames:
        raise ShapeError(
            f"Root depth has {root_depth.shape[0]} frames, sequence has {seq.num_frames}"
        )

    px = seq.data
    depth = px[..., 2] + root_depth[:, None]
    if np.any(depth <= 0):
        raise DegenerateProjectionError("Reconstructed depth is not positive")

    fx, fy = cam.focal
    cx, cy = cam.principal_point
    out = np.empty_like(px)
    out[..., 0] = (px[..., 0] - cx) * depth / fx
    out[..., 1] = (px[..., 1] - cy) * depth / fy
    out[..., 2] = depth

    return seq.with_data(out, coordinate_space=CoordinateSpace.CAMERA_MM)
