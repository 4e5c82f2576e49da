"""
MOTIONTOK Skeleton Types
Joint layouts, pose sequences, cameras and task samples.
"""

from typing import Dict, List, Optional, Any, Sequence, Tuple
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

import config
from errors import ShapeError, DataError, CoordinateSpaceError
from numerics.ops import FeatureMapSequence


class CoordinateSpace(Enum):
    """Coordinate space of a pose sequence."""
    CAMERA_MM = "camera_mm"
    PIXEL_ROOTREL = "pixel_rootrel"


class Task(Enum):
    """Tasks served by the unified model."""
    PE = "pe"
    MP = "mp"
    MIB = "mib"


# ============================================================================
# JOINT LAYOUT
# ============================================================================

@dataclass(frozen=True)
class JointLayout:
    """Ordered joints, the root joint and the body-part partition."""

    names: Tuple[str, ...]
    root_index: int
    groups: Dict[str, Tuple[int, ...]]
    parents: Tuple[int, ...] = ()

    def __post_init__(self):
        n = len(self.names)
        if n == 0:
            raise DataError("Joint layout has no joints")
        if not 0 <= self.root_index < n:
            raise DataError(f"Root index {self.root_index} outside 0..{n - 1}")

        members = [j for part in self.groups.values() for j in part]
        if sorted(members) != list(range(n)):
            raise DataError("Body-part groups must partition the joints exactly")

        if not any(self.root_index in part for part in self.groups.values()):
            raise DataError("Root joint is not in any body part")
        if "torso" in self.groups and self.root_index not in self.groups["torso"]:
            raise DataError("Root joint must belong to the torso group")

        if self.parents and len(self.parents) != n:
            raise DataError("Parent list length does not match joint count")

    @property
    def num_joints(self) -> int:
        return len(self.names)

    @property
    def has_canonical_groups(self) -> bool:
        """True when the layout has exactly the five serialized body parts."""
        return set(self.groups.keys()) == set(config.BODY_PARTS)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def group_of(self, joint: int) -> str:
        for part, members in self.groups.items():
            if joint in members:
                return part
        raise DataError(f"Joint {joint} not in layout")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'names': list(self.names),
            'root_index': self.root_index,
            'groups': {k: list(v) for k, v in self.groups.items()},
            'parents': list(self.parents),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'JointLayout':
        return cls(
            names=tuple(data['names']),
            root_index=int(data['root_index']),
            groups={k: tuple(v) for k, v in data['groups'].items()},
            parents=tuple(data.get('parents', ())),
        )


# Standard Human3.6M 17-joint ordering
H36M_JOINT_NAMES = (
    "pelvis", "right_hip", "right_knee", "right_ankle",
    "left_hip", "left_knee", "left_ankle",
    "spine", "thorax", "neck", "head",
    "left_shoulder", "left_elbow", "left_wrist",
    "right_shoulder", "right_elbow", "right_wrist",
)

H36M_PARENTS = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15)

H36M_LAYOUT = JointLayout(
    names=H36M_JOINT_NAMES,
    root_index=H36M_JOINT_NAMES.index(config.ROOT_JOINT),
    groups={
        "torso": (0, 7, 8, 9, 10),
        "left_arm": (11, 12, 13),
        "right_arm": (14, 15, 16),
        "left_leg": (4, 5, 6),
        "right_leg": (1, 2, 3),
    },
    parents=H36M_PARENTS,
)

# Rest pose offsets from the pelvis (mm, x right / y down / z forward)
H36M_REST_POSE = np.array([
    [0.0, 0.0, 0.0],          # pelvis
    [-130.0, 0.0, 0.0],       # right_hip
    [-130.0, 445.0, 10.0],    # right_knee
    [-130.0, 890.0, 0.0],     # right_ankle
    [130.0, 0.0, 0.0],        # left_hip
    [130.0, 445.0, 10.0],     # left_knee
    [130.0, 890.0, 0.0],      # left_ankle
    [0.0, -230.0, -10.0],     # spine
    [0.0, -480.0, 0.0],       # thorax
    [0.0, -580.0, -40.0],     # neck
    [0.0, -700.0, -20.0],     # head
    [160.0, -450.0, 0.0],     # left_shoulder
    [175.0, -180.0, 20.0],    # left_elbow
    [185.0, 70.0, -30.0],     # left_wrist
    [-160.0, -450.0, 0.0],    # right_shoulder
    [-175.0, -180.0, 20.0],   # right_elbow
    [-185.0, 70.0, -30.0],    # right_wrist
])


# ============================================================================
# POSE SEQUENCE
# ============================================================================

@dataclass(frozen=True, eq=False)
class PoseSequence:
    """F x N x 3 joint positions with frame rate and coordinate space."""

    data: np.ndarray
    frame_rate_hz: float = config.FRAME_RATE_HZ
    coordinate_space: CoordinateSpace = CoordinateSpace.CAMERA_MM
    layout: JointLayout = H36M_LAYOUT
    label: Optional[str] = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ShapeError(f"Pose data must be F x N x 3, got {data.shape}")
        if data.shape[0] < 1:
            raise ShapeError("Pose sequence needs at least one frame")
        if data.shape[1] != self.layout.num_joints:
            raise ShapeError(
                f"Pose has {data.shape[1]} joints, layout has {self.layout.num_joints}"
            )
        if not np.all(np.isfinite(data)):
            raise DataError("Pose sequence contains non-finite values")
        if self.frame_rate_hz <= 0:
            raise DataError(f"Frame rate must be positive, got {self.frame_rate_hz}")

        space = CoordinateSpace(self.coordinate_space)
        if space is CoordinateSpace.PIXEL_ROOTREL:
            if np.any(data[:, self.layout.root_index, 2] != 0.0):
                raise DataError("Root depth must be exactly 0 in pixel_rootrel space")

        data.setflags(write=False)
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'coordinate_space', space)

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def num_joints(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray, **changes) -> 'PoseSequence':
        """Copy with new positions and optional metadata changes."""
        fields = {
            'frame_rate_hz': self.frame_rate_hz,
            'coordinate_space': self.coordinate_space,
            'layout': self.layout,
            'label': self.label,
        }
        fields.update(changes)
        return PoseSequence(data=data, **fields)

    def slice_frames(self, start: int, stop: int) -> 'PoseSequence':
        return self.with_data(self.data[start:stop])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'frames': self.data.tolist(),
            'frame_rate_hz': self.frame_rate_hz,
            'space': self.coordinate_space.value,
            'layout': list(self.layout.names),
            'label': self.label,
        }


# ============================================================================
# CAMERA
# ============================================================================

@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera intrinsics (pixels)."""

    focal: Tuple[float, float] = config.DEFAULT_FOCAL
    principal_point: Tuple[float, float] = config.DEFAULT_PRINCIPAL_POINT

    def __post_init__(self):
        fx, fy = self.focal
        if not (fx > 0 and fy > 0):
            raise DataError(f"Focal lengths must be positive, got {self.focal}")
        object.__setattr__(self, 'focal', (float(fx), float(fy)))
        cx, cy = self.principal_point
        object.__setattr__(self, 'principal_point', (float(cx), float(cy)))

    def to_dict(self) -> Dict[str, Any]:
        return {'focal': list(self.focal), 'principal_point': list(self.principal_point)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CameraModel':
        return cls(
            focal=tuple(data['focal']),
            principal_point=tuple(data['principal_point']),
        )


# ============================================================================
# TASK SAMPLE
# ============================================================================

@dataclass(frozen=True, eq=False)
class TaskSample:
    """Conditioning inputs and target pose for one task."""

    task: Task
    target_pose: PoseSequence
    input_pose: Optional[PoseSequence] = None
    visual_features: Optional[FeatureMapSequence] = None

    def __post_init__(self):
        task = Task(self.task)
        object.__setattr__(self, 'task', task)

        if task is Task.PE and self.visual_features is None:
            raise DataError("Pose estimation samples need visual features")
        if task in (Task.MP, Task.MIB) and self.input_pose is None:
            raise DataError(f"{task.value} samples need an input pose")
        if self.input_pose is not None and self.input_pose.num_joints != self.target_pose.num_joints:
            raise ShapeError("Input and target poses disagree on joint count")
