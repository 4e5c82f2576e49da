"""
MOTIONTOK Core Module
Pose sequences, coordinate preprocessing, metrics, synthetic data and pose files.
"""

from .skeleton import (
    JointLayout,
    PoseSequence,
    CameraModel,
    TaskSample,
    CoordinateSpace,
    Task,
    H36M_LAYOUT,
    H36M_JOINT_NAMES,
    H36M_REST_POSE,
)
from .geometry import preprocess, unproject, root_depths
from .metrics import (
    mpjpe,
    n_mpjpe,
    per_frame_errors,
    horizon_frames,
    motion_magnitude,
)
from .synth import SynthConfig, synth_motion, bone_lengths, constant_velocity_motion, linear_motion
from .mskl import encode_mskl, decode_mskl, read_mskl, write_mskl
from .dataset import (
    MotionClip, generate_clips, save_clips, load_clips, split_clip, chunk_clips, synth_clip,
    read_cameras, camera_for,
)

__all__ = [
    'JointLayout',
    'PoseSequence',
    'CameraModel',
    'TaskSample',
    'CoordinateSpace',
    'Task',
    'H36M_LAYOUT',
    'H36M_JOINT_NAMES',
    'H36M_REST_POSE',
    'preprocess',
    'unproject',
    'root_depths',
    'mpjpe',
    'n_mpjpe',
    'per_frame_errors',
    'horizon_frames',
    'motion_magnitude',
    'SynthConfig',
    'synth_motion',
    'bone_lengths',
    'constant_velocity_motion',
    'linear_motion',
    'encode_mskl',
    'decode_mskl',
    'read_mskl',
    'write_mskl',
    'MotionClip',
    'generate_clips',
    'save_clips',
    'load_clips',
    'split_clip',
    'chunk_clips',
    'read_cameras',
    'camera_for',
    'synth_clip',
]
