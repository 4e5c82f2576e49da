"""
MOTIONTOK Clip Datasets
Camera-space clips paired with their camera, generated or loaded from disk.
"""

import os
import json
import glob
import logging
from typing import Any, Dict, List, Optional, Tuple
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

import config
from errors import EmptyDatasetError, FormatError
from .skeleton import PoseSequence, CameraModel, CoordinateSpace
from .geometry import preprocess, unproject, root_depths
from .synth import SynthConfig, synth_motion
from .mskl import read_mskl, write_mskl

logger = logging.getLogger(__name__)

CAMERAS_FILENAME = "cameras.json"
MANIFEST_FILENAME = "manifest.json"


@dataclass(frozen=True, eq=False)
class MotionClip:
    """A camera-space clip and the camera that observes it."""

    pose: PoseSequence
    camera: CameraModel = field(default_factory=CameraModel)

    @cached_property
    def pixel_pose(self) -> PoseSequence:
        return preprocess(self.pose, self.camera)

    @cached_property
    def root_depth(self) -> np.ndarray:
        return root_depths(self.pose)

    @property
    def num_frames(self) -> int:
        return self.pose.num_frames

    def to_camera(self, pixel_pose: PoseSequence, start: int = 0) -> PoseSequence:
        """Unproject a pixel_rootrel prediction aligned with frames start.."""
        depth = self.root_depth[start:start + pixel_pose.num_frames]
        return unproject(pixel_pose, self.camera, depth)

    def slice_frames(self, start: int, stop: int) -> 'MotionClip':
        return MotionClip(pose=self.pose.slice_frames(start, stop), camera=self.camera)


def generate_clips(count: int, frames: int = config.CLIP_FRAMES, seed: int = 0,
                   synth: Optional[SynthConfig] = None,
                   camera: Optional[CameraModel] = None) -> List[MotionClip]:
    """Deterministic synthetic clips; clip i uses seed (seed, i)."""
    cfg = synth or SynthConfig(frames=frames)
    if cfg.frames != frames:
        cfg = SynthConfig(**{**cfg.__dict__, 'frames': frames})
    cam = camera or CameraModel()
    clips = []
    for i in range(count):
        clip_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        clips.append(MotionClip(pose=synth_motion(cfg, clip_seed), camera=cam))
    logger.info(f"Generated {count} synthetic clips of {frames} frames (seed {seed})")
    return clips


def clip_filename(index: int) -> str:
    return f"clip_{index:05d}{config.POSE_SUFFIX}"


def save_clips(directory: str, clips: List[MotionClip]) -> List[str]:
    """Write clips as MSKL files plus a cameras.json index."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    cameras = {}
    for i, clip in enumerate(clips):
        name = clip_filename(i)
        path = os.path.join(directory, name)
        write_mskl(path, clip.pose)
        cameras[name] = clip.camera.to_dict()
        paths.append(path)
    with open(os.path.join(directory, CAMERAS_FILENAME), 'w') as f:
        json.dump(cameras, f, indent=2, sort_keys=True)
    return paths


def read_cameras(directory: str) -> Dict[str, Dict[str, Any]]:
    """File name -> camera dict from a directory's cameras.json (empty if absent)."""
    camera_path = os.path.join(directory, CAMERAS_FILENAME)
    if not os.path.exists(camera_path):
        return {}
    try:
        with open(camera_path) as f:
            cameras = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"Cannot read {camera_path}: {e}")
    if not isinstance(cameras, dict):
        raise FormatError(f"{camera_path}: expected an object keyed by file name")
    return cameras


def camera_for(path: str) -> CameraModel:
    """Camera recorded for an MSKL file by gen-data, else the default camera."""
    cameras = read_cameras(os.path.dirname(os.path.abspath(path)))
    cam_data = cameras.get(os.path.basename(path))
    return CameraModel.from_dict(cam_data) if cam_data else CameraModel()


def load_clips(directory: str) -> List[MotionClip]:
    """Load every MSKL file of a directory (camera_mm sequences)."""
    paths = sorted(glob.glob(os.path.join(directory, f"*{config.POSE_SUFFIX}")))
    if not paths:
        raise EmptyDatasetError(f"No {config.POSE_SUFFIX} files in {directory}")

    cameras = read_cameras(directory)
    clips = []
    for path in paths:
        seq = read_mskl(path)
        if seq.coordinate_space is not CoordinateSpace.CAMERA_MM:
            raise FormatError(f"{path}: dataset clips must be in camera_mm space")
        cam_data = cameras.get(os.path.basename(path))
        cam = CameraModel.from_dict(cam_data) if cam_data else CameraModel()
        clips.append(MotionClip(pose=seq, camera=cam))
    logger.info(f"Loaded {len(clips)} clips from {directory}")
    return clips


def split_clip(clip: MotionClip, history: int) -> Tuple[MotionClip, MotionClip]:
    """(history, future) halves of a clip."""
    return clip.slice_frames(0, history), clip.slice_frames(history, clip.num_frames)


def chunk_clips(clips: List[MotionClip], frames: int = config.CLIP_FRAMES) -> List[MotionClip]:
    """Consecutive non-overlapping chunks of `frames` frames; remainders are dropped."""
    return [clip.slice_frames(start, start + frames)
            for clip in clips
            for start in range(0, clip.num_frames - frames + 1, frames)]


def synth_clip(seed: int, frames: int = config.CLIP_FRAMES,
               camera: Optional[CameraModel] = None) -> MotionClip:
    return MotionClip(pose=synth_motion(SynthConfig(frames=frames), seed), camera=camera or CameraModel())
