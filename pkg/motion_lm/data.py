"""
MOTIONTOK Task Datasets
Turns camera-space clips into tokenized conversation samples for the three
tasks using a frozen tokenizer.
"""

import logging
from typing import Dict, List, Optional, Sequence
from dataclasses import dataclass

import numpy as np
import torch

import config
from errors import ConfigError, EmptyDatasetError
from core.skeleton import Task
from core.dataset import MotionClip, split_clip
from vgmt.model import VisionGuidedTokenizer
from vgmt.tokens import TokenGrid
from vgmt.visual import render_heatmaps, pixels_to_grid
from numerics.ops import FeatureMapSequence
from .vocabulary import MotionVocabulary
from .prompts import PromptedSample, VisualContext, build_prompt

logger = logging.getLogger(__name__)


@dataclass
class TaskDataConfig:
    """How clips become task samples."""

    frames: int = config.CLIP_FRAMES
    reference_noise_px: float = config.REFERENCE_POINT_NOISE_PX
    visual_for_generation: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError(f"frames must be positive, got {self.frames}")
        if self.reference_noise_px < 0:
            raise ConfigError(f"reference_noise_px must be non-negative, got {self.reference_noise_px}")


@dataclass(eq=False)
class TaskExample:
    """A prompted sample with the ground truth it is scored against."""

    sample: PromptedSample
    target: TokenGrid
    truth: MotionClip                       # frames the response describes
    history: Optional[MotionClip] = None    # MP only

    @property
    def task(self) -> Task:
        return self.sample.task

    @property
    def label(self) -> Optional[str]:
        return self.truth.pose.label


def visual_context(clip: MotionClip, tokenizer: VisionGuidedTokenizer,
                   noise_px: float = 0.0, rng: Optional[np.random.Generator] = None) -> VisualContext:
    """Rendered feature maps and (optionally perturbed) 2D reference points of a clip."""
    cfg = tokenizer.cfg
    px = clip.pixel_pose
    maps = render_heatmaps(px, cfg.feature_grid, cfg.heatmap_sigma, cfg.image_size)
    xy = np.array(px.data[..., :2])
    if noise_px > 0:
        rng = rng or np.random.default_rng(0)
        xy = xy + rng.normal(0.0, noise_px, size=xy.shape)
    ref = pixels_to_grid(torch.from_numpy(xy), cfg.image_size, cfg.feature_grid).numpy()
    return VisualContext(maps=maps, ref_points=ref)


def keyframe_context(visual: VisualContext, window: int) -> VisualContext:
    """Visual context cut down to the first and last window's frames."""
    frames = visual.num_frames
    keep = np.r_[0:window, frames - window:frames]
    return VisualContext(maps=FeatureMapSequence(visual.maps.data[keep]),
                         ref_points=visual.ref_points[keep])


def build_task_examples(clips: Sequence[MotionClip], tokenizer: VisionGuidedTokenizer,
                        vocab: MotionVocabulary, tasks: Sequence[str] = config.TASKS,
                        data_cfg: Optional[TaskDataConfig] = None) -> Dict[str, List[TaskExample]]:
    """
    Task examples per task name.

    PE and MIB use the first `frames` frames of each clip. MP uses them as
    history and the next `frames` frames as the future; clips too short for
    that are skipped for MP.
    """
    cfg = data_cfg or TaskDataConfig()
    unknown = set(tasks) - set(config.TASKS)
    if unknown:
        raise ConfigError(f"Unknown tasks: {sorted(unknown)}")
    if not clips:
        raise EmptyDatasetError("No clips to build task samples from")

    rng = np.random.default_rng(cfg.seed)
    examples: Dict[str, List[TaskExample]] = {task: [] for task in tasks}
    skipped = 0

    for clip in clips:
        if clip.num_frames < cfg.frames:
            skipped += 1
            continue
        segment = clip.slice_frames(0, cfg.frames)
        label = clip.pose.label
        grid = tokenizer.tokenize(segment.pixel_pose) if ("pe" in tasks or "mib" in tasks) else None

        if "pe" in tasks:
            visual = visual_context(segment, tokenizer, cfg.reference_noise_px, rng)
            sample = build_prompt(Task.PE, vocab, grid, visual=visual, label=label)
            examples["pe"].append(TaskExample(sample=sample, target=grid, truth=segment))

        if "mib" in tasks:
            visual = None
            if cfg.visual_for_generation:
                # in-between frames stay hidden
                full = visual_context(segment, tokenizer, cfg.reference_noise_px, rng)
                visual = keyframe_context(full, tokenizer.cfg.downsample)
            sample = build_prompt(Task.MIB, vocab, grid, visual=visual, label=label)
            examples["mib"].append(TaskExample(sample=sample, target=grid, truth=segment))

        if "mp" in tasks and clip.num_frames >= 2 * cfg.frames:
            history, future = split_clip(clip.slice_frames(0, 2 * cfg.frames), cfg.frames)
            hist_grid = tokenizer.tokenize(history.pixel_pose)
            fut_grid = tokenizer.tokenize(future.pixel_pose)
            visual = visual_context(history, tokenizer, cfg.reference_noise_px, rng) if cfg.visual_for_generation else None
            sample = build_prompt(Task.MP, vocab, fut_grid, history=hist_grid, visual=visual, label=label)
            examples["mp"].append(TaskExample(sample=sample, target=fut_grid, truth=future, history=history))

    if skipped:
        logger.warning(f"Skipped {skipped} clips shorter than {cfg.frames} frames")
    logger.info("Built task samples: " + ", ".join(f"{t}={len(v)}" for t, v in examples.items()))
    return examples


def samples_of(examples: Dict[str, List[TaskExample]]) -> Dict[str, List[PromptedSample]]:
    return {task: [e.sample for e in items] for task, items in examples.items()}
