"""
MOTIONTOK Prompt Construction
Conversation samples for pose estimation, motion prediction and motion
in-betweening:

    <bos> User : {instruction with inputs} Assistant : {preamble} {serialization} <eos>

The loss mask covers the response and the closing <eos> only.
"""

import logging
from typing import List, Optional, Union
from dataclasses import dataclass, field

import numpy as np

import config
from errors import DataError, ShapeError
from core.skeleton import Task
from numerics.ops import FeatureMapSequence
from vgmt.tokens import TokenGrid
from .vocabulary import (
    MotionVocabulary, load_template, split_text,
    BOS, EOS, USER, ASSISTANT, COLON, START, MIDDLE, END,
    VIDEO_PLACEHOLDER, SKELETON_PLACEHOLDER,
)
from .serialization import serialize

logger = logging.getLogger(__name__)

# Serialization mode of each task's response
RESPONSE_MODES = {Task.PE: "plain", Task.MP: "future_prefix", Task.MIB: "plain"}


@dataclass(frozen=True, eq=False)
class VisualContext:
    """Per-frame feature maps and 2D joint reference points (grid coordinates)."""

    maps: FeatureMapSequence
    ref_points: np.ndarray      # F x N x 2

    def __post_init__(self):
        ref = np.asarray(self.ref_points, dtype=np.float64)
        if ref.ndim != 3 or ref.shape[2] != 2:
            raise ShapeError(f"Reference points must be F x N x 2, got {ref.shape}")
        if ref.shape[0] != self.maps.num_frames:
            raise ShapeError(
                f"{ref.shape[0]} frames of reference points for {self.maps.num_frames} feature maps"
            )
        object.__setattr__(self, 'ref_points', ref)

    @property
    def num_frames(self) -> int:
        return self.maps.num_frames


@dataclass(eq=False)
class PromptedSample:
    """One training / evaluation conversation as shifted id sequences."""

    task: Task
    input_ids: np.ndarray           # S[:-1]
    target_ids: np.ndarray          # S[1:]
    loss_mask: np.ndarray           # True where target_ids is response or <eos>
    prompt_length: int              # tokens of S up to and including "Assistant :"
    num_windows: int                # windows the response must contain
    response_mode: str = "plain"
    visual: Optional[VisualContext] = None
    label: Optional[str] = None
    window_numbers: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.task = Task(self.task)
        self.input_ids = np.asarray(self.input_ids, dtype=np.int64)
        self.target_ids = np.asarray(self.target_ids, dtype=np.int64)
        self.loss_mask = np.asarray(self.loss_mask, dtype=bool)
        if not (len(self.input_ids) == len(self.target_ids) == len(self.loss_mask)):
            raise ShapeError("input_ids, target_ids and loss_mask lengths differ")
        if self.loss_mask[:self.prompt_length - 1].any():
            raise DataError("Loss mask covers prompt positions")
        if self.task is Task.PE and self.visual is None:
            raise DataError("Pose estimation samples need a visual context")

    @property
    def sequence_ids(self) -> np.ndarray:
        return np.concatenate([self.input_ids[:1], self.target_ids])

    @property
    def prompt_ids(self) -> np.ndarray:
        return self.sequence_ids[:self.prompt_length]

    @property
    def response_ids(self) -> np.ndarray:
        """Response tokens including the closing <eos>."""
        return self.sequence_ids[self.prompt_length:]

    def __len__(self) -> int:
        return len(self.input_ids) + 1


def video_tokens(version: str = config.TEMPLATE_VERSION) -> List[str]:
    return split_text(load_template("video", version))


def _fill(template: str, placeholder: str, tokens: List[str]) -> List[str]:
    out: List[str] = []
    for tok in split_text(template):
        out.extend(tokens if tok == placeholder else [tok])
    return out


def keyframe_tokens(grid: TokenGrid) -> List[str]:
    """[START] first window [MIDDLE] last window [END], original window numbers."""
    w = grid.num_windows
    return ([START] + serialize(grid.slice_windows(0, 1), "plain", [1])
            + [MIDDLE] + serialize(grid.slice_windows(w - 1, w), "plain", [w])
            + [END])


def prompt_tokens(task: Union[Task, str], history: Optional[TokenGrid] = None,
                  keyframes: Optional[TokenGrid] = None, with_video: bool = False,
                  version: str = config.TEMPLATE_VERSION) -> List[str]:
    """Instruction text with its inputs filled in."""
    task = Task(task)
    if task is Task.PE:
        return _fill(load_template("pe", version), VIDEO_PLACEHOLDER, video_tokens(version))
    video = video_tokens(version) if with_video else []
    if task is Task.MP:
        if history is None:
            raise DataError("Motion prediction needs a history grid")
        return video + _fill(load_template("mp", version), SKELETON_PLACEHOLDER,
                             serialize(history, "plain"))
    if keyframes is None:
        raise DataError("In-betweening needs the keyframe grid")
    if keyframes.num_windows < 3:
        raise DataError(f"In-betweening needs at least 3 windows, got {keyframes.num_windows}")
    return video + _fill(load_template("mib", version), SKELETON_PLACEHOLDER,
                         keyframe_tokens(keyframes))


def response_tokens(grid: TokenGrid, mode: str = "plain",
                    version: str = config.TEMPLATE_VERSION) -> List[str]:
    preamble = load_template("response", version).replace("{frames}", str(grid.num_windows))
    return split_text(preamble) + serialize(grid, mode)


def build_prompt(task: Union[Task, str], vocab: MotionVocabulary, target: TokenGrid,
                 history: Optional[TokenGrid] = None,
                 visual: Optional[VisualContext] = None,
                 label: Optional[str] = None) -> PromptedSample:
    """
    Build a conversation sample.

    Args:
        task: pe, mp or mib
        vocab: Vocabulary used to map tokens to ids
        target: Response grid (PE: the clip, MP: the future, MIB: the full clip)
        history: MP history grid (same window count as target)
        visual: Feature maps and reference points (required for PE, optional
            conditioning for MP and MIB)
        label: Optional action label carried through to evaluation

    Raises:
        DataError: missing task inputs or window-count mismatch
    """
    task = Task(task)
    if target.num_codes != vocab.num_codes:
        raise DataError(f"Grid uses K={target.num_codes}, vocabulary has K={vocab.num_codes}")
    if task is Task.PE and visual is None:
        raise DataError("Pose estimation needs visual conditioning")
    if task is Task.MP:
        if history is None:
            raise DataError("Motion prediction needs a history grid")
        if history.num_windows != target.num_windows:
            raise DataError(
                f"Future must have as many windows as the history "
                f"({target.num_windows} vs {history.num_windows})"
            )
    if visual is not None and task is Task.PE and visual.num_frames != target.num_frames:
        raise ShapeError(f"Visual context has {visual.num_frames} frames, target has {target.num_frames}")

    prompt = [BOS, USER, COLON] + prompt_tokens(
        task, history=history, keyframes=target,
        with_video=visual is not None and task is not Task.PE,
        version=vocab.template_version,
    ) + [ASSISTANT, COLON]
    mode = RESPONSE_MODES[task]
    response = response_tokens(target, mode, vocab.template_version) + [EOS]

    ids = np.asarray(vocab.encode(prompt + response), dtype=np.int64)
    positions = np.arange(1, len(ids))
    return PromptedSample(
        task=task,
        input_ids=ids[:-1],
        target_ids=ids[1:],
        loss_mask=positions >= len(prompt),
        prompt_length=len(prompt),
        num_windows=target.num_windows,
        response_mode=mode,
        visual=visual,
        label=label,
        window_numbers=list(range(1, target.num_windows + 1)),
    )
