"""
MOTIONTOK Tokenizer Training
AdamW over the VQ objective with per-interval reconstruction error (camera
millimetres) and codebook usage, plus the stream-mode ablation runner.
"""

import json
import logging
from typing import List, Dict, Any, Optional, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import torch
from tqdm import tqdm

import config
from errors import EmptyDatasetError, NumericError, ShapeError
from core.dataset import MotionClip
from core.metrics import mpjpe, motion_magnitude
from .model import VisionGuidedTokenizer, VgmtConfig
from .losses import vq_loss_from_outputs
from .codebook import bucket_usage, counts_perplexity

logger = logging.getLogger(__name__)


@dataclass
class TokenizerTrainConfig:
    """Optimisation schedule of the tokenizer."""

    steps: int = config.TOKENIZER_STEPS
    batch_size: int = config.TOKENIZER_BATCH
    lr: float = config.TOKENIZER_LR
    log_interval: int = config.TOKENIZER_LOG_INTERVAL
    grad_clip: float = config.GRAD_CLIP_NORM
    eval_clips: int = 32
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class TrainLogEntry:
    """One logging interval."""

    step: int
    losses: Dict[str, float]
    recon_mpjpe_mm: float = float('nan')
    perplexity: float = float('nan')
    usage: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'step': self.step,
            'losses': self.losses,
            'recon_mpjpe_mm': self.recon_mpjpe_mm,
            'perplexity': self.perplexity,
            'usage': self.usage,
        }


@dataclass
class TokenizerTrainResult:
    model: VisionGuidedTokenizer
    log: List[TrainLogEntry]

    @property
    def final(self) -> TrainLogEntry:
        return self.log[-1]


def write_train_log(path: str, entries: Sequence[Any]) -> None:
    """JSON Lines, one entry per logging interval."""
    with open(path, 'w') as f:
        for entry in entries:
            f.write(json.dumps(entry.to_dict(), sort_keys=True) + '\n')


def stack_pixel_poses(clips: Sequence[MotionClip], factor: int) -> torch.Tensor:
    if not clips:
        raise EmptyDatasetError("Tokenizer training needs at least one clip")
    frames = {c.num_frames for c in clips}
    if len(frames) != 1:
        raise ShapeError(f"Clips have different lengths: {sorted(frames)}")
    if next(iter(frames)) % factor:
        raise ShapeError(f"Clip length {next(iter(frames))} is not divisible by {factor}")
    return torch.from_numpy(np.stack([c.pixel_pose.data for c in clips])).float()


def evaluate_reconstruction(model: VisionGuidedTokenizer, clips: Sequence[MotionClip]) -> Dict[str, Any]:
    """
    Tokenize, decode and unproject each clip; report camera-space MPJPE and
    code counts.
    """
    if not clips:
        raise EmptyDatasetError("Nothing to evaluate")
    errors = []
    counts = np.zeros(model.cfg.num_codes, dtype=np.int64)
    for clip in clips:
        grid = model.tokenize(clip.pixel_pose)
        rec = clip.to_camera(model.decode(grid))
        errors.append(mpjpe(rec, clip.pose))
        counts += np.bincount(grid.indices.reshape(-1), minlength=model.cfg.num_codes)
    return {
        'mpjpe_mm': float(np.mean(errors)),
        'counts': counts,
        'perplexity': counts_perplexity(counts),
    }


def train_tokenizer(clips: Sequence[MotionClip], model_cfg: Optional[VgmtConfig] = None,
                    train_cfg: Optional[TokenizerTrainConfig] = None,
                    progress: bool = False) -> TokenizerTrainResult:
    """
    Train a tokenizer from scratch.

    Args:
        clips: Camera-space training clips of equal length
        model_cfg: Architecture and loss weights
        train_cfg: Optimisation schedule
        progress: Show a progress bar

    Returns:
        TokenizerTrainResult with the trained model (eval mode) and its log

    Raises:
        EmptyDatasetError: no clips
        NumericError: the loss became non-finite
    """
    model_cfg = model_cfg or VgmtConfig()
    train_cfg = train_cfg or TokenizerTrainConfig()

    torch.manual_seed(train_cfg.seed)
    model = VisionGuidedTokenizer(model_cfg)
    poses = stack_pixel_poses(clips, model_cfg.downsample)
    model.set_normalization(poses.numpy())

    if model_cfg.beta_commit == 0 and model_cfg.stream_mode == "fused":
        logger.warning("beta_commit = 0: the visual encoder receives no gradient from the VQ objective")

    optimizer = torch.optim.AdamW(model.parameters(), lr=train_cfg.lr)
    generator = torch.Generator().manual_seed(train_cfg.seed)
    eval_set = list(clips[:train_cfg.eval_clips])
    log: List[TrainLogEntry] = []

    logger.info(
        f"Training tokenizer ({model_cfg.stream_mode}/{model_cfg.token_mode}, K={model_cfg.num_codes}) "
        f"on {len(clips)} clips for {train_cfg.steps} steps"
    )

    model.train()
    for step in tqdm(range(1, train_cfg.steps + 1), desc="tokenizer", disable=not progress):
        batch = poses[torch.randint(len(poses), (train_cfg.batch_size,), generator=generator)]

        if not model.codebook.is_initialized:
            with torch.no_grad():
                _, z_v, z_s = model.encode(batch)
            model.codebook.init_from_data(z_v, z_s, seed=train_cfg.seed)

        out = model(batch)
        terms = vq_loss_from_outputs(out, model_cfg.beta_s, model_cfg.beta_v, model_cfg.beta_commit)
        if not torch.isfinite(terms.total):
            logger.error(f"Non-finite tokenizer loss at step {step}")
            raise NumericError(f"Tokenizer loss became non-finite at step {step}")

        optimizer.zero_grad(set_to_none=True)
        terms.total.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
        optimizer.step()

        if step % train_cfg.log_interval == 0 or step == train_cfg.steps:
            model.eval()
            stats = evaluate_reconstruction(model, eval_set)
            model.train()
            entry = TrainLogEntry(
                step=step,
                losses=terms.to_dict(),
                recon_mpjpe_mm=stats['mpjpe_mm'],
                perplexity=stats['perplexity'],
                usage=bucket_usage(stats['counts']),
            )
            log.append(entry)
            logger.info(
                f"step {step}: loss {entry.losses['total']:.4f} recon {entry.recon_mpjpe_mm:.2f} mm "
                f"perplexity {entry.perplexity:.1f} unused {entry.usage['unused']}/{model_cfg.num_codes}"
            )

    model.eval()
    return TokenizerTrainResult(model=model, log=log)


# ============================================================================
# STREAM-MODE ABLATION
# ============================================================================

@dataclass
class AblationReport:
    """Reconstruction error per stream mode and seed."""

    seeds: List[int]
    errors: Dict[str, List[float]]
    ordering_held: List[bool]
    motion_magnitude_mm: float = 0.0

    @property
    def failures(self) -> int:
        return sum(1 for held in self.ordering_held if not held)

    @property
    def trend_holds(self) -> bool:
        """fused <= skeleton <= visual on all but at most one seed."""
        return self.failures <= 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seeds': self.seeds,
            'errors_mm': self.errors,
            'ordering_held': self.ordering_held,
            'trend_holds': self.trend_holds,
            'motion_magnitude_mm': self.motion_magnitude_mm,
        }


def run_tokenizer_ablation(clips: Sequence[MotionClip], model_cfg: Optional[VgmtConfig] = None,
                           train_cfg: Optional[TokenizerTrainConfig] = None,
                           seeds: Sequence[int] = (0, 1, 2),
                           progress: bool = False) -> AblationReport:
    """Train fused, skeleton-only and visual-only tokenizers for each seed."""
    model_cfg = model_cfg or VgmtConfig()
    train_cfg = train_cfg or TokenizerTrainConfig()
    errors: Dict[str, List[float]] = {mode: [] for mode in config.STREAM_MODES}
    held = []

    for seed in seeds:
        for mode in config.STREAM_MODES:
            result = train_tokenizer(
                clips,
                replace(model_cfg, stream_mode=mode),
                replace(train_cfg, seed=seed),
                progress=progress,
            )
            errors[mode].append(result.final.recon_mpjpe_mm)
        fused, skel, vis = (errors[m][-1] for m in ("fused", "skeleton", "visual"))
        ok = fused <= skel <= vis
        held.append(ok)
        if not ok:
            logger.warning(
                f"Seed {seed}: ordering fused <= skeleton <= visual did not hold "
                f"({fused:.2f} / {skel:.2f} / {vis:.2f} mm)"
            )

    magnitude = float(np.mean([motion_magnitude(c.pose) for c in clips]))
    report = AblationReport(seeds=list(seeds), errors=errors, ordering_held=held,
                            motion_magnitude_mm=magnitude)
    logger.info(f"Ablation finished: ordering held on {len(held) - report.failures}/{len(held)} seeds")
    return report
