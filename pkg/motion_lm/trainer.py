"""
MOTIONTOK Unified Training
Multi-task training of the motion language model: batches mix PE, MP and MIB
samples at configurable ratios under a single masked cross-entropy.
"""

import math
import logging
from typing import List, Dict, Any, Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm

import config
from errors import ConfigError, DataError, EmptyDatasetError, NumericError, ContextOverflowError
from .vocabulary import MotionVocabulary
from .prompts import PromptedSample, VisualContext
from .transformer import MotionLM, LmConfig

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    """Right-padded ids with masked targets."""

    input_ids: torch.Tensor         # B x T
    target_ids: torch.Tensor        # B x T, IGNORE_INDEX outside the loss mask
    visuals: List[Optional[VisualContext]]
    tasks: List[str]

    def __len__(self) -> int:
        return self.input_ids.shape[0]


def collate(samples: Sequence[PromptedSample], pad_id: int) -> Batch:
    if not samples:
        raise EmptyDatasetError("Cannot collate an empty batch")
    length = max(len(s.input_ids) for s in samples)
    inputs = torch.full((len(samples), length), pad_id, dtype=torch.long)
    targets = torch.full((len(samples), length), config.IGNORE_INDEX, dtype=torch.long)
    for i, s in enumerate(samples):
        n = len(s.input_ids)
        inputs[i, :n] = torch.from_numpy(s.input_ids)
        t = torch.from_numpy(s.target_ids).clone()
        t[~torch.from_numpy(s.loss_mask)] = config.IGNORE_INDEX
        targets[i, :n] = t
    return Batch(
        input_ids=inputs,
        target_ids=targets,
        visuals=[s.visual for s in samples],
        tasks=[s.task.value for s in samples],
    )


def token_losses(model: MotionLM, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-position cross-entropy (B x T) and the mask of scored positions."""
    valid = batch.target_ids != config.IGNORE_INDEX
    if not valid.any():
        raise DataError("Loss mask is empty: no response tokens to score")
    prefix, lengths = model.embed_prefixes(batch.visuals)
    logits = model(batch.input_ids.to(model.device), prefix, lengths)
    losses = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]),
        batch.target_ids.to(model.device).reshape(-1),
        ignore_index=config.IGNORE_INDEX,
        reduction='none',
    ).view_as(batch.target_ids)
    return losses, valid.to(model.device)


def ar_loss(model: MotionLM, batch: Batch) -> torch.Tensor:
    """Mean cross-entropy over all masked positions of the batch."""
    losses, valid = token_losses(model, batch)
    return losses.sum() / valid.sum()


def per_task_losses(losses: torch.Tensor, valid: torch.Tensor, tasks: Sequence[str]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for task in sorted(set(tasks)):
        rows = torch.tensor([t == task for t in tasks], device=losses.device)
        mask = valid & rows[:, None]
        out[task] = float(losses[mask].sum() / mask.sum())
    return out


# ============================================================================
# TRAINING
# ============================================================================

@dataclass
class UnifiedTrainConfig:
    """Optimisation schedule and task mixture."""

    steps: int = config.LM_STEPS
    batch_size: int = config.LM_BATCH
    lr: float = config.LM_LR
    warmup_ratio: float = config.LM_WARMUP_RATIO
    grad_clip: float = config.GRAD_CLIP_NORM
    log_interval: int = config.LM_LOG_INTERVAL
    task_mix: Dict[str, float] = field(default_factory=lambda: dict(config.DEFAULT_TASK_MIX))
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("steps and batch_size must be positive")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ConfigError(f"warmup_ratio must lie in [0, 1), got {self.warmup_ratio}")
        unknown = set(self.task_mix) - set(config.TASKS)
        if unknown:
            raise ConfigError(f"Unknown tasks in mixture: {sorted(unknown)}")
        if any(r < 0 for r in self.task_mix.values()):
            raise ConfigError("Task ratios must be non-negative")
        if sum(self.task_mix.values()) <= 0:
            raise ConfigError("At least one task needs a positive ratio")

    @property
    def active_tasks(self) -> List[str]:
        return [t for t in config.TASKS if self.task_mix.get(t, 0.0) > 0]

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class LmLogEntry:
    step: int
    loss: float
    task_losses: Dict[str, float]
    lr: float

    def to_dict(self) -> Dict[str, Any]:
        return {'step': self.step, 'loss': self.loss, 'task_losses': self.task_losses, 'lr': self.lr}


@dataclass
class UnifiedTrainResult:
    model: MotionLM
    log: List[LmLogEntry]

    @property
    def final(self) -> LmLogEntry:
        return self.log[-1]


def warmup_cosine(total_steps: int, warmup_ratio: float):
    """LR multiplier: linear warmup then cosine decay to zero."""
    warmup = int(total_steps * warmup_ratio)

    def factor(step: int) -> float:
        if step < warmup:
            return (step + 1) / warmup
        progress = (step - warmup) / max(1, total_steps - warmup)
        return 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))

    return factor


def _task_probabilities(cfg: UnifiedTrainConfig) -> Tuple[List[str], np.ndarray]:
    tasks = cfg.active_tasks
    ratios = np.array([cfg.task_mix[t] for t in tasks], dtype=np.float64)
    return tasks, ratios / ratios.sum()


def sample_batch(datasets: Dict[str, Sequence[PromptedSample]], tasks: List[str],
                 probs: np.ndarray, batch_size: int, rng: np.random.Generator) -> List[PromptedSample]:
    """Draw a task per slot by ratio, then a sample of that task."""
    picks = rng.choice(len(tasks), size=batch_size, p=probs)
    batch = []
    for k in picks:
        pool = datasets[tasks[k]]
        batch.append(pool[int(rng.integers(len(pool)))])
    return batch


def train_unified(datasets: Dict[str, Sequence[PromptedSample]], vocab: MotionVocabulary,
                  lm_cfg: Optional[LmConfig] = None,
                  train_cfg: Optional[UnifiedTrainConfig] = None,
                  progress: bool = False) -> UnifiedTrainResult:
    """
    Train a motion language model from scratch on a task mixture.

    Args:
        datasets: Prompted samples per task name
        vocab: Vocabulary the samples were built with
        lm_cfg: Architecture (vocab_size must equal the vocabulary's size)
        train_cfg: Schedule and task ratios; a single ratio of 1 gives a
            specialised model

    Raises:
        EmptyDatasetError: a task with positive ratio has no samples
        ContextOverflowError: a sample does not fit in the context window
        NumericError: the loss became non-finite
    """
    train_cfg = train_cfg or UnifiedTrainConfig()
    lm_cfg = lm_cfg or LmConfig(vocab_size=vocab.size)
    if lm_cfg.vocab_size != vocab.size:
        raise ConfigError(f"Model vocab_size {lm_cfg.vocab_size} != vocabulary size {vocab.size}")

    tasks, probs = _task_probabilities(train_cfg)
    for task in tasks:
        if not datasets.get(task):
            raise EmptyDatasetError(f"Task {task} has ratio {train_cfg.task_mix[task]} but no samples")

    torch.manual_seed(train_cfg.seed)
    model = MotionLM(lm_cfg)

    longest = max(len(s) - 1 + model.prefix_length(s.visual) for t in tasks for s in datasets[t])
    if longest > lm_cfg.context_length:
        raise ContextOverflowError(
            f"Longest training sample needs {longest} positions, context length is {lm_cfg.context_length}"
        )

    optimizer = torch.optim.AdamW(model.parameters(), lr=train_cfg.lr)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, warmup_cosine(train_cfg.steps, train_cfg.warmup_ratio)
    )
    rng = np.random.default_rng(train_cfg.seed)
    log: List[LmLogEntry] = []

    logger.info(
        f"Training motion LM on {', '.join(f'{t}={len(datasets[t])}' for t in tasks)} "
        f"for {train_cfg.steps} steps"
    )

    model.train()
    for step in tqdm(range(1, train_cfg.steps + 1), desc="motion-lm", disable=not progress):
        batch = collate(sample_batch(datasets, tasks, probs, train_cfg.batch_size, rng), vocab.pad_id)
        losses, valid = token_losses(model, batch)
        loss = losses.sum() / valid.sum()
        if not torch.isfinite(loss):
            logger.error(f"Non-finite language-model loss at step {step}")
            raise NumericError(f"Language-model loss became non-finite at step {step}")

        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
        optimizer.step()
        scheduler.step()

        if step % train_cfg.log_interval == 0 or step == train_cfg.steps:
            entry = LmLogEntry(
                step=step,
                loss=float(loss),
                task_losses=per_task_losses(losses.detach(), valid, batch.tasks),
                lr=scheduler.get_last_lr()[0],
            )
            log.append(entry)
            logger.info(
                f"step {step}: loss {entry.loss:.4f} "
                + " ".join(f"{t} {v:.4f}" for t, v in entry.task_losses.items())
            )

    model.eval()
    return UnifiedTrainResult(model=model, log=log)


@torch.no_grad()
def evaluate_loss(model: MotionLM, samples: Sequence[PromptedSample], pad_id: int,
                  batch_size: int = config.LM_BATCH) -> float:
    """Mean masked cross-entropy over a sample set."""
    if not samples:
        raise EmptyDatasetError("No samples to score")
    model.eval()
    total, count = 0.0, 0
    for start in range(0, len(samples), batch_size):
        batch = collate(samples[start:start + batch_size], pad_id)
        losses, valid = token_losses(model, batch)
        total += float(losses.sum())
        count += int(valid.sum())
    return total / count
