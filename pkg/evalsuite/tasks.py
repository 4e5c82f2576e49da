"""
MOTIONTOK Task Evaluation
Pose estimation, motion prediction (80/160/320 ms) and in-betweening
(avg/mid/last) reports. Predictions are parsed, decoded by the tokenizer and
unprojected with the ground-truth root depth, so every error is in camera
millimetres.
"""

import math
import logging
from typing import List, Dict, Any, Optional, Sequence, Callable, Tuple
from dataclasses import dataclass, field

import numpy as np

import config
from errors import DataError, EmptyDatasetError
from core.skeleton import PoseSequence
from core.metrics import mpjpe, n_mpjpe, per_frame_errors, horizon_frames
from vgmt.model import VisionGuidedTokenizer
from motion_lm.vocabulary import MotionVocabulary
from motion_lm.transformer import MotionLM
from motion_lm.generation import DecodeConfig, generate_response, parse_response, transcript_record
from motion_lm.data import TaskExample

logger = logging.getLogger(__name__)

MP_KEYS = ("avg",) + tuple(config.horizon_table())
MIB_KEYS = ("avg", "mid", "last")
PE_KEYS = ("mpjpe", "n_mpjpe")


# ============================================================================
# REPORT
# ============================================================================

@dataclass
class EvalReport:
    """Metric table (millimetres) for one task."""

    task: str
    metrics: Dict[str, float]
    num_samples: int
    config_hash: str = ""
    tables: Dict[str, Dict[str, float]] = field(default_factory=dict)
    malformed_cells: int = 0
    groups: Dict[str, 'EvalReport'] = field(default_factory=dict)

    def __post_init__(self):
        for table in [self.metrics] + list(self.tables.values()):
            for key, value in table.items():
                if not (math.isfinite(value) and value >= 0):
                    raise DataError(f"{self.task} metric {key} = {value} is not a finite non-negative value")

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'task': self.task,
            'metrics': self.metrics,
            'num_samples': self.num_samples,
            'malformed_cells': self.malformed_cells,
            'config_hash': self.config_hash,
        }
        if self.tables:
            data['tables'] = self.tables
        if self.groups:
            data['groups'] = {label: r.to_dict() for label, r in self.groups.items()}
        return data


# ============================================================================
# PREDICTORS
# ============================================================================

class Predictor:
    """Anything that answers a task prompt with response tokens."""

    def __init__(self, vocab: MotionVocabulary):
        self.vocab = vocab

    def predict(self, example: TaskExample) -> List[str]:
        raise NotImplementedError


class ReplayOracle(Predictor):
    """Returns the ground-truth response."""

    def predict(self, example: TaskExample) -> List[str]:
        return self.vocab.decode(example.sample.response_ids[:-1])


class LmPredictor(Predictor):
    """Generates with a trained motion language model and keeps transcripts."""

    def __init__(self, model: MotionLM, vocab: MotionVocabulary,
                 decode_cfg: Optional[DecodeConfig] = None, config_hash: str = ""):
        super().__init__(vocab)
        self.model = model
        self.decode_cfg = decode_cfg or DecodeConfig()
        self.config_hash = config_hash
        self.transcripts: List[Dict[str, Any]] = []

    def predict(self, example: TaskExample) -> List[str]:
        result = generate_response(self.model, self.vocab, example.sample, self.decode_cfg)
        self.transcripts.append(transcript_record(example.sample, self.vocab, result, self.config_hash))
        return result.tokens


# ============================================================================
# METRIC CORES
# ============================================================================

def _check_pairs(preds: Sequence[PoseSequence], truths: Sequence[PoseSequence]) -> None:
    if not preds:
        raise EmptyDatasetError("Nothing to evaluate")
    if len(preds) != len(truths):
        raise DataError(f"{len(preds)} predictions for {len(truths)} ground-truth sequences")


def pe_metrics(preds: Sequence[PoseSequence], truths: Sequence[PoseSequence]) -> Dict[str, float]:
    """MPJPE and N-MPJPE averaged over sequences."""
    _check_pairs(preds, truths)
    return {
        'mpjpe': float(np.mean([mpjpe(p, t) for p, t in zip(preds, truths)])),
        'n_mpjpe': float(np.mean([n_mpjpe(p, t) for p, t in zip(preds, truths)])),
    }


def mp_metrics(preds: Sequence[PoseSequence], truths: Sequence[PoseSequence],
               frame_rate_hz: float = config.FRAME_RATE_HZ,
               horizons_ms: Sequence[int] = config.PREDICTION_HORIZONS_MS
               ) -> Tuple[Dict[str, float], Dict[str, float]]:
    """
    (cumulative, instantaneous) horizon tables.

    Cumulative: mean error over future frames 1..k. Instantaneous: error at
    frame k. Both carry 'avg', the mean over every predicted frame.
    """
    _check_pairs(preds, truths)
    curves = np.stack([per_frame_errors(p, t) for p, t in zip(preds, truths)])   # S x F
    cumulative = {'avg': float(curves.mean())}
    instantaneous = {'avg': float(curves.mean())}
    for ms in horizons_ms:
        k = horizon_frames(ms, frame_rate_hz)
        if k > curves.shape[1]:
            raise DataError(f"Horizon {ms} ms needs {k} frames, only {curves.shape[1]} predicted")
        cumulative[f"ms{ms}"] = float(curves[:, :k].mean())
        instantaneous[f"ms{ms}"] = float(curves[:, k - 1].mean())
    return cumulative, instantaneous


def mib_windows(num_windows: int) -> Tuple[int, int]:
    """
    (mid, last) window indices of the generated in-between span.

    Windows 1 .. W-2 (0-based) lie between the keyframes; with W_gen = W - 2
    the mid window is generated window ceil(W_gen / 2) and the last one is
    generated window W_gen.
    """
    if num_windows < 3:
        raise DataError(f"In-betweening needs at least 3 windows, got {num_windows}")
    generated = num_windows - 2
    return math.ceil(generated / 2), generated


def mib_metrics(preds: Sequence[PoseSequence], truths: Sequence[PoseSequence],
                downsample: int = config.DOWNSAMPLE_FACTOR) -> Dict[str, float]:
    """avg over all in-between frames, mid / last over one window each."""
    _check_pairs(preds, truths)
    curves = np.stack([per_frame_errors(p, t) for p, t in zip(preds, truths)])
    frames = curves.shape[1]
    if frames % downsample:
        raise DataError(f"{frames} frames are not divisible by the window size {downsample}")
    windows = frames // downsample
    mid, last = mib_windows(windows)

    def window(w: int) -> float:
        return float(curves[:, w * downsample:(w + 1) * downsample].mean())

    return {
        'avg': float(curves[:, downsample:(windows - 1) * downsample].mean()),
        'mid': window(mid),
        'last': window(last),
    }


def frozen_pose_baseline(history: PoseSequence, frames: int) -> PoseSequence:
    """Repeat the last history frame."""
    return history.with_data(np.repeat(history.data[-1:], frames, axis=0))


def linear_interpolation_baseline(start: np.ndarray, end: np.ndarray, frames: int,
                                  like: PoseSequence) -> PoseSequence:
    """Joint-wise linear interpolation between two keyframe poses over `frames` frames."""
    alpha = np.linspace(0.0, 1.0, frames)[:, None, None]
    data = (1 - alpha) * np.asarray(start)[None] + alpha * np.asarray(end)[None]
    return like.with_data(data)


# ============================================================================
# EVALUATORS
# ============================================================================

def _decode_predictions(predictor: Predictor, tokenizer: VisionGuidedTokenizer,
                        examples: Sequence[TaskExample], strict: bool) -> Tuple[List[PoseSequence], int]:
    """Camera-space predictions and the total number of repaired cells."""
    if not examples:
        raise EmptyDatasetError("Nothing to evaluate")
    preds, malformed = [], 0
    for example in examples:
        tokens = predictor.predict(example)
        parsed = parse_response(tokens, predictor.vocab, example.sample.num_windows, strict=strict)
        malformed += parsed.malformed
        pixel = tokenizer.decode(parsed.grid)
        preds.append(example.truth.to_camera(pixel))
    if malformed:
        logger.warning(f"{malformed} token cells were repaired while parsing predictions")
    return preds, malformed


def eval_pe(predictor: Predictor, tokenizer: VisionGuidedTokenizer, examples: Sequence[TaskExample],
            strict: bool = False, config_hash: str = "") -> EvalReport:
    """MPJPE / N-MPJPE of poses generated from visual conditioning."""
    preds, malformed = _decode_predictions(predictor, tokenizer, examples, strict)
    metrics = pe_metrics(preds, [e.truth.pose for e in examples])
    logger.info(f"PE on {len(examples)} clips: MPJPE {metrics['mpjpe']:.2f} mm, N-MPJPE {metrics['n_mpjpe']:.2f} mm")
    return EvalReport(task="pe", metrics=metrics, num_samples=len(examples),
                      config_hash=config_hash, malformed_cells=malformed)


def eval_mp(predictor: Predictor, tokenizer: VisionGuidedTokenizer, examples: Sequence[TaskExample],
            strict: bool = False, cumulative: bool = True, config_hash: str = "") -> EvalReport:
    """Horizon errors of the predicted future; `cumulative` picks the primary table."""
    preds, malformed = _decode_predictions(predictor, tokenizer, examples, strict)
    truths = [e.truth.pose for e in examples]
    cum, inst = mp_metrics(preds, truths, truths[0].frame_rate_hz)
    logger.info(f"MP on {len(examples)} clips: " + " ".join(f"{k} {v:.2f}" for k, v in cum.items()))
    return EvalReport(task="mp", metrics=cum if cumulative else inst, num_samples=len(examples),
                      config_hash=config_hash,
                      tables={'cumulative': cum, 'instantaneous': inst},
                      malformed_cells=malformed)


def eval_mib(predictor: Predictor, tokenizer: VisionGuidedTokenizer, examples: Sequence[TaskExample],
             strict: bool = False, config_hash: str = "") -> EvalReport:
    """Errors over the generated in-between windows."""
    preds, malformed = _decode_predictions(predictor, tokenizer, examples, strict)
    metrics = mib_metrics(preds, [e.truth.pose for e in examples], tokenizer.cfg.downsample)
    logger.info(f"MIB on {len(examples)} clips: " + " ".join(f"{k} {v:.2f}" for k, v in metrics.items()))
    return EvalReport(task="mib", metrics=metrics, num_samples=len(examples),
                      config_hash=config_hash, malformed_cells=malformed)


EVALUATORS = {"pe": eval_pe, "mp": eval_mp, "mib": eval_mib}

UNLABELED = "unlabeled"


def group_by_label(examples: Sequence[TaskExample],
                   evaluator: Callable[[Sequence[TaskExample]], EvalReport]) -> Dict[str, EvalReport]:
    """Run an evaluator separately on each action label."""
    groups: Dict[str, List[TaskExample]] = {}
    for example in examples:
        groups.setdefault(example.label or UNLABELED, []).append(example)
    return {label: evaluator(items) for label, items in sorted(groups.items())}