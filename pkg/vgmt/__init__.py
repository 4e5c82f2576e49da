"""
MOTIONTOK Tokenizer Module
Vision-guided motion tokenizer: dual-stream encoders, visual-skeleton
attention, hybrid codebook, decoder and VQ training.
"""

from .codebook import HybridCodebook, QuantizeResult, quantize, bucket_usage, counts_perplexity
from .tokens import TokenGrid
from .vsa import VisualSkeletonAttention
from .encoders import SkeletonEncoder, VisualEncoder, MotionDecoder
from .visual import VisualStem, render_heatmaps, render_heatmaps_torch, pixels_to_grid
from .model import VisionGuidedTokenizer, VgmtConfig, VgmtOutputs
from .losses import vq_loss, vq_loss_from_outputs, VqLossTerms
from .trainer import (
    train_tokenizer,
    run_tokenizer_ablation,
    evaluate_reconstruction,
    write_train_log,
    TokenizerTrainConfig,
    TokenizerTrainResult,
    TrainLogEntry,
    AblationReport,
)

__all__ = [
    'HybridCodebook',
    'QuantizeResult',
    'quantize',
    'bucket_usage',
    'counts_perplexity',
    'TokenGrid',
    'VisualSkeletonAttention',
    'SkeletonEncoder',
    'VisualEncoder',
    'MotionDecoder',
    'VisualStem',
    'render_heatmaps',
    'render_heatmaps_torch',
    'pixels_to_grid',
    'VisionGuidedTokenizer',
    'VgmtConfig',
    'VgmtOutputs',
    'vq_loss',
    'vq_loss_from_outputs',
    'VqLossTerms',
    'train_tokenizer',
    'run_tokenizer_ablation',
    'evaluate_reconstruction',
    'write_train_log',
    'TokenizerTrainConfig',
    'TokenizerTrainResult',
    'TrainLogEntry',
    'AblationReport',
]
