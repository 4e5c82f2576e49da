"""
MOTIONTOK Motion Language Model Module
Vocabulary, serialization, prompts, visual fusion, the transformer,
constrained generation and unified multi-task training.
"""

from .vocabulary import MotionVocabulary, split_text, render_text, load_template, skel_token, skel_index
from .serialization import serialize, parse, ParseResult, tokens_per_window, FALLBACK_INDEX
from .prompts import PromptedSample, VisualContext, build_prompt, prompt_tokens, response_tokens
from .maft import MaftBlock, VisualPrefix, maft_fuse, maft_parameter_count, maft_parameter_fraction
from .transformer import MotionLM, LmConfig, uniform_log_loss
from .grammar import ResponseGrammar
from .generation import (
    DecodeConfig,
    GenerationResult,
    generate,
    generate_response,
    parse_response,
    transcript_record,
    write_transcripts,
)
from .trainer import (
    Batch,
    collate,
    ar_loss,
    evaluate_loss,
    train_unified,
    UnifiedTrainConfig,
    UnifiedTrainResult,
    LmLogEntry,
)
from .data import TaskDataConfig, TaskExample, build_task_examples, samples_of, visual_context

__all__ = [
    'MotionVocabulary',
    'split_text',
    'render_text',
    'load_template',
    'skel_token',
    'skel_index',
    'serialize',
    'parse',
    'ParseResult',
    'tokens_per_window',
    'FALLBACK_INDEX',
    'PromptedSample',
    'VisualContext',
    'build_prompt',
    'prompt_tokens',
    'response_tokens',
    'MaftBlock',
    'VisualPrefix',
    'maft_fuse',
    'maft_parameter_count',
    'maft_parameter_fraction',
    'MotionLM',
    'LmConfig',
    'uniform_log_loss',
    'ResponseGrammar',
    'DecodeConfig',
    'GenerationResult',
    'generate',
    'generate_response',
    'parse_response',
    'transcript_record',
    'write_transcripts',
    'Batch',
    'collate',
    'ar_loss',
    'evaluate_loss',
    'train_unified',
    'UnifiedTrainConfig',
    'UnifiedTrainResult',
    'LmLogEntry',
    'TaskDataConfig',
    'TaskExample',
    'build_task_examples',
    'samples_of',
    'visual_context',
]
