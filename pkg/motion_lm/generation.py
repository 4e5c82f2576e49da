"""
MOTIONTOK Generation
Autoregressive decoding with optional grammar-constrained logits, response
parsing and JSON Lines transcripts.
"""

import json
import logging
from typing import List, Dict, Any, Optional, Sequence
from dataclasses import dataclass

import torch

from errors import ContextOverflowError, ConfigError, SerializationError
from core.skeleton import JointLayout, H36M_LAYOUT
from .vocabulary import MotionVocabulary, load_template, split_text, render_text
from .serialization import parse, ParseResult
from .grammar import ResponseGrammar
from .prompts import PromptedSample, VisualContext
from .transformer import MotionLM

logger = logging.getLogger(__name__)


@dataclass
class DecodeConfig:
    """Decoding options. temperature 0 means greedy."""

    max_new_tokens: Optional[int] = None
    temperature: float = 0.0
    top_k: Optional[int] = None
    constrained: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError(f"temperature must be non-negative, got {self.temperature}")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError(f"top_k must be positive, got {self.top_k}")


@dataclass
class GenerationResult:
    token_ids: List[int]        # response ids without the closing <eos>
    tokens: List[str]
    stop_reason: str            # eos | max_tokens | context
    parsed: Optional[ParseResult] = None

    @property
    def text(self) -> str:
        return render_text(self.tokens)


def select_token(logits: torch.Tensor, cfg: DecodeConfig, generator: torch.Generator) -> int:
    """Greedy argmax (first maximum) or temperature / top-k sampling."""
    if cfg.temperature == 0:
        return int(torch.argmax(logits))
    scaled = logits.double() / cfg.temperature
    if cfg.top_k is not None and cfg.top_k < scaled.numel():
        kth = torch.topk(scaled, cfg.top_k).values[-1]
        scaled = scaled.masked_fill(scaled < kth, float('-inf'))
    probs = torch.softmax(scaled, dim=-1)
    return int(torch.multinomial(probs, 1, generator=generator))


@torch.no_grad()
def generate(model: MotionLM, vocab: MotionVocabulary, prompt_ids: Sequence[int],
             decode_cfg: Optional[DecodeConfig] = None,
             visual: Optional[VisualContext] = None,
             grammar: Optional[ResponseGrammar] = None) -> GenerationResult:
    """
    Continue prompt_ids until <eos>, the token budget or the context limit.

    With a grammar, logits of illegal tokens are masked before selection and
    positions with a single legal token are filled without calling the model.

    Raises:
        ContextOverflowError: the prompt (or the constrained response) does
            not fit in the context window
    """
    cfg = decode_cfg or DecodeConfig()
    model.eval()
    prefix, lengths = model.embed_prefixes([visual])
    p = 0 if prefix is None else prefix.shape[1]
    context = model.cfg.context_length
    ids = [int(i) for i in prompt_ids]

    if p + len(ids) > context:
        raise ContextOverflowError(f"Prompt of {p + len(ids)} positions exceeds context length {context}")
    if grammar is not None and p + len(ids) + len(grammar) - 1 > context:
        raise ContextOverflowError(
            f"Constrained response of {len(grammar)} tokens does not fit after a "
            f"{p + len(ids)}-position prompt (context {context})"
        )

    generator = torch.Generator().manual_seed(cfg.seed)
    state = grammar.init_state() if grammar is not None else 0
    out: List[int] = []
    stop = "eos"
    while True:
        if cfg.max_new_tokens is not None and len(out) >= cfg.max_new_tokens:
            stop = "max_tokens"
            break
        if p + len(ids) > context:
            stop = "context"
            break

        fixed = grammar.fixed_token(state) if grammar is not None else None
        if fixed is not None:
            tok = fixed
        else:
            x = torch.tensor([ids], dtype=torch.long, device=model.device)
            logits = model(x, prefix, lengths)[0, -1]
            if grammar is not None:
                logits = grammar.apply(state, logits)
            tok = select_token(logits, cfg, generator)

        if grammar is not None:
            state = grammar.update_state(state, tok)
        if tok == vocab.eos_id:
            break
        out.append(tok)
        ids.append(tok)

    tokens = vocab.decode(out)
    if stop != "eos":
        logger.debug(f"Generation stopped at {stop} after {len(out)} tokens")
    return GenerationResult(token_ids=out, tokens=tokens, stop_reason=stop)


def parse_response(tokens: Sequence[str], vocab: MotionVocabulary, num_windows: int,
                   strict: bool = False, layout: JointLayout = H36M_LAYOUT) -> ParseResult:
    """
    Parse a generated response (preamble followed by the serialization).

    Robust mode skips whatever precedes the first window header and pads or
    trims to num_windows. Strict mode requires the exact preamble and an
    exact serialization.
    """
    if strict:
        preamble = split_text(load_template("response", vocab.template_version)
                              .replace("{frames}", str(num_windows)))
        if list(tokens[:len(preamble)]) != preamble:
            raise SerializationError("Response does not start with the expected preamble")
        result = parse(tokens[len(preamble):], layout, vocab.num_codes, strict=True)
        if result.grid.num_windows != num_windows:
            raise SerializationError(
                f"Response has {result.grid.num_windows} windows, expected {num_windows}"
            )
        return result
    return parse(tokens, layout, vocab.num_codes, strict=False, expected_windows=num_windows)


def generate_response(model: MotionLM, vocab: MotionVocabulary, sample: PromptedSample,
                      decode_cfg: Optional[DecodeConfig] = None, strict: bool = False,
                      layout: JointLayout = H36M_LAYOUT) -> GenerationResult:
    """Generate and parse the response to a sample's prompt."""
    cfg = decode_cfg or DecodeConfig()
    grammar = ResponseGrammar(vocab, sample.num_windows, sample.response_mode, layout) if cfg.constrained else None
    result = generate(model, vocab, sample.prompt_ids, cfg, visual=sample.visual, grammar=grammar)
    result.parsed = parse_response(result.tokens, vocab, sample.num_windows, strict, layout)
    if not result.parsed.clean:
        logger.warning(
            f"{sample.task.value}: malformed generation ({result.parsed.malformed} cells repaired, "
            f"{result.parsed.truncated_windows} truncated windows)"
        )
    return result


# ============================================================================
# TRANSCRIPTS
# ============================================================================

def transcript_record(sample: PromptedSample, vocab: MotionVocabulary,
                      result: GenerationResult, config_hash: str = "") -> Dict[str, Any]:
    return {
        'task': sample.task.value,
        'prompt': render_text(vocab.decode(sample.prompt_ids)),
        'output': result.text,
        'parsed_grid': result.parsed.grid.indices.tolist(),
        'malformed_count': result.parsed.malformed,
        'config_hash': config_hash,
    }


def write_transcripts(path: str, records: Sequence[Dict[str, Any]]) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + '\n')
