"""
MOTIONTOK Motion Language Model
Small decoder-only transformer over the motion vocabulary. Visual
conditioning enters as prefix positions placed before the text.
"""

import math
import logging
from typing import Dict, Any, Optional, Sequence, Tuple
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn

import config
from errors import ConfigError, ShapeError, ContextOverflowError, CheckpointError, NumericError
from numerics.ops import uniform_fan_in_, count_parameters
from .maft import VisualPrefix
from .prompts import VisualContext

logger = logging.getLogger(__name__)


@dataclass
class LmConfig:
    """Language model and visual-prefix architecture."""

    vocab_size: int
    layers: int = config.LM_LAYERS
    heads: int = config.LM_HEADS
    dim: int = config.LM_DIM
    context_length: int = config.LM_CONTEXT_LENGTH
    dropout: float = config.LM_DROPOUT
    visual_dim: int = config.MAFT_DIM
    maft_heads: int = config.MAFT_HEADS
    maft_ffn_dim: int = config.MAFT_FFN_DIM
    maft_patches: int = config.MAFT_PATCHES
    use_maft: bool = True
    num_joints: int = config.NUM_JOINTS
    downsample: int = config.DOWNSAMPLE_FACTOR

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ConfigError(f"vocab_size must be positive, got {self.vocab_size}")
        if self.layers < 1 or self.heads < 1:
            raise ConfigError("The model needs at least one layer and one head")
        if self.dim % self.heads:
            raise ConfigError(f"dim {self.dim} is not divisible by {self.heads} heads")
        if self.visual_dim % self.maft_heads:
            raise ConfigError(f"visual_dim {self.visual_dim} is not divisible by {self.maft_heads} heads")
        if self.context_length < 2:
            raise ConfigError(f"context_length must be at least 2, got {self.context_length}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LmConfig':
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


class CausalSelfAttention(nn.Module):

    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.heads = heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """x: B x L x D, mask: B x 1 x L x L (True = may attend)."""
        b, length, d = x.shape
        q, k, v = self.qkv(x).split(d, dim=-1)
        q, k, v = (t.view(b, length, self.heads, d // self.heads).transpose(1, 2) for t in (q, k, v))
        att = (q @ k.transpose(-2, -1)) / math.sqrt(q.shape[-1])
        att = att.masked_fill(~mask, float('-inf'))
        att = self.drop(torch.softmax(att, dim=-1))
        out = (att @ v).transpose(1, 2).reshape(b, length, d)
        return self.proj(out)


class Block(nn.Module):
    """Pre-norm attention and MLP, both residual."""

    def __init__(self, dim: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = CausalSelfAttention(dim, heads, dropout)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, 4 * dim),
            nn.GELU(),
            nn.Linear(4 * dim, dim),
            nn.Dropout(dropout),
        )

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x), mask)
        return x + self.mlp(self.ln2(x))


class MotionLM(nn.Module):
    """
    GPT-style model with learned positions.

    Prefix tokens of a batch are left-padded to a common length; padded
    slots are masked out as keys and every row's positions restart at 0 on
    its first real prefix token, so a row's logits do not depend on the
    other rows of the batch.
    """

    def __init__(self, cfg: LmConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.dim)
        self.pos_emb = nn.Embedding(cfg.context_length, cfg.dim)
        self.drop = nn.Dropout(cfg.dropout)
        self.blocks = nn.ModuleList([Block(cfg.dim, cfg.heads, cfg.dropout) for _ in range(cfg.layers)])
        self.ln_f = nn.LayerNorm(cfg.dim)
        self.head = nn.Linear(cfg.dim, cfg.vocab_size, bias=False)
        uniform_fan_in_(self.blocks)
        uniform_fan_in_(self.head)
        nn.init.normal_(self.tok_emb.weight, std=0.02)
        nn.init.normal_(self.pos_emb.weight, std=0.02)

        self.visual = VisualPrefix(
            cfg.dim,
            channels=cfg.num_joints + 1,
            num_joints=cfg.num_joints,
            dim=cfg.visual_dim,
            heads=cfg.maft_heads,
            ffn_dim=cfg.maft_ffn_dim,
            patches=cfg.maft_patches,
            downsample=cfg.downsample,
            use_maft=cfg.use_maft,
        )
        logger.debug(f"MotionLM with {count_parameters(self)} parameters")

    @property
    def device(self) -> torch.device:
        return self.tok_emb.weight.device

    @property
    def dtype(self) -> torch.dtype:
        return self.tok_emb.weight.dtype

    # ------------------------------------------------------------------
    # Visual prefix
    # ------------------------------------------------------------------

    def prefix_length(self, visual: Optional[VisualContext]) -> int:
        return 0 if visual is None else self.visual.num_tokens(visual.num_frames)

    def embed_visual(self, visual: VisualContext) -> torch.Tensor:
        """1 x P x D prefix of one visual context."""
        maps = visual.maps.to_tensor().to(self.device, self.dtype)[None]
        ref = torch.from_numpy(visual.ref_points).to(self.device, self.dtype)[None]
        return self.visual(maps, ref)

    def embed_prefixes(self, visuals: Sequence[Optional[VisualContext]]
                       ) -> Tuple[Optional[torch.Tensor], Optional[torch.Tensor]]:
        """Left-padded B x P_max x D prefixes and their lengths, (None, None) if no row has one."""
        if all(v is None for v in visuals):
            return None, None
        parts = [None if v is None else self.embed_visual(v)[0] for v in visuals]
        lengths = [0 if p is None else p.shape[0] for p in parts]
        p_max = max(lengths)
        prefix = torch.zeros(len(parts), p_max, self.cfg.dim, dtype=self.dtype, device=self.device)
        for i, part in enumerate(parts):
            if part is not None:
                prefix[i, p_max - part.shape[0]:] = part
        return prefix, torch.tensor(lengths, dtype=torch.long, device=self.device)

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------

    def forward(self, input_ids: torch.Tensor, prefix: Optional[torch.Tensor] = None,
                prefix_lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Args:
            input_ids: B x T token ids
            prefix: B x P x D left-padded prefix embeddings
            prefix_lengths: B real prefix lengths (defaults to P for every row)

        Returns:
            B x T x V logits for the text positions
        """
        if input_ids.dim() != 2:
            raise ShapeError(f"input_ids must be B x T, got {tuple(input_ids.shape)}")
        b, t = input_ids.shape
        if input_ids.numel() and (int(input_ids.min()) < 0 or int(input_ids.max()) >= self.cfg.vocab_size):
            raise ShapeError(f"Token ids outside vocabulary of {self.cfg.vocab_size}")
        device = input_ids.device

        if prefix is None:
            p = 0
            lengths = torch.zeros(b, dtype=torch.long, device=device)
            x = self.tok_emb(input_ids)
        else:
            if prefix.shape[0] != b or prefix.shape[-1] != self.cfg.dim:
                raise ShapeError(f"Prefix {tuple(prefix.shape)} does not match batch {b} x {self.cfg.dim}")
            p = prefix.shape[1]
            lengths = (torch.full((b,), p, dtype=torch.long, device=device)
                       if prefix_lengths is None else prefix_lengths.to(device))
            x = torch.cat([prefix.to(self.dtype), self.tok_emb(input_ids)], dim=1)

        longest = int((lengths + t).max()) if b else 0
        if longest > self.cfg.context_length:
            raise ContextOverflowError(
                f"Sequence of {longest} positions exceeds context length {self.cfg.context_length}"
            )

        slots = torch.arange(p, device=device)
        prefix_pos = slots[None, :] - (p - lengths[:, None])                    # B x P
        text_pos = lengths[:, None] + torch.arange(t, device=device)[None, :]   # B x T
        positions = torch.cat([prefix_pos.clamp(min=0), text_pos], dim=1)
        valid = torch.cat([prefix_pos >= 0, torch.ones(b, t, dtype=torch.bool, device=device)], dim=1)

        total = p + t
        causal = torch.tril(torch.ones(total, total, dtype=torch.bool, device=device))
        eye = torch.eye(total, dtype=torch.bool, device=device)
        mask = (causal[None] & valid[:, None, :]) | eye[None]

        x = self.drop(x + self.pos_emb(positions))
        for block in self.blocks:
            x = block(x, mask[:, None])
        x = self.ln_f(x)
        return self.head(x[:, p:])

    def check_finite(self) -> None:
        for name, param in self.named_parameters():
            if not torch.isfinite(param).all():
                raise NumericError(f"Language model parameter {name} is not finite")

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def metadata(self, vocab: Dict[str, Any], config_hash: str = "",
                 tokenizer: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        return {
            'kind': 'motion_lm',
            'model': self.cfg.to_dict(),
            'vocab': vocab,
            'tokenizer': tokenizer or {},
            'config_hash': config_hash,
        }

    @classmethod
    def from_checkpoint(cls, state: Dict[str, torch.Tensor], metadata: Dict[str, Any]) -> 'MotionLM':
        if metadata.get('kind') != 'motion_lm':
            raise CheckpointError(f"Checkpoint holds a {metadata.get('kind')!r} model, not a language model")
        model = cls(LmConfig.from_dict(metadata.get('model', {})))
        try:
            model.load_state_dict(state)
        except RuntimeError as e:
            raise CheckpointError(f"Checkpoint does not match the language model: {e}")
        model.eval()
        return model


def uniform_log_loss(vocab_size: int) -> float:
    """Cross-entropy of a uniform prediction over the vocabulary."""
    return float(np.log(vocab_size))
