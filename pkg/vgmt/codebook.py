"""
MOTIONTOK Hybrid Codebook
Paired visual/skeletal prototypes selected by the summed squared distance
of both halves.
"""

import json
import base64
import logging
from typing import Dict, Any, Optional, Tuple, Union
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

import config
from errors import CodebookError, TokenIndexError, ShapeError, FormatError

logger = logging.getLogger(__name__)

# Rows per distance block when scanning the codebook
QUANTIZE_CHUNK = 4096

ArrayLike = Union[np.ndarray, torch.Tensor]


@dataclass
class QuantizeResult:
    """Selected codes and their prototypes for a batch of cells."""

    indices: torch.Tensor      # ... integer codes
    c_v: torch.Tensor          # ... x D_half visual prototypes
    c_s: torch.Tensor          # ... x D_half skeletal prototypes
    distance: torch.Tensor     # ... summed squared distance to the selection


class HybridCodebook(nn.Module):
    """
    K paired prototypes (c_v_k, c_s_k).

    Entries are trained by gradient descent through the commitment terms of
    the VQ objective; there is no EMA update and no dead-code reseeding.
    """

    def __init__(self, num_codes: int = config.CODEBOOK_SIZE,
                 half_dim: int = config.CODE_HALF_DIM):
        super().__init__()
        if num_codes < 1 or half_dim < 1:
            raise CodebookError(f"Invalid codebook size K={num_codes}, D_half={half_dim}")
        self.num_codes = num_codes
        self.half_dim = half_dim
        bound = 1.0 / half_dim ** 0.5
        self.visual = nn.Parameter(torch.empty(num_codes, half_dim).uniform_(-bound, bound))
        self.skeletal = nn.Parameter(torch.empty(num_codes, half_dim).uniform_(-bound, bound))
        self.register_buffer('initialized', torch.zeros((), dtype=torch.uint8))

    # ------------------------------------------------------------------
    # Quantization
    # ------------------------------------------------------------------

    def distances(self, z_v: Optional[torch.Tensor], z_s: Optional[torch.Tensor]) -> torch.Tensor:
        """M x K summed squared distances; a missing half does not contribute."""
        total = None
        for z, protos in ((z_v, self.visual), (z_s, self.skeletal)):
            if z is None:
                continue
            # direct differences keep exact ties between duplicate codes
            part = ((z[:, None, :] - protos[None, :, :].to(z.dtype)) ** 2).sum(dim=-1)
            total = part if total is None else total + part
        if total is None:
            raise ShapeError("Quantization needs at least one stream")
        return total

    @torch.no_grad()
    def quantize(self, z_v: Optional[torch.Tensor], z_s: Optional[torch.Tensor]) -> QuantizeResult:
        """
        Nearest pair under ||z_v - c_v||^2 + ||z_s - c_s||^2.

        Either input may be None (single-stream modes). Ties go to the lowest
        index. Inputs have shape ... x D_half.
        """
        ref = z_s if z_s is not None else z_v
        if ref is None:
            raise ShapeError("Quantization needs at least one stream")
        for z in (z_v, z_s):
            if z is not None and z.shape[-1] != self.half_dim:
                raise ShapeError(f"Feature dim {z.shape[-1]} does not match codebook {self.half_dim}")
        if z_v is not None and z_s is not None and z_v.shape != z_s.shape:
            raise ShapeError(f"Stream shapes differ: {tuple(z_v.shape)} vs {tuple(z_s.shape)}")

        lead = ref.shape[:-1]
        flat_v = None if z_v is None else z_v.reshape(-1, self.half_dim)
        flat_s = None if z_s is None else z_s.reshape(-1, self.half_dim)
        rows = ref.reshape(-1, self.half_dim).shape[0]

        indices, best = [], []
        for start in range(0, rows, QUANTIZE_CHUNK):
            stop = start + QUANTIZE_CHUNK
            d = self.distances(
                None if flat_v is None else flat_v[start:stop],
                None if flat_s is None else flat_s[start:stop],
            )
            # argmin returns the first minimum
            idx = torch.argmin(d, dim=-1)
            indices.append(idx)
            best.append(d.gather(1, idx[:, None]).squeeze(1))

        idx = torch.cat(indices) if indices else torch.zeros(0, dtype=torch.long)
        dist = torch.cat(best) if best else torch.zeros(0)
        c_v, c_s = self.lookup(idx)
        return QuantizeResult(
            indices=idx.reshape(lead),
            c_v=c_v.reshape(*lead, self.half_dim),
            c_s=c_s.reshape(*lead, self.half_dim),
            distance=dist.reshape(lead),
        )

    def lookup(self, indices: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Prototype pairs for integer codes (differentiable w.r.t. the codebook)."""
        indices = torch.as_tensor(indices, dtype=torch.long)
        if indices.numel() and (int(indices.min()) < 0 or int(indices.max()) >= self.num_codes):
            raise TokenIndexError(
                f"Code indices must lie in [0, {self.num_codes}), got "
                f"[{int(indices.min())}, {int(indices.max())}]"
            )
        return self.visual[indices], self.skeletal[indices]

    # ------------------------------------------------------------------
    # Initialisation and statistics
    # ------------------------------------------------------------------

    @staticmethod
    def _tile(x: torch.Tensor, count: int, generator: torch.Generator) -> torch.Tensor:
        """Repeat rows with small noise until at least `count` are available."""
        rows, dim = x.shape
        if rows >= count:
            return x
        reps = (count + rows - 1) // rows
        std = 0.01 / dim ** 0.5
        out = x.repeat(reps, 1)
        return out + torch.randn(out.shape, generator=generator, dtype=out.dtype) * std

    @torch.no_grad()
    def init_from_data(self, z_v: Optional[torch.Tensor], z_s: Optional[torch.Tensor],
                       seed: int = 0) -> None:
        """
        One-time initialisation from encoder outputs (M x D_half each).
        A missing stream keeps its current half.
        """
        generator = torch.Generator().manual_seed(seed)
        halves = [(z, p) for z, p in ((z_v, self.visual), (z_s, self.skeletal)) if z is not None]
        if not halves:
            raise ShapeError("Codebook initialisation needs at least one stream")
        pairs = torch.cat([z.reshape(-1, self.half_dim).float() for z, _ in halves], dim=1)
        cells = pairs.shape[0]
        pairs = self._tile(pairs, self.num_codes, generator)
        pick = torch.randperm(pairs.shape[0], generator=generator)[:self.num_codes]
        chosen = pairs[pick]
        for i, (_, protos) in enumerate(halves):
            protos.copy_(chosen[:, i * self.half_dim:(i + 1) * self.half_dim])
        self.initialized.fill_(1)
        logger.debug(f"Codebook initialised from {cells} cells")

    @property
    def is_initialized(self) -> bool:
        return bool(self.initialized.item())

    @staticmethod
    def perplexity(indices: torch.Tensor, num_codes: int) -> float:
        counts = torch.bincount(indices.reshape(-1).cpu(), minlength=num_codes).numpy()
        return counts_perplexity(counts)

    def check_finite(self) -> None:
        if not (torch.isfinite(self.visual).all() and torch.isfinite(self.skeletal).all()):
            raise CodebookError("Codebook contains non-finite entries")

    def concatenated(self) -> np.ndarray:
        """K x 2*D_half array of (c_v || c_s)."""
        return torch.cat([self.visual, self.skeletal], dim=1).detach().cpu().numpy().astype(np.float64)

    # ------------------------------------------------------------------
    # Export
    # ------------------------------------------------------------------

    def to_dict(self, config_hash: str = "") -> Dict[str, Any]:
        def encode(t: torch.Tensor) -> str:
            return base64.b64encode(t.detach().cpu().numpy().astype('<f4').tobytes()).decode('ascii')

        return {
            'K': self.num_codes,
            'D_half': self.half_dim,
            'dtype': 'float32',
            'encoding': 'base64',
            'visual': encode(self.visual),
            'skeletal': encode(self.skeletal),
            'config_hash': config_hash,
        }

    def to_json(self, config_hash: str = "") -> str:
        return json.dumps(self.to_dict(config_hash), indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HybridCodebook':
        try:
            k, d = int(data['K']), int(data['D_half'])
            cb = cls(k, d)
            with torch.no_grad():
                for name in ('visual', 'skeletal'):
                    raw = base64.b64decode(data[name])
                    array = np.frombuffer(raw, dtype='<f4').reshape(k, d)
                    getattr(cb, name).copy_(torch.from_numpy(array.copy()))
        except (KeyError, ValueError, TypeError) as e:
            raise FormatError(f"Malformed codebook export: {e}")
        cb.initialized.fill_(1)
        return cb


def quantize(z_v: ArrayLike, z_s: ArrayLike, cb: HybridCodebook) -> Tuple[int, np.ndarray, np.ndarray]:
    """
    Quantize one (z_v, z_s) pair.

    Returns:
        (index, c_v_hat, c_s_hat)
    """
    tv = torch.as_tensor(np.asarray(z_v), dtype=cb.visual.dtype).reshape(1, -1)
    ts = torch.as_tensor(np.asarray(z_s), dtype=cb.skeletal.dtype).reshape(1, -1)
    result = cb.quantize(tv, ts)
    return (int(result.indices[0]),
            result.c_v[0].detach().cpu().numpy(),
            result.c_s[0].detach().cpu().numpy())


USAGE_BUCKETS = ("frequent", "active", "underused", "unused")


def bucket_usage(counts: np.ndarray) -> Dict[str, int]:
    """
    Bucket per-code counts by usage rate: frequent (> 1%), active
    (0.01% .. 1%), underused (below 0.01%) and unused (never emitted).
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = counts.sum()
    rate = counts / total if total > 0 else np.zeros(len(counts))
    used = counts > 0
    frequent = rate > config.USAGE_FREQUENT
    active = used & ~frequent & (rate >= config.USAGE_ACTIVE)
    underused = used & (rate < config.USAGE_ACTIVE)
    return {
        'frequent': int(frequent.sum()),
        'active': int(active.sum()),
        'underused': int(underused.sum()),
        'unused': int((~used).sum()),
    }


def counts_perplexity(counts: np.ndarray) -> float:
    """exp(entropy) of the empirical code distribution."""
    counts = np.asarray(counts, dtype=np.float64)
    prob = counts / max(counts.sum(), 1.0)
    return float(np.exp(-np.sum(prob * np.log(prob + 1e-7))))
