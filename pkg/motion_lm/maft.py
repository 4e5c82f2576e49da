"""
MOTIONTOK Motion-Aware Fusion
Visual prefix for the language model: feature maps pooled into a patch grid
per window (grid tokens), a deformable sampler around the 2D joint
projections (pose tokens), and one cross-attention + feed-forward block in
which grid tokens query pose tokens.
"""

import math
import logging
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

import config
from errors import ShapeError
from numerics.ops import bilinear_sample_torch, uniform_fan_in_, zero_, count_parameters
from vgmt.visual import VisualStem
from vgmt.vsa import VisualSkeletonAttention

logger = logging.getLogger(__name__)


class MaftBlock(nn.Module):
    """
    Pre-norm cross-attention (grid queries, pose keys/values) and feed-forward,
    both residual. The attention output projection and the last feed-forward
    layer start at zero, so a fresh block returns its grid tokens unchanged.
    """

    def __init__(self, dim: int = config.MAFT_DIM, heads: int = config.MAFT_HEADS,
                 ffn_dim: int = config.MAFT_FFN_DIM):
        super().__init__()
        if dim % heads:
            raise ShapeError(f"Fusion dim {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(dim)
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.norm_ffn = nn.LayerNorm(dim)
        self.ffn_in = nn.Linear(dim, ffn_dim)
        self.ffn_out = nn.Linear(ffn_dim, dim)
        uniform_fan_in_(self)
        zero_(self.out_proj)
        zero_(self.ffn_out)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, m, _ = x.shape
        return x.view(b, m, self.heads, self.dim // self.heads).transpose(1, 2)

    def attention(self, grid: torch.Tensor, pose: torch.Tensor) -> torch.Tensor:
        q = self._split(self.q_proj(self.norm_q(grid)))
        kv = self.norm_kv(pose)
        k = self._split(self.k_proj(kv))
        v = self._split(self.v_proj(kv))
        att = (q @ k.transpose(-2, -1)) / math.sqrt(q.shape[-1])
        out = torch.softmax(att, dim=-1) @ v
        b, _, m, _ = out.shape
        return self.out_proj(out.transpose(1, 2).reshape(b, m, self.dim))

    def forward(self, grid: torch.Tensor, pose: torch.Tensor) -> torch.Tensor:
        """
        Args:
            grid: B x M x D grid tokens (queries)
            pose: B x J x D pose tokens (keys / values)
        """
        if grid.dim() != 3 or pose.dim() != 3:
            raise ShapeError("Fusion expects B x M x D token sets")
        if grid.shape[-1] != self.dim or pose.shape[-1] != self.dim:
            raise ShapeError(
                f"Token dims {grid.shape[-1]} / {pose.shape[-1]} do not match fusion dim {self.dim}"
            )
        if grid.shape[0] != pose.shape[0]:
            raise ShapeError("Grid and pose token batches differ")
        x = grid + self.attention(grid, pose)
        return x + self.ffn_out(F.gelu(self.ffn_in(self.norm_ffn(x))))


def maft_fuse(grid_tokens: torch.Tensor, pose_tokens: torch.Tensor, block: MaftBlock) -> torch.Tensor:
    """Fused grid tokens, same shape as grid_tokens."""
    return block(grid_tokens, pose_tokens)


def maft_parameter_count(dim: int = config.FULL_SCALE_MAFT_DIM,
                         ffn_dim: int = config.FULL_SCALE_MAFT_FFN_DIM) -> int:
    """Parameters of one MaftBlock (head count does not change it)."""
    attention = 4 * (dim * dim + dim)
    norms = 3 * 2 * dim
    ffn = dim * ffn_dim + ffn_dim + ffn_dim * dim + dim
    return attention + norms + ffn


def maft_parameter_fraction(total_params: int = config.FULL_SCALE_TOTAL_PARAMS,
                            dim: int = config.FULL_SCALE_MAFT_DIM,
                            ffn_dim: int = config.FULL_SCALE_MAFT_FFN_DIM) -> float:
    return maft_parameter_count(dim, ffn_dim) / total_params


class PatchPooler(nn.Module):
    """Frame-averaged maps per window, pooled to P x P patches and embedded."""

    def __init__(self, channels: int, dim: int, patches: int, downsample: int):
        super().__init__()
        self.patches = patches
        self.downsample = downsample
        self.proj = nn.Linear(channels, dim)
        self.patch_embedding = nn.Parameter(torch.zeros(patches * patches, dim))

    def forward(self, maps: torch.Tensor) -> torch.Tensor:
        """B x F x H x W x C -> B x (W_win * P^2) x D"""
        b, f, h, w, c = maps.shape
        windows = f // self.downsample
        x = maps.reshape(b, windows, self.downsample, h, w, c).mean(dim=2)
        x = x.reshape(b * windows, h, w, c).permute(0, 3, 1, 2)
        x = F.adaptive_avg_pool2d(x, self.patches)                 # BW x C x P x P
        x = x.flatten(2).transpose(1, 2)                            # BW x P^2 x C
        x = self.proj(x) + self.patch_embedding
        return x.reshape(b, windows * self.patches ** 2, -1)


class PoseSampler(nn.Module):
    """Deformable sampling of the feature maps around each joint's 2D projection."""

    def __init__(self, channels: int, dim: int, num_joints: int, downsample: int,
                 heads: int = config.VSA_HEADS, points: int = config.VSA_POINTS):
        super().__init__()
        self.downsample = downsample
        self.stem = VisualStem(channels, dim)
        uniform_fan_in_(self.stem)
        self.joint_embedding = nn.Parameter(torch.zeros(num_joints, dim))
        self.vsa = VisualSkeletonAttention(dim, heads, points)

    def forward(self, maps: torch.Tensor, ref: torch.Tensor) -> torch.Tensor:
        """
        Args:
            maps: B x F x H x W x C
            ref: B x F x N x 2 grid coordinates

        Returns:
            B x (W_win * N) x D pose tokens
        """
        b, f, n, _ = ref.shape
        feats = self.stem(maps)
        grids = feats.reshape(b * f, *feats.shape[2:])
        points = ref.reshape(b * f, n, 2)
        query = bilinear_sample_torch(grids, points) + self.joint_embedding
        tokens = self.vsa(query, grids, points)                     # BF x N x D
        windows = f // self.downsample
        tokens = tokens.reshape(b, windows, self.downsample, n, -1).mean(dim=2)
        return tokens.reshape(b, windows * n, -1)


class VisualPrefix(nn.Module):
    """Visual conditioning tokens in the language model's width."""

    def __init__(self, lm_dim: int, channels: int = config.NUM_JOINTS + 1,
                 num_joints: int = config.NUM_JOINTS,
                 dim: int = config.MAFT_DIM, heads: int = config.MAFT_HEADS,
                 ffn_dim: int = config.MAFT_FFN_DIM, patches: int = config.MAFT_PATCHES,
                 downsample: int = config.DOWNSAMPLE_FACTOR, use_maft: bool = True):
        super().__init__()
        self.channels = channels
        self.num_joints = num_joints
        self.downsample = downsample
        self.patches = patches
        self.use_maft = use_maft
        self.pooler = PatchPooler(channels, dim, patches, downsample)
        uniform_fan_in_(self.pooler)
        self.sampler = PoseSampler(channels, dim, num_joints, downsample)
        self.fusion = MaftBlock(dim, heads, ffn_dim)
        self.projector = nn.Linear(dim, lm_dim)
        uniform_fan_in_(self.projector)

    def num_tokens(self, frames: int) -> int:
        return (frames // self.downsample) * self.patches ** 2

    def tokens(self, maps: torch.Tensor, ref: torch.Tensor) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """(grid tokens, pose tokens) before fusion; pose tokens are None without MAFT."""
        if maps.dim() != 5 or maps.shape[-1] != self.channels:
            raise ShapeError(f"Expected B x F x H x W x {self.channels} maps, got {tuple(maps.shape)}")
        if ref.shape[:2] != maps.shape[:2] or ref.shape[2] != self.num_joints:
            raise ShapeError(f"Reference points {tuple(ref.shape)} do not match maps {tuple(maps.shape)}")
        if maps.shape[1] % self.downsample:
            raise ShapeError(f"{maps.shape[1]} frames are not divisible by {self.downsample}")
        grid = self.pooler(maps)
        pose = self.sampler(maps, ref) if self.use_maft else None
        return grid, pose

    def forward(self, maps: torch.Tensor, ref: torch.Tensor) -> torch.Tensor:
        """B x F x H x W x C maps and B x F x N x 2 points -> B x (W_win * P^2) x lm_dim"""
        grid, pose = self.tokens(maps, ref)
        if pose is not None:
            grid = maft_fuse(grid, pose, self.fusion)
        return self.projector(grid)

    def fusion_parameters(self) -> int:
        return count_parameters(self.fusion)
