"""
MOTIONTOK Visual-Skeleton Attention
Deformable sampling around a joint's 2D reference point: each head predicts
point offsets and softmax aggregation weights from the query, samples the
feature grid bilinearly and the heads are concatenated and projected.
"""

from typing import Tuple

import torch
import torch.nn as nn

import config
from errors import ShapeError
from numerics.ops import bilinear_sample_torch, uniform_fan_in_, zero_


class VisualSkeletonAttention(nn.Module):
    """
    Single-scale deformable attention.

    The offset predictor starts at zero and the output projection starts as
    the mean over heads, so at initialisation the output is the bilinear
    sample at the reference point.
    """

    def __init__(self, dim: int = config.CODE_HALF_DIM, heads: int = config.VSA_HEADS,
                 points: int = config.VSA_POINTS):
        super().__init__()
        self.dim = dim
        self.heads = heads
        self.points = points
        self.offset_predictor = nn.Linear(dim, heads * points * 2)
        self.weight_predictor = nn.Linear(dim, heads * points)
        self.output_proj = nn.Linear(heads * dim, dim)
        uniform_fan_in_(self)
        zero_(self.offset_predictor)
        with torch.no_grad():
            self.output_proj.weight.copy_(torch.eye(dim).repeat(1, heads) / heads)
            self.output_proj.bias.zero_()

    def sampling(self, query: torch.Tensor, ref: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Sampling locations B x M x H x P x 2 and weights B x M x H x P."""
        b, m, _ = query.shape
        offsets = self.offset_predictor(query).view(b, m, self.heads, self.points, 2)
        logits = self.weight_predictor(query).view(b, m, self.heads, self.points)
        weights = torch.softmax(logits, dim=-1)
        locations = ref[:, :, None, None, :] + offsets
        return locations, weights

    def forward(self, query: torch.Tensor, maps: torch.Tensor, ref: torch.Tensor) -> torch.Tensor:
        """
        Args:
            query: B x M x D queries
            maps: B x H' x W' x D feature grids (one per batch row)
            ref: B x M x 2 reference points in grid coordinates (x, y)

        Returns:
            B x M x D attended features
        """
        if query.dim() != 3 or query.shape[-1] != self.dim:
            raise ShapeError(f"Query must be B x M x {self.dim}, got {tuple(query.shape)}")
        if maps.shape[-1] != self.dim:
            raise ShapeError(f"Feature grid has {maps.shape[-1]} channels, expected {self.dim}")
        if ref.shape[:2] != query.shape[:2]:
            raise ShapeError("Reference points do not match queries")

        b, m, _ = query.shape
        locations, weights = self.sampling(query, ref)
        samples = bilinear_sample_torch(maps, locations)           # B x M x H x P x D
        heads = (weights.unsqueeze(-1) * samples).sum(dim=3)       # B x M x H x D
        return self.output_proj(heads.reshape(b, m, self.heads * self.dim))
