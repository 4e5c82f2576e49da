"""
MOTIONTOK Visual Feature Provider
Renders each frame's projected joints as Gaussian blobs on a coarse grid
(one channel per joint plus a depth-weighted channel) and a small trainable
convolutional stem that turns the rendering into feature maps.
"""

from typing import Tuple, Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

import config
from errors import CoordinateSpaceError, ShapeError
from core.skeleton import PoseSequence, CoordinateSpace
from numerics.ops import FeatureMapSequence

# Relative depth is rendered in metres
DEPTH_SCALE_MM = 1000.0


def pixels_to_grid(points: torch.Tensor, image_size: Tuple[int, int] = config.IMAGE_SIZE,
                   grid: int = config.FEATURE_GRID) -> torch.Tensor:
    """Pixel (x, y) to continuous grid coordinates (cell centres at integers)."""
    width, height = image_size
    scale = points.new_tensor([grid / width, grid / height])
    return points * scale - 0.5


def render_heatmaps_torch(grid_xy: torch.Tensor, rel_depth: torch.Tensor,
                          grid: int = config.FEATURE_GRID,
                          sigma: float = config.HEATMAP_SIGMA) -> torch.Tensor:
    """
    Args:
        grid_xy: B x F x N x 2 joint positions in grid coordinates
        rel_depth: B x F x N root-relative depth (mm)

    Returns:
        B x F x G x G x (N + 1) rendering
    """
    axis = torch.arange(grid, dtype=grid_xy.dtype, device=grid_xy.device)
    dx = axis[None, None, None, None, :] - grid_xy[..., 0, None, None]
    dy = axis[None, None, None, :, None] - grid_xy[..., 1, None, None]
    blobs = torch.exp(-(dx ** 2 + dy ** 2) / (2.0 * sigma ** 2))          # B x F x N x G x G
    depth = (blobs * (rel_depth / DEPTH_SCALE_MM)[..., None, None]).sum(dim=2, keepdim=True)
    return torch.cat([blobs, depth], dim=2).permute(0, 1, 3, 4, 2)


def render_heatmaps(seq: PoseSequence, grid: int = config.FEATURE_GRID,
                    sigma: float = config.HEATMAP_SIGMA,
                    image_size: Tuple[int, int] = config.IMAGE_SIZE) -> FeatureMapSequence:
    """Rendered feature maps of a pixel_rootrel sequence."""
    if seq.coordinate_space is not CoordinateSpace.PIXEL_ROOTREL:
        raise CoordinateSpaceError("Rendering expects a pixel_rootrel sequence")
    px = torch.from_numpy(np.array(seq.data))[None]
    maps = render_heatmaps_torch(pixels_to_grid(px[..., :2], image_size, grid), px[..., 2], grid, sigma)
    return FeatureMapSequence(maps[0].numpy())


class VisualStem(nn.Module):
    """Two 3x3 convolutions from the rendered channels to D_half."""

    def __init__(self, in_channels: int = config.NUM_JOINTS + 1,
                 dim: int = config.CODE_HALF_DIM):
        super().__init__()
        self.in_channels = in_channels
        self.conv1 = nn.Conv2d(in_channels, dim, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(dim, dim, kernel_size=3, padding=1)

    def forward(self, maps: torch.Tensor) -> torch.Tensor:
        """B x F x H x W x C -> B x F x H x W x D"""
        if maps.dim() != 5 or maps.shape[-1] != self.in_channels:
            raise ShapeError(
                f"Expected B x F x H x W x {self.in_channels} maps, got {tuple(maps.shape)}"
            )
        b, f, h, w, c = maps.shape
        x = maps.reshape(b * f, h, w, c).permute(0, 3, 1, 2)
        x = self.conv2(F.relu(self.conv1(x)))
        return x.permute(0, 2, 3, 1).reshape(b, f, h, w, -1)
