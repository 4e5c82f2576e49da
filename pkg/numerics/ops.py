"""
MOTIONTOK Numeric Operators
Feature-map containers, bilinear sampling, stop-gradient and layer
initialisation shared by the tokenizer and the language model.
"""

import math
from typing import Tuple, Sequence
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from errors import ShapeError, NumericError


# ============================================================================
# FEATURE MAPS
# ============================================================================

@dataclass(frozen=True, eq=False)
class FeatureMapSequence:
    """Per-frame feature grids, F x H' x W' x C."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 4:
            raise ShapeError(f"Feature maps must be F x H x W x C, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericError("Feature maps contain non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    def frame(self, index: int) -> np.ndarray:
        return self.data[index]

    def to_tensor(self) -> torch.Tensor:
        return torch.from_numpy(np.array(self.data))


# ============================================================================
# BILINEAR SAMPLING
# ============================================================================

def bilinear_sample(frame_map: np.ndarray, point: Sequence[float]) -> np.ndarray:
    """
    Sample one H x W x C grid at continuous (x, y) grid coordinates.

    x indexes columns, y indexes rows. Coordinates outside the grid clamp
    to the border.
    """
    grid = np.asarray(frame_map, dtype=np.float64)
    if grid.ndim != 3:
        raise ShapeError(f"Expected an H x W x C grid, got {grid.shape}")
    h, w, _ = grid.shape

    x = min(max(float(point[0]), 0.0), w - 1.0)
    y = min(max(float(point[1]), 0.0), h - 1.0)
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    wx, wy = x - x0, y - y0

    return ((1 - wx) * (1 - wy) * grid[y0, x0]
            + wx * (1 - wy) * grid[y0, x1]
            + (1 - wx) * wy * grid[y1, x0]
            + wx * wy * grid[y1, x1])


def bilinear_sample_torch(maps: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
    """
    Differentiable batched bilinear sampling with border clamping.

    Args:
        maps: B x H x W x C feature grids
        points: B x ... x 2 continuous (x, y) grid coordinates

    Returns:
        B x ... x C sampled features
    """
    if maps.dim() != 4:
        raise ShapeError(f"Expected B x H x W x C maps, got {tuple(maps.shape)}")
    if points.shape[0] != maps.shape[0] or points.shape[-1] != 2:
        raise ShapeError(
            f"Points {tuple(points.shape)} do not match maps {tuple(maps.shape)}"
        )

    b, h, w, c = maps.shape
    lead = points.shape[1:-1]
    pts = points.reshape(b, -1, 2)

    x = pts[..., 0].clamp(0.0, w - 1.0)
    y = pts[..., 1].clamp(0.0, h - 1.0)
    x0 = torch.floor(x.detach())
    y0 = torch.floor(y.detach())
    x1 = (x0 + 1).clamp(max=w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)
    wx = (x - x0).unsqueeze(-1)
    wy = (y - y0).unsqueeze(-1)

    flat = maps.reshape(b, h * w, c)

    def gather(yi: torch.Tensor, xi: torch.Tensor) -> torch.Tensor:
        idx = (yi * w + xi).long().unsqueeze(-1).expand(-1, -1, c)
        return flat.gather(1, idx)

    out = ((1 - wx) * (1 - wy) * gather(y0, x0)
           + wx * (1 - wy) * gather(y0, x1)
           + (1 - wx) * wy * gather(y1, x0)
           + wx * wy * gather(y1, x1))
    return out.reshape(b, *lead, c)


# ============================================================================
# GRADIENT CONTROL
# ============================================================================

def stop_gradient(t: torch.Tensor) -> torch.Tensor:
    """Identity in the forward pass, zero gradient to its input."""
    return t.detach()


def straight_through(z: torch.Tensor, quantized: torch.Tensor) -> torch.Tensor:
    """Forward value of `quantized`, gradient copied to `z`."""
    return z + stop_gradient(quantized - z)


# ============================================================================
# INITIALISATION
# ============================================================================

def uniform_fan_in_(module: nn.Module) -> nn.Module:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every dense/conv layer."""
    for layer in module.modules():
        if isinstance(layer, (nn.Linear, nn.Conv1d, nn.Conv2d, nn.ConvTranspose2d)):
            fan_in = layer.weight[0].numel()
            bound = 1.0 / math.sqrt(fan_in)
            with torch.no_grad():
                layer.weight.uniform_(-bound, bound)
                if layer.bias is not None:
                    layer.bias.uniform_(-bound, bound)
    return module


def zero_(layer: nn.Module) -> nn.Module:
    """Zero a layer's weight and bias."""
    with torch.no_grad():
        for param in layer.parameters(recurse=False):
            param.zero_()
    return layer


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
