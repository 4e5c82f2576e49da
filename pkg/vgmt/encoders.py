"""
MOTIONTOK Tokenizer Encoders
2D convolutions over the frame x joint grid. Tensors are laid out
B x D x F x N inside the networks and B x F x N x D outside.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

import config
from errors import ShapeError


class ResidualBlock(nn.Module):
    """x + conv(relu(conv(relu(x))))"""

    def __init__(self, dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(dim, dim, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(dim, dim, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.conv2(F.relu(self.conv1(F.relu(x))))


def _check_factor(factor: int) -> None:
    if factor < 2 or factor % 2:
        raise ShapeError(f"Temporal downsample factor must be even and >= 2, got {factor}")


def _to_grid(x: torch.Tensor) -> torch.Tensor:
    return x.permute(0, 3, 1, 2)


def _from_grid(x: torch.Tensor) -> torch.Tensor:
    return x.permute(0, 2, 3, 1)


class VisualEncoder(nn.Module):
    """Two residual blocks then one strided temporal convolution."""

    def __init__(self, dim: int = config.CODE_HALF_DIM,
                 factor: int = config.DOWNSAMPLE_FACTOR):
        super().__init__()
        _check_factor(factor)
        self.factor = factor
        self.blocks = nn.Sequential(ResidualBlock(dim), ResidualBlock(dim))
        self.down = nn.Conv2d(dim, dim, kernel_size=(2 * factor, 1),
                              stride=(factor, 1), padding=(factor // 2, 0))

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """B x D x F x N -> B x D x F x N"""
        return self.blocks(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """B x F x N x D -> B x W x N x D"""
        frames = x.shape[1]
        if frames % self.factor:
            raise ShapeError(f"Frame count {frames} is not divisible by {self.factor}")
        return _from_grid(self.down(self.features(_to_grid(x))))


class SkeletonEncoder(VisualEncoder):
    """Input convolution from xyz, then the shared encoder trunk."""

    def __init__(self, dim: int = config.CODE_HALF_DIM,
                 factor: int = config.DOWNSAMPLE_FACTOR):
        super().__init__(dim, factor)
        self.conv_in = nn.Conv2d(3, dim, kernel_size=3, padding=1)

    def encode(self, x: torch.Tensor):
        """
        Args:
            x: B x F x N x 3 normalised poses

        Returns:
            (S: B x F x N x D per-frame features, z_s: B x W x N x D)
        """
        frames = x.shape[1]
        if frames % self.factor:
            raise ShapeError(f"Frame count {frames} is not divisible by {self.factor}")
        feats = self.features(self.conv_in(_to_grid(x)))
        return _from_grid(feats), _from_grid(self.down(feats))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.encode(x)[1]


class MotionDecoder(nn.Module):
    """Mirror of the encoder: nearest temporal upsampling then convolutions to xyz."""

    def __init__(self, dim: int = config.CODE_HALF_DIM,
                 factor: int = config.DOWNSAMPLE_FACTOR):
        super().__init__()
        _check_factor(factor)
        self.factor = factor
        self.conv_in = nn.Conv2d(dim, dim, kernel_size=3, padding=1)
        self.blocks = nn.Sequential(ResidualBlock(dim), ResidualBlock(dim))
        self.up = nn.Upsample(scale_factor=(factor, 1), mode='nearest')
        self.conv_up = nn.Conv2d(dim, dim, kernel_size=3, padding=1)
        self.conv_out = nn.Conv2d(dim, 3, kernel_size=3, padding=1)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        """B x W x N x D -> B x F x N x 3"""
        x = self.blocks(self.conv_in(_to_grid(h)))
        x = F.relu(self.conv_up(self.up(x)))
        return _from_grid(self.conv_out(x))
