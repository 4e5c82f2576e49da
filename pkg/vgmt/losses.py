"""
MOTIONTOK VQ Objective
Reconstruction plus modality-wise codebook terms, with an optional encoder
commitment term.

    L = |x - x_hat|^2
        + beta_s |sg[z_s] - c_s|^2 + beta_v |sg[z_v] - c_v|^2
        + beta_commit (|z_s - sg[c_s]|^2 + |z_v - sg[c_v]|^2)

Every squared norm is a mean over its elements. beta_commit = 0 reproduces
the objective without encoder commitment, in which case the visual encoder
receives no gradient in fused mode.
"""

import logging
from typing import Optional, Dict
from dataclasses import dataclass

import torch
import torch.nn.functional as F

import config
from errors import ConfigError, ShapeError
from numerics.ops import stop_gradient
from .model import VgmtOutputs

logger = logging.getLogger(__name__)


@dataclass
class VqLossTerms:
    """Total loss and its components."""

    total: torch.Tensor
    recon: torch.Tensor
    skeletal_code: torch.Tensor
    visual_code: torch.Tensor
    commit: torch.Tensor

    def to_dict(self) -> Dict[str, float]:
        return {
            'total': float(self.total.detach()),
            'recon': float(self.recon.detach()),
            'skeletal_code': float(self.skeletal_code.detach()),
            'visual_code': float(self.visual_code.detach()),
            'commit': float(self.commit.detach()),
        }


def _sq(a: Optional[torch.Tensor], b: Optional[torch.Tensor], like: torch.Tensor) -> torch.Tensor:
    if a is None or b is None:
        return like.new_zeros(())
    if a.shape != b.shape:
        raise ShapeError(f"Shape mismatch in VQ loss: {tuple(a.shape)} vs {tuple(b.shape)}")
    return F.mse_loss(a, b)


def vq_loss(x: torch.Tensor, x_hat: torch.Tensor,
            z_v: Optional[torch.Tensor], z_s: Optional[torch.Tensor],
            c_v: Optional[torch.Tensor], c_s: Optional[torch.Tensor],
            beta_s: float = config.BETA_S, beta_v: float = config.BETA_V,
            beta_commit: float = config.BETA_COMMIT) -> VqLossTerms:
    """
    VQ training objective.

    Args:
        x, x_hat: target and reconstruction
        z_v, z_s: encoder outputs (None for an inactive stream)
        c_v, c_s: selected prototypes, carrying the codebook gradient
        beta_s, beta_v: codebook weights per modality
        beta_commit: encoder commitment weight

    Raises:
        ConfigError: a weight is negative
    """
    for name, beta in (('beta_s', beta_s), ('beta_v', beta_v), ('beta_commit', beta_commit)):
        if beta < 0:
            raise ConfigError(f"{name} must be non-negative, got {beta}")
    if x.shape != x_hat.shape:
        raise ShapeError(f"Reconstruction shape {tuple(x_hat.shape)} does not match {tuple(x.shape)}")

    recon = F.mse_loss(x_hat, x)
    sg = stop_gradient
    skeletal_code = _sq(None if z_s is None else sg(z_s), c_s, recon)
    visual_code = _sq(None if z_v is None else sg(z_v), c_v, recon)
    commit = (_sq(z_s, None if c_s is None else sg(c_s), recon)
              + _sq(z_v, None if c_v is None else sg(c_v), recon))

    total = recon + beta_s * skeletal_code + beta_v * visual_code + beta_commit * commit
    return VqLossTerms(total=total, recon=recon, skeletal_code=skeletal_code,
                       visual_code=visual_code, commit=commit)


def vq_loss_from_outputs(out: VgmtOutputs, beta_s: float = config.BETA_S,
                         beta_v: float = config.BETA_V,
                         beta_commit: float = config.BETA_COMMIT) -> VqLossTerms:
    return vq_loss(out.x, out.x_hat, out.z_v, out.z_s, out.c_v, out.c_s,
                   beta_s=beta_s, beta_v=beta_v, beta_commit=beta_commit)
