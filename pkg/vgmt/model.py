"""
MOTIONTOK Vision-Guided Motion Tokenizer
Dual-stream VQ-VAE: a skeleton stream over pixel/root-relative joints and a
visual stream sampled from feature maps at the joints' 2D projections,
quantized jointly against a hybrid paired codebook. Only the skeletal half
of the selected code is decoded (or the visual half in visual-only mode).
"""

import logging
from typing import Dict, Any, Optional, Tuple
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn

import config
from errors import ConfigError, ShapeError, CoordinateSpaceError, NumericError, CheckpointError
from core.skeleton import PoseSequence, CoordinateSpace
from numerics.ops import FeatureMapSequence, straight_through, uniform_fan_in_, bilinear_sample_torch
from .codebook import HybridCodebook, QuantizeResult
from .encoders import SkeletonEncoder, VisualEncoder, MotionDecoder
from .visual import VisualStem, pixels_to_grid, render_heatmaps_torch
from .vsa import VisualSkeletonAttention
from .tokens import TokenGrid

logger = logging.getLogger(__name__)


@dataclass
class VgmtConfig:
    """Tokenizer architecture and objective weights."""

    num_codes: int = config.CODEBOOK_SIZE
    half_dim: int = config.CODE_HALF_DIM
    num_joints: int = config.NUM_JOINTS
    downsample: int = config.DOWNSAMPLE_FACTOR
    vsa_heads: int = config.VSA_HEADS
    vsa_points: int = config.VSA_POINTS
    feature_grid: int = config.FEATURE_GRID
    heatmap_sigma: float = config.HEATMAP_SIGMA
    image_size: Tuple[int, int] = config.IMAGE_SIZE
    stream_mode: str = "fused"
    token_mode: str = "per_joint"
    use_vsa: bool = True
    beta_s: float = config.BETA_S
    beta_v: float = config.BETA_V
    beta_commit: float = config.BETA_COMMIT

    def __post_init__(self):
        if self.stream_mode not in config.STREAM_MODES:
            raise ConfigError(f"Unknown stream mode {self.stream_mode!r}")
        if self.token_mode not in config.TOKEN_MODES:
            raise ConfigError(f"Unknown token mode {self.token_mode!r}")
        for name in ('beta_s', 'beta_v', 'beta_commit'):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.num_codes < 2 or self.half_dim < 1:
            raise ConfigError(f"Invalid codebook size K={self.num_codes}, D_half={self.half_dim}")
        if self.downsample < 2 or self.downsample % 2:
            raise ConfigError(f"downsample must be even and >= 2, got {self.downsample}")
        self.image_size = tuple(self.image_size)

    @property
    def uses_visual(self) -> bool:
        return self.stream_mode in ("fused", "visual")

    @property
    def uses_skeleton(self) -> bool:
        return self.stream_mode in ("fused", "skeleton")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['image_size'] = list(self.image_size)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'VgmtConfig':
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class VgmtOutputs:
    """Everything the VQ objective needs from one forward pass."""

    x: torch.Tensor                    # B x F x N x 3 normalised target
    x_hat: torch.Tensor                # B x F x N x 3 normalised reconstruction
    z_v: Optional[torch.Tensor]        # B x W x N' x D
    z_s: Optional[torch.Tensor]
    c_v: Optional[torch.Tensor]        # selected prototypes (with codebook gradient)
    c_s: Optional[torch.Tensor]
    indices: torch.Tensor              # B x W x N'


class VisionGuidedTokenizer(nn.Module):
    """Dual-stream encoders, hybrid codebook and decoder."""

    def __init__(self, cfg: Optional[VgmtConfig] = None):
        super().__init__()
        self.cfg = cfg or VgmtConfig()
        c = self.cfg
        self.skeleton_encoder = SkeletonEncoder(c.half_dim, c.downsample)
        self.visual_stem = VisualStem(c.num_joints + 1, c.half_dim)
        self.visual_encoder = VisualEncoder(c.half_dim, c.downsample)
        self.decoder = MotionDecoder(c.half_dim, c.downsample)
        uniform_fan_in_(self)

        self.vsa = VisualSkeletonAttention(c.half_dim, c.vsa_heads, c.vsa_points)
        self.codebook = HybridCodebook(c.num_codes, c.half_dim)
        self.joint_embedding = nn.Parameter(torch.zeros(c.num_joints, c.half_dim))

        self.register_buffer('mean', torch.zeros(3))
        self.register_buffer('std', torch.ones(3))

    # ------------------------------------------------------------------
    # Normalisation
    # ------------------------------------------------------------------

    def set_normalization(self, pixel_poses: np.ndarray) -> None:
        """Per-channel statistics of a ... x 3 pixel_rootrel array."""
        flat = np.asarray(pixel_poses, dtype=np.float64).reshape(-1, 3)
        std = flat.std(axis=0)
        std[std < 1e-6] = 1.0
        with torch.no_grad():
            self.mean.copy_(torch.from_numpy(flat.mean(axis=0)))
            self.std.copy_(torch.from_numpy(std))

    def normalize(self, px: torch.Tensor) -> torch.Tensor:
        return (px - self.mean.to(px.dtype)) / self.std.to(px.dtype)

    def denormalize(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.std.to(x.dtype) + self.mean.to(x.dtype)

    # ------------------------------------------------------------------
    # Streams
    # ------------------------------------------------------------------

    def reference_points(self, px: torch.Tensor) -> torch.Tensor:
        """Grid coordinates of the joints' 2D projections, B x F x N x 2."""
        return pixels_to_grid(px[..., :2], self.cfg.image_size, self.cfg.feature_grid)

    def render(self, px: torch.Tensor) -> torch.Tensor:
        """Default visual input: rendered joint blobs, B x F x G x G x (N + 1)."""
        return render_heatmaps_torch(self.reference_points(px), px[..., 2],
                                     self.cfg.feature_grid, self.cfg.heatmap_sigma)

    def encode_skeleton(self, px: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            px: B x F x N x 3 pixel_rootrel poses

        Returns:
            (S: B x F x N x D, z_s: B x W x N x D)
        """
        self._check_frames(px.shape[1])
        return self.skeleton_encoder.encode(self.normalize(px))

    def encode_visual(self, maps: torch.Tensor, ref: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            maps: B x F x H' x W' x C feature maps
            ref: B x F x N x 2 reference points (grid coordinates)

        Returns:
            (V: B x F x N x D, z_v: B x W x N x D)
        """
        if maps.shape[:2] != ref.shape[:2]:
            raise ShapeError(
                f"Feature maps {tuple(maps.shape)} and reference points {tuple(ref.shape)} disagree"
            )
        self._check_frames(maps.shape[1])
        b, f, n, _ = ref.shape
        feats = self.visual_stem(maps)                                  # B x F x H x W x D
        grids = feats.reshape(b * f, *feats.shape[2:])
        points = ref.reshape(b * f, n, 2)
        query = bilinear_sample_torch(grids, points)                    # BF x N x D
        v = self.vsa(query, grids, points) if self.cfg.use_vsa else query
        v = v.reshape(b, f, n, -1)
        return v, self.visual_encoder(v)

    def _check_frames(self, frames: int) -> None:
        if frames % self.cfg.downsample:
            raise ShapeError(
                f"Frame count {frames} is not divisible by the downsample factor {self.cfg.downsample}"
            )

    def _pool(self, z: Optional[torch.Tensor]) -> Optional[torch.Tensor]:
        if z is None or self.cfg.token_mode == "per_joint":
            return z
        return z.mean(dim=2, keepdim=True)

    # ------------------------------------------------------------------
    # Quantization and decoding
    # ------------------------------------------------------------------

    def quantize(self, z_v: Optional[torch.Tensor], z_s: Optional[torch.Tensor]) -> QuantizeResult:
        """Joint-distance quantization restricted to the active streams."""
        return self.codebook.quantize(
            z_v if self.cfg.uses_visual else None,
            z_s if self.cfg.uses_skeleton else None,
        )

    def decode_latent(self, h: torch.Tensor) -> torch.Tensor:
        """Decoder input B x W x N' x D to normalised poses B x F x N x 3."""
        if self.cfg.token_mode == "pooled":
            h = h.expand(-1, -1, self.cfg.num_joints, -1) + self.joint_embedding
        return self.decoder(h)

    def decode_indices(self, indices: torch.Tensor) -> torch.Tensor:
        """B x W x N code grid to B x F x N x 3 pixel_rootrel poses."""
        c_v, c_s = self.codebook.lookup(indices)
        h = c_v if self.cfg.stream_mode == "visual" else c_s
        if self.cfg.token_mode == "pooled":
            h = h[:, :, :1]
        return self.denormalize(self.decode_latent(h))

    def encode(self, px: torch.Tensor, maps: Optional[torch.Tensor] = None,
               ref: Optional[torch.Tensor] = None):
        """(normalised x, z_v, z_s) for the active streams; inactive ones are None."""
        x = self.normalize(px)
        z_s = z_v = None
        if self.cfg.uses_skeleton:
            _, z_s = self.skeleton_encoder.encode(x)
        if self.cfg.uses_visual:
            ref = self.reference_points(px) if ref is None else ref
            maps = self.render(px) if maps is None else maps
            _, z_v = self.encode_visual(maps, ref)
        return x, self._pool(z_v), self._pool(z_s)

    def forward(self, px: torch.Tensor, maps: Optional[torch.Tensor] = None,
                ref: Optional[torch.Tensor] = None,
                indices: Optional[torch.Tensor] = None) -> VgmtOutputs:
        """
        Full pass for training.

        Args:
            px: B x F x N x 3 pixel_rootrel poses
            maps: visual input (rendered from px when omitted)
            ref: reference points (projections of px when omitted)
            indices: fixed code assignment, bypassing the argmin
        """
        x, z_v, z_s = self.encode(px, maps, ref)
        if indices is None:
            indices = self.quantize(z_v, z_s).indices
        c_v_all, c_s_all = self.codebook.lookup(indices)
        c_v = c_v_all if z_v is not None else None
        c_s = c_s_all if z_s is not None else None

        if self.cfg.stream_mode == "visual":
            h = straight_through(z_v, c_v)
        else:
            h = straight_through(z_s, c_s)
        x_hat = self.decode_latent(h)
        return VgmtOutputs(x=x, x_hat=x_hat, z_v=z_v, z_s=z_s, c_v=c_v, c_s=c_s, indices=indices)

    # ------------------------------------------------------------------
    # Sequence-level API
    # ------------------------------------------------------------------

    def _pose_tensor(self, seq: PoseSequence) -> torch.Tensor:
        if seq.coordinate_space is not CoordinateSpace.PIXEL_ROOTREL:
            raise CoordinateSpaceError("Tokenizer expects pixel_rootrel sequences")
        if seq.num_joints != self.cfg.num_joints:
            raise ShapeError(f"Sequence has {seq.num_joints} joints, tokenizer expects {self.cfg.num_joints}")
        dtype = next(self.parameters()).dtype
        return torch.from_numpy(np.array(seq.data)).to(dtype)[None]

    @torch.no_grad()
    def tokenize(self, seq: PoseSequence, maps: Optional[FeatureMapSequence] = None) -> TokenGrid:
        """Encode both streams and quantize every (window, joint) cell."""
        self.check_finite()
        px = self._pose_tensor(seq)
        self._check_frames(px.shape[1])
        visual = None if maps is None else maps.to_tensor().to(px.dtype)[None]
        out = self.forward(px, maps=visual)
        idx = out.indices[0]
        if self.cfg.token_mode == "pooled":
            idx = idx.expand(-1, self.cfg.num_joints)
        return TokenGrid(
            indices=idx.cpu().numpy(),
            num_codes=self.cfg.num_codes,
            layout=seq.layout,
            frame_rate_hz=seq.frame_rate_hz,
            downsample=self.cfg.downsample,
        )

    @torch.no_grad()
    def decode(self, grid: TokenGrid) -> PoseSequence:
        """Skeletal prototypes -> pixel_rootrel poses with root depth exactly 0."""
        if grid.num_codes != self.cfg.num_codes:
            raise ShapeError(f"Grid uses K={grid.num_codes}, tokenizer has K={self.cfg.num_codes}")
        idx = torch.from_numpy(np.array(grid.indices))[None]
        px = self.decode_indices(idx)[0].double().cpu().numpy()
        root = grid.layout.root_index
        px[..., 2] -= px[:, root:root + 1, 2]
        px[:, root, 2] = 0.0
        return PoseSequence(
            data=px,
            frame_rate_hz=grid.frame_rate_hz,
            coordinate_space=CoordinateSpace.PIXEL_ROOTREL,
            layout=grid.layout,
        )

    def check_finite(self) -> None:
        for name, p in self.named_parameters():
            if not torch.isfinite(p).all():
                raise NumericError(f"Tokenizer parameter {name} is not finite")

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def metadata(self, config_hash: str = "") -> Dict[str, Any]:
        return {'kind': 'vgmt', 'model': self.cfg.to_dict(), 'config_hash': config_hash}

    @classmethod
    def from_checkpoint(cls, state: Dict[str, torch.Tensor], metadata: Dict[str, Any]) -> 'VisionGuidedTokenizer':
        if metadata.get('kind') != 'vgmt':
            raise CheckpointError(f"Checkpoint holds a {metadata.get('kind')!r} model, not a tokenizer")
        model = cls(VgmtConfig.from_dict(metadata.get('model', {})))
        try:
            model.load_state_dict(state)
        except RuntimeError as e:
            raise CheckpointError(f"Checkpoint does not match the tokenizer: {e}")
        model.eval()
        return model
