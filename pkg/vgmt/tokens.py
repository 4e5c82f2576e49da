"""
MOTIONTOK Token Grids
W windows x N joints of integer code indices.
"""

from typing import Dict, Any
from dataclasses import dataclass

import numpy as np

import config
from errors import TokenIndexError, ShapeError, FormatError
from core.skeleton import JointLayout, H36M_LAYOUT


@dataclass(frozen=True, eq=False)
class TokenGrid:
    """Discrete motion tokens of one clip."""

    indices: np.ndarray
    num_codes: int
    layout: JointLayout = H36M_LAYOUT
    frame_rate_hz: float = config.FRAME_RATE_HZ
    downsample: int = config.DOWNSAMPLE_FACTOR

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64, copy=True)
        if idx.ndim != 2:
            raise ShapeError(f"Token grid must be W x N, got {idx.shape}")
        if idx.shape[1] != self.layout.num_joints:
            raise ShapeError(
                f"Token grid has {idx.shape[1]} columns, layout has {self.layout.num_joints} joints"
            )
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_codes):
            raise TokenIndexError(
                f"Token indices must lie in [0, {self.num_codes}), got [{idx.min()}, {idx.max()}]"
            )
        idx.setflags(write=False)
        object.__setattr__(self, 'indices', idx)

    @property
    def num_windows(self) -> int:
        return self.indices.shape[0]

    @property
    def num_joints(self) -> int:
        return self.indices.shape[1]

    @property
    def num_frames(self) -> int:
        return self.num_windows * self.downsample

    def __eq__(self, other) -> bool:
        if not isinstance(other, TokenGrid):
            return NotImplemented
        return (self.num_codes == other.num_codes
                and self.layout == other.layout
                and np.array_equal(self.indices, other.indices))

    __hash__ = None

    def with_indices(self, indices: np.ndarray) -> 'TokenGrid':
        return TokenGrid(indices=indices, num_codes=self.num_codes, layout=self.layout,
                         frame_rate_hz=self.frame_rate_hz, downsample=self.downsample)

    def slice_windows(self, start: int, stop: int) -> 'TokenGrid':
        return self.with_indices(self.indices[start:stop])

    def to_dict(self, config_hash: str = "") -> Dict[str, Any]:
        return {
            'num_codes': self.num_codes,
            'windows': self.num_windows,
            'joints': self.num_joints,
            'frame_rate_hz': self.frame_rate_hz,
            'downsample': self.downsample,
            'layout': self.layout.to_dict(),
            'indices': self.indices.tolist(),
            'config_hash': config_hash,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TokenGrid':
        try:
            layout = JointLayout.from_dict(data['layout']) if 'layout' in data else H36M_LAYOUT
            indices = np.asarray(data['indices'], dtype=np.int64)
            if indices.ndim != 2:
                indices = indices.reshape(-1, layout.num_joints)
            return cls(
                indices=indices,
                num_codes=int(data['num_codes']),
                layout=layout,
                frame_rate_hz=float(data.get('frame_rate_hz', config.FRAME_RATE_HZ)),
                downsample=int(data.get('downsample', config.DOWNSAMPLE_FACTOR)),
            )
        except (KeyError, ValueError, TypeError) as e:
            raise FormatError(f"Malformed token file: {e}")
