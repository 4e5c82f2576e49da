"""
MOTIONTOK Codebook Diagnostics
Usage buckets, pairwise cosine similarities of the concatenated prototypes
and per-code mean joint displacement directions.
"""

import logging
from typing import List, Dict, Any, Sequence, Union, Tuple
from dataclasses import dataclass, field

import numpy as np

import config
from errors import CodebookError, EmptyDatasetError, DataError
from core.dataset import MotionClip
from vgmt.codebook import HybridCodebook, bucket_usage, USAGE_BUCKETS
from vgmt.model import VisionGuidedTokenizer
from vgmt.tokens import TokenGrid

logger = logging.getLogger(__name__)


# ============================================================================
# USAGE
# ============================================================================

def usage_labels(counts: np.ndarray) -> List[str]:
    """Bucket name of every code, same thresholds as bucket_usage."""
    counts = np.asarray(counts, dtype=np.int64)
    total = counts.sum()
    labels = []
    for c in counts:
        rate = c / total if total > 0 else 0.0
        if c == 0:
            labels.append("unused")
        elif rate > config.USAGE_FREQUENT:
            labels.append("frequent")
        elif rate >= config.USAGE_ACTIVE:
            labels.append("active")
        else:
            labels.append("underused")
    return labels


@dataclass
class CodebookUsageReport:
    counts: np.ndarray                  # K per-code counts
    config_hash: str = ""
    buckets: Dict[str, int] = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.buckets = bucket_usage(self.counts)

    @property
    def num_codes(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / max(self.total, 1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'K': self.num_codes,
            'total_tokens': self.total,
            'buckets': self.buckets,
            'counts': self.counts.tolist(),
            'config_hash': self.config_hash,
        }

    def rows(self) -> List[Tuple[int, int, float, str]]:
        """(code, count, frequency, bucket) per code."""
        labels = usage_labels(self.counts)
        freqs = self.frequencies
        return [(k, int(self.counts[k]), float(freqs[k]), labels[k]) for k in range(self.num_codes)]


def usage_from_grids(grids: Sequence[TokenGrid], num_codes: int, config_hash: str = "") -> CodebookUsageReport:
    if not grids:
        raise EmptyDatasetError("No token grids to count")
    counts = np.zeros(num_codes, dtype=np.int64)
    for grid in grids:
        counts += np.bincount(grid.indices.reshape(-1), minlength=num_codes)
    return CodebookUsageReport(counts=counts, config_hash=config_hash)


def codebook_usage(tokenizer: VisionGuidedTokenizer, clips: Sequence[MotionClip],
                   config_hash: str = "") -> CodebookUsageReport:
    """Tokenize a dataset and bucket per-code usage."""
    if not clips:
        raise EmptyDatasetError("No clips to tokenize")
    grids = [tokenizer.tokenize(clip.pixel_pose) for clip in clips]
    report = usage_from_grids(grids, tokenizer.cfg.num_codes, config_hash)
    logger.info("Codebook usage: " + ", ".join(f"{b} {report.buckets[b]}" for b in USAGE_BUCKETS))
    if report.buckets['unused'] > report.num_codes // 2:
        logger.warning(f"{report.buckets['unused']} of {report.num_codes} codes are never used")
    return report


# ============================================================================
# COSINE SIMILARITY
# ============================================================================

@dataclass
class CosineHistogram:
    edges: np.ndarray       # bins + 1 edges over [-1, 1]
    counts: np.ndarray      # bins
    config_hash: str = ""

    @property
    def pairs(self) -> int:
        return int(self.counts.sum())

    def rows(self) -> List[Tuple[float, float, int]]:
        return [(float(self.edges[i]), float(self.edges[i + 1]), int(self.counts[i]))
                for i in range(len(self.counts))]

    def to_dict(self) -> Dict[str, Any]:
        return {'edges': self.edges.tolist(), 'counts': self.counts.tolist(),
                'pairs': self.pairs, 'config_hash': self.config_hash}


def pairwise_cosines(vectors: np.ndarray) -> np.ndarray:
    """Cosine similarity of every unordered pair of rows, K(K-1)/2 values."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise DataError(f"Need at least two code vectors, got shape {vectors.shape}")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0):
        raise CodebookError(f"Code {int(np.argmin(norms))} has a zero-norm vector")
    unit = vectors / norms[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    upper = np.triu_indices(len(vectors), k=1)
    return sims[upper]


def codebook_cosine_hist(cb: Union[HybridCodebook, np.ndarray], bins: int = config.COSINE_BINS,
                         config_hash: str = "") -> CosineHistogram:
    """Histogram over [-1, 1] of pairwise cosines of (c_v || c_s)."""
    vectors = cb.concatenated() if isinstance(cb, HybridCodebook) else np.asarray(cb)
    sims = pairwise_cosines(vectors)
    counts, edges = np.histogram(sims, bins=bins, range=(-1.0, 1.0))
    return CosineHistogram(edges=edges, counts=counts, config_hash=config_hash)


# ============================================================================
# SEMANTIC SPHERES
# ============================================================================

@dataclass
class SphereEntry:
    code: int
    count: int
    vector: np.ndarray          # unit mean displacement, or zeros when flagged
    zero: bool = False


def accumulate_spheres(pairs: Sequence[Tuple[TokenGrid, np.ndarray]], joint: int) -> Dict[int, SphereEntry]:
    """
    Mean displacement direction of `joint` per code.

    Each pair is a token grid and the F x N x 3 camera-space poses it covers;
    a window's displacement is the joint's last minus first frame position.
    """
    if not pairs:
        raise EmptyDatasetError("No tokenized clips for semantic spheres")
    sums: Dict[int, np.ndarray] = {}
    counts: Dict[int, int] = {}
    for grid, poses in pairs:
        poses = np.asarray(poses, dtype=np.float64)
        f = grid.downsample
        if not 0 <= joint < grid.num_joints:
            raise DataError(f"Joint {joint} outside 0..{grid.num_joints - 1}")
        if poses.shape[0] != grid.num_windows * f:
            raise DataError(f"{poses.shape[0]} frames for {grid.num_windows} windows of {f}")
        for w in range(grid.num_windows):
            code = int(grid.indices[w, joint])
            disp = poses[(w + 1) * f - 1, joint] - poses[w * f, joint]
            sums[code] = sums.get(code, np.zeros(3)) + disp
            counts[code] = counts.get(code, 0) + 1

    entries = {}
    for code in sorted(sums):
        mean = sums[code] / counts[code]
        norm = np.linalg.norm(mean)
        zero = norm < 1e-12
        entries[code] = SphereEntry(code=code, count=counts[code],
                                    vector=np.zeros(3) if zero else mean / norm, zero=zero)
    flagged = sum(e.zero for e in entries.values())
    if flagged:
        logger.warning(f"{flagged} codes have zero mean displacement for joint {joint}")
    return entries


def semantic_spheres(tokenizer: VisionGuidedTokenizer, clips: Sequence[MotionClip],
                     joint: int) -> Dict[int, SphereEntry]:
    """Per-code unit displacement vectors of one joint over a dataset."""
    if not clips:
        raise EmptyDatasetError("No clips for semantic spheres")
    pairs = [(tokenizer.tokenize(c.pixel_pose), c.pose.data) for c in clips]
    return accumulate_spheres(pairs, joint)
