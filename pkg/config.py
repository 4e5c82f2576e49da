"""
MOTIONTOK Configuration
Vision-guided motion tokenizer and unified motion language model.
"""

from typing import Dict, Any
import os

# ============================================================================
# CORE SPECIFICATIONS
# ============================================================================

PROJECT_NAME = "MOTIONTOK"
CLI_NAME = "motiontok"

# Pose sequences are sampled at 50 Hz so that 80/160/320 ms land on frames 4/8/16
FRAME_RATE_HZ = 50.0

# Clip length used by every task (16 frames = 320 ms)
CLIP_FRAMES = 16

# Language-model clips: 16 frames of history followed by 16 frames of future
LM_CLIP_FRAMES = 32

# Motion prediction horizons (milliseconds)
PREDICTION_HORIZONS_MS = (80, 160, 320)

# ============================================================================
# SKELETON
# ============================================================================

# Human3.6M 17-joint ordering
NUM_JOINTS = 17
ROOT_JOINT = "pelvis"

BODY_PARTS = ("torso", "left_arm", "right_arm", "left_leg", "right_leg")

# ============================================================================
# CAMERA
# ============================================================================

# Pinhole intrinsics of the synthetic camera (pixels)
DEFAULT_FOCAL = (1145.0, 1145.0)
DEFAULT_PRINCIPAL_POINT = (500.0, 500.0)
IMAGE_SIZE = (1000, 1000)  # width, height

# Distance of the subject from the camera (mm)
DEFAULT_SUBJECT_DEPTH = 4500.0

# ============================================================================
# SYNTHETIC MOTION
# ============================================================================

SYNTH_COMPONENTS = 3                 # sinusoids per joint axis
SYNTH_AMPLITUDE_RANGE = (0.05, 0.35)  # radians
SYNTH_FREQUENCY_RANGE = (0.3, 1.5)    # Hz
SYNTH_ROOT_SWAY_MM = 40.0
SYNTH_ROOT_SPEED_RANGE = (0.0, 600.0)  # mm/s drift

# ============================================================================
# TOKENIZER (VGMT)
# ============================================================================

# Desk-scale hybrid codebook
CODEBOOK_SIZE = 256
CODE_HALF_DIM = 32

# Full-scale hybrid codebook (K=8192, D=2048 split in two halves)
FULL_SCALE_CODEBOOK_SIZE = 8192
FULL_SCALE_CODE_HALF_DIM = 1024

# Encoders halve the number of frames
DOWNSAMPLE_FACTOR = 2

# Visual-Skeleton Attention sampler
VSA_HEADS = 4
VSA_POINTS = 4

# Visual feature grid (H' x W') and rendered channels
FEATURE_GRID = 32
HEATMAP_SIGMA = 1.0  # grid cells

# Commitment weights
BETA_S = 0.5
BETA_V = 0.5
BETA_COMMIT = 0.25

# Optimisation
TOKENIZER_LR = 2e-4
TOKENIZER_BATCH = 16
TOKENIZER_STEPS = 3000
TOKENIZER_LOG_INTERVAL = 250
GRAD_CLIP_NORM = 1.0

STREAM_MODES = ("fused", "skeleton", "visual")
TOKEN_MODES = ("per_joint", "pooled")

# ============================================================================
# MOTION LANGUAGE MODEL
# ============================================================================

LM_LAYERS = 4
LM_HEADS = 4
LM_DIM = 256
LM_CONTEXT_LENGTH = 1024
LM_DROPOUT = 0.0

# MAFT fusion block (desk scale)
MAFT_HEADS = 4
MAFT_PATCHES = 4          # P x P patch grid per window
MAFT_DIM = 64
MAFT_FFN_DIM = 128

# MAFT fusion block (full scale: 8 heads, hidden 1280, base model 9,605M)
FULL_SCALE_MAFT_HEADS = 8
FULL_SCALE_MAFT_DIM = 1280
FULL_SCALE_MAFT_FFN_DIM = 1280
FULL_SCALE_TOTAL_PARAMS = 9_605_000_000
MAFT_PARAM_BUDGET = 0.002

# Optimisation
LM_LR = 1e-4
LM_BATCH = 16
LM_STEPS = 2000
LM_WARMUP_RATIO = 0.1
LM_LOG_INTERVAL = 100

# Standard deviation (pixels) of the noise added to 2D reference points
REFERENCE_POINT_NOISE_PX = 0.0

TASKS = ("pe", "mp", "mib")
DEFAULT_TASK_MIX = {"pe": 1.0, "mp": 1.0, "mib": 1.0}

# Tokens ignored by the cross-entropy
IGNORE_INDEX = -100

# Largest frame number the vocabulary can label
MAX_WINDOWS = 64

# ============================================================================
# CODEBOOK DIAGNOSTICS
# ============================================================================

# Usage buckets (fractions of all emitted tokens)
USAGE_FREQUENT = 0.01      # > 1%
USAGE_ACTIVE = 0.0001      # 0.01% .. 1%

COSINE_BINS = 40

# ============================================================================
# FILE FORMATS
# ============================================================================

MSKL_VERSION = 1
MTCK_MAGIC = b"MTCK"
MTCK_VERSION = 1
# Largest integer magnitude an f32 record holds exactly
MTCK_MAX_EXACT_INT = 2 ** 24
TEMPLATE_VERSION = "v1"

POSE_SUFFIX = ".mskl"
CHECKPOINT_SUFFIX = ".mtck"

# ============================================================================
# LOGGING
# ============================================================================

LOG_LEVEL = "INFO"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE = "motiontok.log"

# ============================================================================
# VERSION INFO
# ============================================================================

VERSION = "1.0.0"
CLIENT_NAME = f"{PROJECT_NAME} {VERSION}"


# ============================================================================
# HELPER FUNCTIONS
# ============================================================================

def get_data_dir() -> str:
    """Get default data directory (MOTIONTOK_HOME overrides)."""
    override = os.environ.get("MOTIONTOK_HOME")
    if override:
        return override
    return os.path.join(os.path.expanduser("~"), ".motiontok")


def get_thread_count() -> int:
    """Thread cap from MOTIONTOK_THREADS, 0 meaning library default."""
    value = os.environ.get("MOTIONTOK_THREADS", "")
    try:
        return max(0, int(value))
    except ValueError:
        return 0


def horizon_table() -> Dict[str, int]:
    """Report keys for the prediction horizons, e.g. {'ms80': 80}."""
    return {f"ms{ms}": ms for ms in PREDICTION_HORIZONS_MS}


def full_scale_overrides() -> Dict[str, Dict[str, Any]]:
    """Run-configuration values for the published tokenizer and fusion block sizes."""
    return {
        "vgmt": {
            "num_codes": FULL_SCALE_CODEBOOK_SIZE,
            "half_dim": FULL_SCALE_CODE_HALF_DIM,
        },
        "lm": {
            "visual_dim": FULL_SCALE_MAFT_DIM,
            "maft_heads": FULL_SCALE_MAFT_HEADS,
            "maft_ffn_dim": FULL_SCALE_MAFT_FFN_DIM,
        },
    }
