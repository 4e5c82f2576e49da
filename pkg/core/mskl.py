"""
MOTIONTOK Pose Files
MSKL v1: one JSON header line followed by little-endian float32 F x N x 3
positions (frame, joint, xyz row-major). A pure-JSON variant carries the
positions in a nested "frames" array.
"""

import json
import logging
from typing import Dict, Any, Optional

import numpy as np

import config
from errors import FormatError
from .skeleton import PoseSequence, JointLayout, CoordinateSpace, H36M_LAYOUT

logger = logging.getLogger(__name__)


def _header(seq: PoseSequence) -> Dict[str, Any]:
    header = {
        'version': config.MSKL_VERSION,
        'n_joints': seq.num_joints,
        'frame_rate_hz': seq.frame_rate_hz,
        'space': seq.coordinate_space.value,
        'layout': list(seq.layout.names),
    }
    if seq.layout != H36M_LAYOUT:
        header['groups'] = {k: list(v) for k, v in seq.layout.groups.items()}
        header['root_index'] = seq.layout.root_index
    if seq.label is not None:
        header['label'] = seq.label
    return header


def encode_mskl(seq: PoseSequence, json_variant: bool = False) -> bytes:
    """Serialize a pose sequence to MSKL bytes."""
    header = _header(seq)
    if json_variant:
        header['frames'] = seq.data.astype(np.float32).astype(np.float64).tolist()
        return json.dumps(header, separators=(',', ':')).encode('utf-8') + b'\n'
    line = json.dumps(header, separators=(',', ':')).encode('utf-8') + b'\n'
    return line + seq.data.astype('<f4').tobytes()


def _layout_from_header(header: Dict[str, Any]) -> JointLayout:
    names = tuple(header.get('layout', ()))
    if 'groups' in header:
        return JointLayout(
            names=names,
            root_index=int(header.get('root_index', 0)),
            groups={k: tuple(v) for k, v in header['groups'].items()},
        )
    if names and names != H36M_LAYOUT.names:
        raise FormatError("Custom joint layout without body-part groups")
    return H36M_LAYOUT


def decode_mskl(data: bytes) -> PoseSequence:
    """Parse MSKL bytes (binary or pure-JSON variant)."""
    newline = data.find(b'\n')
    head = data if newline < 0 else data[:newline]
    try:
        header = json.loads(head.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        # pretty-printed JSON variant spans several lines
        try:
            header = json.loads(data.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise FormatError(f"Bad MSKL header: {e}")

    if header.get('version') != config.MSKL_VERSION:
        raise FormatError(f"Unsupported MSKL version {header.get('version')}")
    for key in ('n_joints', 'frame_rate_hz', 'space'):
        if key not in header:
            raise FormatError(f"MSKL header missing '{key}'")

    try:
        space = CoordinateSpace(header['space'])
    except ValueError:
        raise FormatError(f"Unknown coordinate space {header['space']!r}")

    n = int(header['n_joints'])
    layout = _layout_from_header(header)
    if layout.num_joints != n:
        raise FormatError(f"Header n_joints={n} but layout has {layout.num_joints} names")

    if 'frames' in header:
        positions = np.asarray(header['frames'], dtype=np.float64)
    else:
        blob = data[newline + 1:]
        if len(blob) % (n * 3 * 4) != 0:
            raise FormatError(f"Payload of {len(blob)} bytes is not a whole number of frames")
        positions = np.frombuffer(blob, dtype='<f4').astype(np.float64).reshape(-1, n, 3)

    if positions.ndim != 3 or positions.shape[1:] != (n, 3):
        raise FormatError(f"Positions have shape {positions.shape}, expected F x {n} x 3")

    return PoseSequence(
        data=positions,
        frame_rate_hz=float(header['frame_rate_hz']),
        coordinate_space=space,
        layout=layout,
        label=header.get('label'),
    )


def write_mskl(path: str, seq: PoseSequence, json_variant: bool = False) -> None:
    with open(path, 'wb') as f:
        f.write(encode_mskl(seq, json_variant=json_variant))
    logger.debug(f"Wrote {path} ({seq.num_frames} frames)")


def read_mskl(path: str) -> PoseSequence:
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise FormatError(f"Cannot read {path}: {e}")
    return decode_mskl(data)
