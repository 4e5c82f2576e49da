"""
MOTIONTOK Checkpoints
MTCK v1 binary format for named parameter tensors.

Layout (little-endian):
    4 bytes   magic b'MTCK'
    u16       version
    u32       metadata length, then UTF-8 JSON metadata
    u32       record count
    records:  u16 name length, UTF-8 name, u8 ndim, ndim x u32 extents,
              f32 payload (row-major)

Integer tensors are stored as f32 too, so their magnitudes must stay
within 2**24. Metadata is JSON and keeps integers exact.
"""

import json
import struct
import logging
from collections import OrderedDict
from typing import Dict, Any, Tuple

import numpy as np
import torch

import config
from errors import CheckpointError

logger = logging.getLogger(__name__)


def serialize_checkpoint(state: Dict[str, torch.Tensor], metadata: Dict[str, Any]) -> bytes:
    """Serialize a state dict and its metadata to MTCK bytes."""
    meta = json.dumps(metadata, sort_keys=True, separators=(',', ':')).encode('utf-8')

    data = config.MTCK_MAGIC
    data += struct.pack('<H', config.MTCK_VERSION)
    data += struct.pack('<I', len(meta)) + meta
    data += struct.pack('<I', len(state))

    for name, tensor in state.items():
        if not tensor.is_floating_point() and tensor.numel():
            largest = int(tensor.detach().long().abs().max())
            if largest > config.MTCK_MAX_EXACT_INT:
                raise CheckpointError(
                    f"Integer tensor {name} holds {largest}, beyond the exact f32 range"
                )
        encoded = name.encode('utf-8')
        array = tensor.detach().cpu().numpy().astype('<f4', copy=False)
        data += struct.pack('<H', len(encoded)) + encoded
        data += struct.pack('<B', array.ndim)
        data += struct.pack(f'<{array.ndim}I', *array.shape)
        data += np.ascontiguousarray(array).tobytes()

    return data


def deserialize_checkpoint(data: bytes) -> Tuple["OrderedDict[str, torch.Tensor]", Dict[str, Any]]:
    """
    Parse MTCK bytes.

    Returns:
        (state dict of float32 tensors, metadata)
    """
    if data[:4] != config.MTCK_MAGIC:
        raise CheckpointError("Not an MTCK checkpoint (bad magic)")

    try:
        offset = 4
        version = struct.unpack_from('<H', data, offset)[0]
        offset += 2
        if version != config.MTCK_VERSION:
            raise CheckpointError(f"Unsupported MTCK version {version}")

        meta_len = struct.unpack_from('<I', data, offset)[0]
        offset += 4
        metadata = json.loads(data[offset:offset + meta_len].decode('utf-8'))
        offset += meta_len

        count = struct.unpack_from('<I', data, offset)[0]
        offset += 4

        state: "OrderedDict[str, torch.Tensor]" = OrderedDict()
        for _ in range(count):
            name_len = struct.unpack_from('<H', data, offset)[0]
            offset += 2
            name = data[offset:offset + name_len].decode('utf-8')
            offset += name_len
            ndim = struct.unpack_from('<B', data, offset)[0]
            offset += 1
            shape = struct.unpack_from(f'<{ndim}I', data, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            payload = np.frombuffer(data, dtype='<f4', count=size, offset=offset)
            offset += 4 * size
            state[name] = torch.from_numpy(payload.astype(np.float32).reshape(shape))
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"Truncated or corrupt checkpoint: {e}")

    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after last record")

    return state, metadata


def save_checkpoint(path: str, state: Dict[str, torch.Tensor], metadata: Dict[str, Any]) -> None:
    payload = serialize_checkpoint(state, metadata)
    with open(path, 'wb') as f:
        f.write(payload)
    logger.info(f"Saved checkpoint {path} ({len(state)} tensors, {len(payload)} bytes)")


def load_checkpoint(path: str) -> Tuple["OrderedDict[str, torch.Tensor]", Dict[str, Any]]:
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}")
    return deserialize_checkpoint(data)
