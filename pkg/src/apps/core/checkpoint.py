"""
DLKT checkpoint codec.

Layout (little endian): magic ``DLKT``, version u32, entry count u32; then per entry
name length u16, UTF-8 name, rank u8, rank dims u32, raw f32 data.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from .exceptions import DatasetIOError, StateError
from .layers import Array

logger = logging.getLogger(__name__)

MAGIC = b"DLKT"
VERSION = 1


def encode_checkpoint(tensors: dict[str, Array]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name in sorted(tensors):
        value = np.asarray(tensors[name])
        encoded_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(value.astype("<f4").tobytes())
    return b"".join(chunks)


def decode_checkpoint(payload: bytes) -> dict[str, Array]:
    if payload[:4] != MAGIC:
        raise StateError("Not a DLKT checkpoint (bad magic)")
    if len(payload) < 12:
        raise StateError(f"Truncated checkpoint header ({len(payload)} bytes)")
    version, count = struct.unpack_from("<II", payload, 4)
    if version != VERSION:
        raise StateError(f"Unsupported checkpoint version {version}")
    offset = 12
    tensors = {}
    try:
        for _ in range(count):
            (name_length,) = struct.unpack_from("<H", payload, offset)
            offset += 2
            name = payload[offset : offset + name_length].decode("utf-8")
            offset += name_length
            (rank,) = struct.unpack_from("<B", payload, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", payload, offset)
            offset += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(payload, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            tensors[name] = data.astype(np.float64).reshape(dims)
    except (struct.error, ValueError) as exc:
        raise StateError(f"Truncated checkpoint: {exc}") from exc
    if offset != len(payload):
        raise StateError(f"Checkpoint has {len(payload) - offset} trailing bytes")
    return tensors


def save_checkpoint(path: Path | str, tensors: dict[str, Array]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(tensors))
    except OSError as exc:
        raise DatasetIOError(f"Cannot write checkpoint {path}: {exc}") from exc
    logger.info(f"Checkpoint written to {path} ({len(tensors)} entries)")
    return path


def load_checkpoint(path: Path | str | None) -> dict[str, Array]:
    if path is None:
        raise StateError("No checkpoint given")
    path = Path(path)
    if not path.is_file():
        raise StateError(f"Checkpoint not found: {path}")
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise DatasetIOError(f"Cannot read checkpoint {path}: {exc}") from exc
    return decode_checkpoint(payload)
