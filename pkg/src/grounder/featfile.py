"""Binary tensor container and checkpoint persistence.

Container layout (little-endian): magic ``FIAT`` (4 bytes), format
version u16 (1 = float32 payload, 2 = float64), rank u16, one u32 per
dimension, then the row-major payload. Version 1 is the interchange
format for feature files; version 2 exists so checkpoints written in
64-bit mode round-trip losslessly.

A checkpoint directory holds ``params.bin`` (concatenated container
records), ``manifest.txt`` (plain text: parameter name and byte offset
per line), ``config.txt`` and ``vocab.txt``.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"FIAT"
VERSION_F32 = 1
VERSION_F64 = 2
_MAX_RANK = 32
_MAX_ELEMENTS = 1 << 31


class FeatureFileError(Exception):
    code = 10


class BadMagicError(FeatureFileError):
    code = 11


class TruncatedPayloadError(FeatureFileError):
    code = 12


class DimOverflowError(FeatureFileError):
    code = 13


def write_tensor(f, array: np.ndarray) -> None:
    array = np.asarray(array)
    if array.dtype == np.float64:
        version = VERSION_F64
    else:
        array = array.astype(np.float32)
        version = VERSION_F32
    if array.ndim > _MAX_RANK:
        raise DimOverflowError(f"rank {array.ndim} exceeds limit {_MAX_RANK}")
    f.write(MAGIC)
    f.write(struct.pack("<HH", version, array.ndim))
    f.write(struct.pack(f"<{array.ndim}I", *array.shape))
    f.write(np.ascontiguousarray(array).tobytes())


def read_tensor(f) -> np.ndarray:
    head = f.read(8)
    if len(head) < 8:
        raise TruncatedPayloadError("missing container header")
    if head[:4] != MAGIC:
        raise BadMagicError(f"bad magic {head[:4]!r}")
    version, rank = struct.unpack("<HH", head[4:])
    if version not in (VERSION_F32, VERSION_F64):
        raise FeatureFileError(f"unknown format version {version}")
    if rank > _MAX_RANK:
        raise DimOverflowError(f"rank {rank} exceeds limit {_MAX_RANK}")
    dim_bytes = f.read(4 * rank)
    if len(dim_bytes) < 4 * rank:
        raise TruncatedPayloadError("truncated dimension list")
    dims = struct.unpack(f"<{rank}I", dim_bytes)
    count = 1
    for d in dims:
        count *= d
    if count > _MAX_ELEMENTS:
        raise DimOverflowError(f"element count {count} exceeds limit {_MAX_ELEMENTS}")
    dtype = np.float32 if version == VERSION_F32 else np.float64
    payload = f.read(count * dtype().itemsize)
    if len(payload) < count * dtype().itemsize:
        raise TruncatedPayloadError(
            f"payload holds {len(payload)} bytes, header declares "
            f"{count * dtype().itemsize}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def save_array(path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        write_tensor(f, array)


def load_array(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_tensor(f)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(ckpt_dir, params, config_text: str, vocab_tokens) -> None:
    """Write all named parameter arrays plus manifest, config and vocab."""
    os.makedirs(ckpt_dir, exist_ok=True)
    offsets = []
    with open(os.path.join(ckpt_dir, "params.bin"), "wb") as f:
        for name, array in params.items():
            offsets.append((name, f.tell()))
            write_tensor(f, array)
    with open(os.path.join(ckpt_dir, "manifest.txt"), "w") as f:
        for name, off in offsets:
            f.write(f"{name} {off}\n")
    with open(os.path.join(ckpt_dir, "config.txt"), "w") as f:
        f.write(config_text)
    with open(os.path.join(ckpt_dir, "vocab.txt"), "w") as f:
        for tok in vocab_tokens:
            f.write(tok + "\n")


def load_checkpoint(ckpt_dir):
    """Return (params dict, config text, vocab token list)."""
    manifest = []
    with open(os.path.join(ckpt_dir, "manifest.txt")) as f:
        for line in f:
            if not line.strip():
                continue
            name, off = line.rsplit(" ", 1)
            manifest.append((name, int(off)))
    params = {}
    with open(os.path.join(ckpt_dir, "params.bin"), "rb") as f:
        for name, off in manifest:
            f.seek(off)
            params[name] = read_tensor(f)
    with open(os.path.join(ckpt_dir, "config.txt")) as f:
        config_text = f.read()
    with open(os.path.join(ckpt_dir, "vocab.txt")) as f:
        vocab = [line.rstrip("\n") for line in f if line.strip()]
    return params, config_text, vocab
