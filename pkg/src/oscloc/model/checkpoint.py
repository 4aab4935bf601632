"""Binary model checkpoints.

Layout, all integers little-endian uint32:

    magic "OSCM" | version | config JSON length | config JSON (utf-8)
    | tensor count | per tensor: name length, name (utf-8), ndim,
    dims..., float64 data (little-endian, row-major)

Tensors are written in sorted name order, so identical parameters always
produce identical bytes and a save/load round trip is exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .network import ModelConfig

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"OSCM"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _pack_u32(*values) -> bytes:
    return struct.pack("<" + "I" * len(values), *values)


def save_checkpoint(path, config: ModelConfig, params: dict[str, np.ndarray],
                    extra: dict | None = None) -> None:
    """Write config, free-form metadata, and all parameter tensors."""
    header = json.dumps(
        {"model": asdict(config), "extra": extra or {}},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_pack_u32(VERSION, len(header)))
        fh.write(header)
        fh.write(_pack_u32(len(params)))
        for name in sorted(params):
            tensor = np.ascontiguousarray(params[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(_pack_u32(len(encoded)))
            fh.write(encoded)
            fh.write(_pack_u32(tensor.ndim, *tensor.shape))
            fh.write(tensor.tobytes())


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint {self.path}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path):
    """Read a checkpoint back as (config, params, extra)."""
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path} is not a model checkpoint")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(reader.take(reader.u32()).decode("utf-8"))
        config = ModelConfig(**header["model"])
        extra = header.get("extra", {})
    except CheckpointError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"bad checkpoint header in {path}: {exc}") from None

    params: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(8 * count)
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if reader.pos != len(reader.data):
        raise CheckpointError(f"trailing bytes in checkpoint {path}")
    return config, params, extra
