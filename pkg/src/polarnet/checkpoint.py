"""Checkpoints: a JSON config block followed by a directory of named f64 tensors.

Layout (little-endian)::

    b"CVCK" | version u32 | config_len u32 | config (UTF-8 JSON)
    count u32 | count x ( name_len u32 | name | ndim u32 | dims u32[ndim] | f64 payload )
"""
from __future__ import annotations

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CVCK"
VERSION = 1
U32 = struct.Struct("<I")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)

    @property
    def epoch(self) -> int:
        return int(self.config.get("epoch", 0))


def encode(ckpt: Checkpoint) -> bytes:
    cfg = json.dumps(ckpt.config, sort_keys=True).encode("utf-8")
    parts = [MAGIC, U32.pack(VERSION), U32.pack(len(cfg)), cfg, U32.pack(len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        parts += [U32.pack(len(raw)), raw, U32.pack(arr.ndim)]
        parts += [U32.pack(d) for d in arr.shape]
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return U32.unpack(self.take(4))[0]


def decode(buf: bytes) -> Checkpoint:
    rd = _Reader(buf)
    if buf[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    rd.take(4)
    version = rd.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config = json.loads(rd.take(rd.u32()).decode("utf-8"))
    tensors = OrderedDict()
    for _ in range(rd.u32()):
        name = rd.take(rd.u32()).decode("utf-8")
        shape = tuple(rd.u32() for _ in range(rd.u32()))
        count = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(rd.take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    if rd.pos != len(buf):
        raise CheckpointError("trailing bytes after checkpoint")
    return Checkpoint(config, tensors)


def save(path, ckpt: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(ckpt))


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode(fh.read())
