"""CVDS: little-endian binary container for labelled complex samples.

Layout::

    b"CVDS" | n u32 | c u32 | h u32 | w u32
    n x ( label u32 | c*h*w x (re f32, im f32) )
    classes u32

Total length is 24 + n * (4 + 8*c*h*w) bytes.
"""
from __future__ import annotations

import struct

import numpy as np

from .dataset import Dataset

MAGIC = b"CVDS"
HEADER = struct.Struct("<4s4I")
TRAILER = struct.Struct("<I")


class CvdsError(ValueError):
    pass


def expected_length(n: int, c: int, h: int, w: int) -> int:
    return HEADER.size + n * (4 + 8 * c * h * w) + TRAILER.size


def encode(data: Dataset) -> bytes:
    n = len(data)
    c, h, w = data.samples.shape[1:]
    record = np.dtype([("label", "<u4"), ("payload", "<f4", (c * h * w, 2))])
    body = np.empty(n, dtype=record)
    body["label"] = data.labels
    flat = data.samples.reshape(n, c * h * w)
    body["payload"][..., 0] = flat.real
    body["payload"][..., 1] = flat.imag
    return HEADER.pack(MAGIC, n, c, h, w) + body.tobytes() + TRAILER.pack(data.classes)


def decode(buf: bytes) -> Dataset:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise CvdsError("not a CVDS file")
    if len(buf) < HEADER.size + TRAILER.size:
        raise CvdsError("truncated dataset")
    _, n, c, h, w = HEADER.unpack_from(buf)
    if len(buf) != expected_length(n, c, h, w):
        raise CvdsError(f"file is {len(buf)} bytes, header implies {expected_length(n, c, h, w)}")
    record = np.dtype([("label", "<u4"), ("payload", "<f4", (c * h * w, 2))])
    body = np.frombuffer(buf, dtype=record, count=n, offset=HEADER.size)
    (classes,) = TRAILER.unpack_from(buf, len(buf) - TRAILER.size)
    pairs = body["payload"].astype(np.float64)
    samples = (pairs[..., 0] + 1j * pairs[..., 1]).reshape(n, c, h, w)
    labels = body["label"].astype(np.int64)
    if n and labels.max() >= classes:
        raise CvdsError(f"label {labels.max()} out of range for {classes} classes")
    return Dataset(samples, labels, classes)


def write_cvds(path, data: Dataset) -> int:
    buf = encode(data)
    with open(path, "wb") as fh:
        fh.write(buf)
    return len(buf)


def read_cvds(path) -> Dataset:
    with open(path, "rb") as fh:
        return decode(fh.read())
