from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from ..manifold import GroupElement, act, from_complex
from .dataset import Dataset


def draw_groups(n: int, seed: int, scale_range=(0.5, 2.0), angle_range=(-np.pi, np.pi)) -> list[GroupElement]:
    """One scaling-rotation per sample: log-uniform scale, uniform angle."""
    lo, hi = scale_range
    if not 0 < lo <= hi:
        raise ValueError(f"invalid scale range {scale_range}")
    a_lo, a_hi = angle_range
    if a_lo > a_hi:
        raise ValueError(f"invalid angle range {angle_range}")
    rng = np.random.default_rng(seed)
    scales = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    angles = rng.uniform(a_lo, a_hi, n)
    return [GroupElement(float(s), float(a)) for s, a in zip(scales, angles)]


def augment_scale(data: Dataset, seed: int, scale_range=(0.5, 2.0),
                  angle_range=(-np.pi, np.pi)) -> tuple[Dataset, list[GroupElement]]:
    """Act on every element of each sample with its own random g.

    Returns the transformed dataset and the drawn group elements.
    """
    groups = draw_groups(len(data), seed, scale_range, angle_range)
    out = np.empty_like(data.samples)
    for i, g in enumerate(groups):
        out[i] = act(g, from_complex(data.samples[i])).to_complex()
    return Dataset(out, data.labels.copy(), data.classes), groups


def write_group_log(path, groups: Sequence[GroupElement]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, g in enumerate(groups):
            fh.write(json.dumps({"sample": i, "scale": float(g.scale), "angle": float(g.angle)}) + "\n")


def read_group_log(path) -> list[GroupElement]:
    with open(path, encoding="utf-8") as fh:
        return [GroupElement(rec["scale"], rec["angle"]) for rec in map(json.loads, fh) if rec]
