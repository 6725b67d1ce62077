"""Seeded synthetic datasets: digitally modulated baseband signals and blob images."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset

MODULATIONS = ("BPSK", "QPSK", "PSK8", "PAM4")
SAMPLES_PER_SYMBOL = 4
ROLLOFF = 0.35
SPAN_SYMBOLS = 8


def constellation(name: str) -> np.ndarray:
    if name == "BPSK":
        return np.array([1.0, -1.0], dtype=np.complex128)
    if name == "QPSK":
        return np.exp(1j * (np.pi / 4 + np.arange(4) * np.pi / 2))
    if name == "PSK8":
        return np.exp(1j * np.arange(8) * np.pi / 4)
    if name == "PAM4":
        return np.array([-3.0, -1.0, 1.0, 3.0], dtype=np.complex128) / np.sqrt(5.0)
    raise ValueError(f"unknown modulation {name!r}; expected one of {MODULATIONS}")


def raised_cosine(beta: float = ROLLOFF, span: int = SPAN_SYMBOLS, sps: int = SAMPLES_PER_SYMBOL) -> np.ndarray:
    """Raised-cosine taps over ``span`` symbols, peak 1 at the centre tap."""
    t = np.arange(-span * sps // 2, span * sps // 2 + 1) / sps
    denom = 1.0 - (2.0 * beta * t) ** 2
    singular = np.isclose(denom, 0.0)
    safe = np.where(singular, 1.0, denom)
    taps = np.sinc(t) * np.cos(np.pi * beta * t) / safe
    # limit at t = +-1/(2 beta)
    return np.where(singular, np.pi / 4 * np.sinc(1.0 / (2.0 * beta)), taps)


@dataclass
class ModulationSpec:
    classes: tuple = MODULATIONS
    per_class: int = 500
    length: int = 128
    snr_db: float = 10.0
    seed: int = 0
    noise: bool = True

    def __post_init__(self):
        self.classes = tuple(self.classes)
        if not self.classes:
            raise ValueError("at least one modulation class is required")
        for name in self.classes:
            constellation(name)
        if self.length < 16:
            raise ValueError("signal length must be at least 16")
        if self.per_class < 0:
            raise ValueError("per_class must be nonnegative")
        if self.noise and not np.isfinite(self.snr_db):
            raise ValueError("SNR must be finite when noise is enabled")


def shaped_signal(symbols: np.ndarray, length: int, taps: np.ndarray) -> np.ndarray:
    """Pulse-shape ``symbols`` and return ``length`` samples past the filter transient.

    Symbol centres land on indices that are multiples of the upsampling factor.
    """
    sps = SAMPLES_PER_SYMBOL
    up = np.zeros(len(symbols) * sps, dtype=np.complex128)
    up[::sps] = symbols
    delay = len(taps) // 2
    full = np.convolve(up, taps)[delay:delay + len(up)]
    skip = (SPAN_SYMBOLS // 2) * sps
    return full[skip:skip + length]


def gen_modulation(spec: ModulationSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    taps = raised_cosine()
    n_symbols = -(-spec.length // SAMPLES_PER_SYMBOL) + SPAN_SYMBOLS + 1
    n = spec.per_class * len(spec.classes)
    samples = np.empty((n, 1, 1, spec.length), dtype=np.complex128)
    labels = np.repeat(np.arange(len(spec.classes)), spec.per_class)
    noise_power = 10.0 ** (-spec.snr_db / 10.0) if spec.noise else 0.0
    i = 0
    for name in spec.classes:
        points = constellation(name)
        for _ in range(spec.per_class):
            x = shaped_signal(points[rng.integers(len(points), size=n_symbols)], spec.length, taps)
            x = x / np.sqrt(np.mean(np.abs(x) ** 2))
            if spec.noise:
                w = rng.normal(size=(2, spec.length)) * np.sqrt(noise_power / 2.0)
                x = x + w[0] + 1j * w[1]
            samples[i, 0, 0] = x
            i += 1
    return Dataset(samples, labels, len(spec.classes))


@dataclass
class BlobSpec:
    classes: int = 4
    per_class: int = 100
    size: tuple = (16, 16)
    noise: float = 0.1
    seed: int = 0
    blobs: int = 3
    layout_seed: int = field(default=2020, repr=False)

    def __post_init__(self):
        self.size = tuple(int(s) for s in self.size)
        if self.size[0] < 16 or self.size[1] < 16:
            raise ValueError("blob images must be at least 16x16")
        if self.classes < 1 or self.per_class < 0:
            raise ValueError("need classes >= 1 and per_class >= 0")


def blob_template(label: int, size: tuple, blobs: int = 3, layout_seed: int = 2020) -> np.ndarray:
    """Fixed per-class image: Gaussian blobs under a class-specific phase ramp."""
    rng = np.random.default_rng([layout_seed, label])
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    amp = np.zeros(size)
    for _ in range(blobs):
        cy, cx = rng.uniform(0.2, 0.8) * h, rng.uniform(0.2, 0.8) * w
        sigma = rng.uniform(0.08, 0.18) * min(h, w)
        amp += rng.uniform(0.5, 1.5) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
    ky, kx = rng.uniform(-np.pi / 4, np.pi / 4, size=2)
    return (amp + 0.05) * np.exp(1j * (ky * yy + kx * xx))


def gen_blobs(spec: BlobSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    h, w = spec.size
    n = spec.classes * spec.per_class
    samples = np.empty((n, 1, h, w), dtype=np.complex128)
    labels = np.repeat(np.arange(spec.classes), spec.per_class)
    for i, label in enumerate(labels):
        img = blob_template(int(label), spec.size, spec.blobs, spec.layout_seed)
        if spec.noise > 0:
            img = img + spec.noise * (rng.normal(size=spec.size) + 1j * rng.normal(size=spec.size)) / np.sqrt(2.0)
        samples[i, 0] = img
    return Dataset(samples, labels, spec.classes)
