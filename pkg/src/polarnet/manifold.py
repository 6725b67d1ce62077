"""Geometry of the punctured complex plane viewed as R+ x SO(2).

Points are stored as (magnitude, phase) with the rotation R(phase) kept
implicit: the Frobenius norm of logm(R(b) R(a)^-1) equals sqrt(2)|wrap(b - a)|,
so every matrix identity reduces to scalar phase arithmetic.

All functions accept scalars or numpy arrays in the fields and broadcast.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

TWO_PI = 2.0 * np.pi
SQRT2 = np.sqrt(2.0)
DEFAULT_EPS = 1e-6


def wrap_phase(theta: ArrayLike) -> ArrayLike:
    """Map angles onto the principal branch (-pi, pi].

    Values already in range are returned unchanged bit for bit, which makes
    the map exactly idempotent.
    """
    theta = np.asarray(theta, dtype=np.float64)
    k = np.ceil((theta - np.pi) / TWO_PI)
    out = np.where(k == 0, theta, theta - TWO_PI * k)
    out = np.where(out <= -np.pi, out + TWO_PI, out)
    out = np.where(out > np.pi, out - TWO_PI, out)
    return out[()] if out.ndim == 0 else out


def _check_polar(magnitude, phase) -> None:
    if np.any(~(np.asarray(magnitude) > 0)):
        raise ValueError("magnitude must be strictly positive")
    ph = np.asarray(phase)
    if np.any(~((ph > -np.pi) & (ph <= np.pi))):
        raise ValueError("phase must lie in (-pi, pi]")


@dataclass(frozen=True)
class PolarComplex:
    """A point of R+ x SO(2); fields may be scalars or same-shape arrays."""

    magnitude: ArrayLike
    phase: ArrayLike

    def __post_init__(self):
        _check_polar(self.magnitude, self.phase)

    @property
    def logmag(self) -> ArrayLike:
        return np.log(self.magnitude)

    def __len__(self) -> int:
        return len(np.atleast_1d(self.magnitude))

    def __getitem__(self, idx) -> "PolarComplex":
        return PolarComplex(np.asarray(self.magnitude)[idx], np.asarray(self.phase)[idx])

    def to_complex(self) -> complex | np.ndarray:
        return self.magnitude * np.exp(1j * self.phase)


@dataclass(frozen=True)
class CartesianComplex:
    re: ArrayLike
    im: ArrayLike


@dataclass(frozen=True)
class GroupElement:
    """Scaling-rotation g = (scale, angle) acting by multiplication."""

    scale: ArrayLike = 1.0
    angle: ArrayLike = 0.0

    def __post_init__(self):
        if np.any(~(np.asarray(self.scale) > 0)):
            raise ValueError("scale must be strictly positive")
        object.__setattr__(self, "angle", wrap_phase(self.angle))

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(1.0, 0.0)

    def inverse(self) -> "GroupElement":
        return GroupElement(1.0 / np.asarray(self.scale), wrap_phase(-np.asarray(self.angle)))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return compose(self, other)

    def as_complex(self) -> complex | np.ndarray:
        return self.scale * np.exp(1j * self.angle)


@dataclass(frozen=True)
class TangentVector:
    """Chart coordinates (log r, theta); theta is the skew-matrix coefficient."""

    d_logr: ArrayLike
    d_theta: ArrayLike


def to_polar(z: CartesianComplex, eps: float = DEFAULT_EPS) -> PolarComplex:
    if eps <= 0:
        raise ValueError("eps must be positive")
    re = np.asarray(z.re, dtype=np.float64)
    im = np.asarray(z.im, dtype=np.float64)
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise ValueError("non-finite complex value")
    r = np.hypot(re, im)
    small = r < eps
    phase = np.where(small, 0.0, np.arctan2(im, re))
    # atan2 returns -pi for (negative, -0.0); the principal branch wants +pi
    phase = np.where(phase == -np.pi, np.pi, phase)
    mag = np.where(small, eps, r)
    if mag.ndim == 0:
        return PolarComplex(float(mag), float(phase))
    return PolarComplex(mag, phase)


def from_polar(p: PolarComplex) -> CartesianComplex:
    return CartesianComplex(p.magnitude * np.cos(p.phase), p.magnitude * np.sin(p.phase))


def from_complex(z, eps: float = DEFAULT_EPS) -> PolarComplex:
    z = np.asarray(z, dtype=np.complex128)
    return to_polar(CartesianComplex(z.real, z.imag), eps)


def distance(a: PolarComplex, b: PolarComplex) -> ArrayLike:
    dl = np.log(np.asarray(b.magnitude) / np.asarray(a.magnitude))
    dth = wrap_phase(np.asarray(b.phase) - np.asarray(a.phase))
    return np.sqrt(dl * dl + 2.0 * dth * dth)


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    return GroupElement(np.asarray(g.scale) * h.scale, wrap_phase(np.asarray(g.angle) + h.angle))


def act(g: GroupElement, p: PolarComplex) -> PolarComplex:
    return PolarComplex(
        np.asarray(g.scale) * p.magnitude,
        wrap_phase(np.asarray(g.angle) + p.phase),
    )


def transporter(a: PolarComplex, b: PolarComplex) -> GroupElement:
    """The group element carrying ``a`` onto ``b``."""
    return GroupElement(
        np.asarray(b.magnitude) / a.magnitude,
        wrap_phase(np.asarray(b.phase) - a.phase),
    )


def log_map(p: PolarComplex) -> TangentVector:
    return TangentVector(np.log(p.magnitude), p.phase)


def exp_map(v: TangentVector) -> PolarComplex:
    return PolarComplex(np.exp(v.d_logr), wrap_phase(v.d_theta))


def geodesic_interpolate(a: PolarComplex, b: PolarComplex, t: ArrayLike) -> PolarComplex:
    """Point at fraction ``t`` along the shortest geodesic from a to b.

    Exact antipodes (phase gap of pi) go the positive way round.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    la, lb = np.log(a.magnitude), np.log(b.magnitude)
    mag = np.exp((1.0 - t) * la + t * lb)
    phase = wrap_phase(a.phase + t * wrap_phase(np.asarray(b.phase) - a.phase))
    mag = np.where(t == 0, a.magnitude, np.where(t == 1, b.magnitude, mag))
    phase = np.where(t == 0, a.phase, np.where(t == 1, b.phase, phase))
    if mag.ndim == 0:
        return PolarComplex(float(mag), float(phase))
    return PolarComplex(mag, phase)


def random_points(rng: np.random.Generator, size, log_scale: float = 1.0) -> PolarComplex:
    """Log-normal magnitudes, uniform principal phases."""
    mag = np.exp(rng.normal(0.0, log_scale, size))
    phase = wrap_phase(rng.uniform(-np.pi, np.pi, size))
    return PolarComplex(mag, phase)


def random_group(rng: np.random.Generator, size=None, log_scale: float = 1.0) -> GroupElement:
    return GroupElement(np.exp(rng.normal(0.0, log_scale, size)), rng.uniform(-np.pi, np.pi, size))
