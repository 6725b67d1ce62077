"""Layers acting on complex-valued feature maps in (log r, theta) form."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.params import ParamStore
from ..autodiff.tape import Var, as_var
from ..manifold import DEFAULT_EPS, GroupElement, PolarComplex, wrap_phase
from .tensor_ring import TensorRing

ParamLike = Union[Var, np.ndarray]


@dataclass
class ComplexTensor:
    """Batched complex feature map, shape (B, C, H, W).

    Stored as log-magnitude and principal phase so that the group action is
    a translation of the first field and a wrapped shift of the second.
    """

    logmag: Var
    phase: Var

    def __post_init__(self):
        self.logmag = as_var(self.logmag)
        self.phase = as_var(self.phase)
        if self.logmag.shape != self.phase.shape:
            raise ValueError(f"field shapes differ: {self.logmag.shape} vs {self.phase.shape}")

    @classmethod
    def from_polar(cls, magnitude, phase) -> "ComplexTensor":
        magnitude = np.asarray(magnitude, dtype=np.float64)
        if np.any(magnitude <= 0):
            raise ValueError("magnitude must be strictly positive")
        return cls(Var(np.log(magnitude)), Var(wrap_phase(phase)))

    @classmethod
    def from_complex(cls, z, eps: float = DEFAULT_EPS) -> "ComplexTensor":
        z = np.asarray(z, dtype=np.complex128)
        if not np.all(np.isfinite(z)):
            raise ValueError("non-finite complex value")
        r = np.abs(z)
        small = r < eps
        phase = np.where(small, 0.0, np.angle(z))
        phase = np.where(phase == -np.pi, np.pi, phase)
        return cls(Var(np.log(np.where(small, eps, r))), Var(phase))

    @property
    def shape(self) -> tuple:
        return self.logmag.shape

    @property
    def channels(self) -> int:
        return self.shape[-3]

    @property
    def magnitude(self) -> np.ndarray:
        return np.exp(self.logmag.value)

    def to_polar(self) -> PolarComplex:
        return PolarComplex(self.magnitude, self.phase.value)

    def to_complex(self) -> np.ndarray:
        return self.magnitude * np.exp(1j * self.phase.value)

    def detach(self) -> "ComplexTensor":
        return ComplexTensor(Var(self.logmag.value.copy()), Var(self.phase.value.copy()))

    def act(self, g: GroupElement) -> "ComplexTensor":
        """Apply g to every element; ``g`` fields may broadcast over the batch."""
        scale = np.asarray(g.scale, dtype=np.float64)
        angle = np.asarray(g.angle, dtype=np.float64)
        if scale.ndim == 1 and self.logmag.ndim == 4:
            scale = scale[:, None, None, None]
            angle = angle[:, None, None, None]
        return ComplexTensor(
            Var(self.logmag.value + np.log(scale)),
            Var(wrap_phase(self.phase.value + angle)),
        )


def _batched(x: ComplexTensor) -> tuple[ComplexTensor, bool]:
    if x.logmag.ndim == 4:
        return x, False
    if x.logmag.ndim == 3:
        return ComplexTensor(ops.reshape(x.logmag, (1,) + x.shape), ops.reshape(x.phase, (1,) + x.shape)), True
    raise ValueError(f"expected (C, H, W) or (B, C, H, W), got {x.shape}")


def _unbatched(x: ComplexTensor, squeeze: bool) -> ComplexTensor:
    if not squeeze:
        return x
    return ComplexTensor(ops.reshape(x.logmag, x.shape[1:]), ops.reshape(x.phase, x.shape[1:]))


def _pair(v) -> tuple[int, int]:
    return (v, v) if isinstance(v, (int, np.integer)) else (int(v[0]), int(v[1]))


def conv_output_size(size: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def convex_weights(logits) -> Var:
    """Softmax per row: strictly positive weights that sum to one."""
    return ops.softmax(logits, axis=-1)


def wfm_combine(logmag: Var, phase: Var, weights) -> tuple[Var, Var]:
    """Weighted Frechet means of windows.

    logmag, phase: (B, K, N) with K points per window; weights: (O, K).
    Returns a pair of (B, O, N) fields.
    """
    weights = as_var(weights)
    total = ops.sum(weights, axis=1, keepdims=True)
    out_l = ops.div(ops.matmul(weights, logmag), total)
    out_t = ops.wfm_phase(phase, weights)
    return out_l, out_t


# ---------------------------------------------------------------- wFM convolution

@dataclass
class WfmConvSpec:
    in_channels: int
    out_channels: int
    kernel: tuple = (5, 5)
    stride: tuple = (1, 1)
    logits: Optional[ParamLike] = None

    def __post_init__(self):
        self.kernel = _pair(self.kernel)
        self.stride = _pair(self.stride)
        k = self.in_channels * self.kernel[0] * self.kernel[1]
        if self.logits is None:
            self.logits = np.zeros((self.out_channels, k))
        if tuple(np.shape(as_var(self.logits).value)) != (self.out_channels, k):
            raise ValueError(f"logits must have shape {(self.out_channels, k)}")

    def output_shape(self, in_shape: Sequence[int]) -> tuple[int, int, int]:
        c, h, w = in_shape[-3:]
        return (
            self.out_channels,
            conv_output_size(h, self.kernel[0], self.stride[0]),
            conv_output_size(w, self.kernel[1], self.stride[1]),
        )

    @property
    def weights(self) -> np.ndarray:
        return convex_weights(self.logits).value


def wfm_conv(x: ComplexTensor, spec: WfmConvSpec, logits: Optional[Var] = None) -> ComplexTensor:
    x, squeeze = _batched(x)
    B, C, H, W = x.shape
    kh, kw = spec.kernel
    if C != spec.in_channels or kh > H or kw > W:
        raise ValueError(
            f"wfm_conv input shape {(C, H, W)} incompatible with "
            f"spec (in_channels={spec.in_channels}, kernel={spec.kernel})"
        )
    _, Ho, Wo = spec.output_shape((C, H, W))
    weights = convex_weights(spec.logits if logits is None else logits)
    lp = ops.unfold(x.logmag, spec.kernel, spec.stride)
    tp = ops.unfold(x.phase, spec.kernel, spec.stride)
    out_l, out_t = wfm_combine(lp, tp, weights)
    shape = (B, spec.out_channels, Ho, Wo)
    return _unbatched(ComplexTensor(ops.reshape(out_l, shape), ops.reshape(out_t, shape)), squeeze)


# ---------------------------------------------------------------- activations

def trelu(x: ComplexTensor) -> ComplexTensor:
    """ReLU in the tangent space: (r, theta) -> (max(r, 1), max(theta, 0))."""
    return ComplexTensor(ops.maximum(x.logmag, 0.0), ops.maximum(x.phase, 0.0))


# One (magnitude, phase) -> (magnitude, phase) case per region cut out by r = 1 and theta = 0.
TRELU_QUADRANT_EXAMPLES = (
    ((2.0, 0.5), (2.0, 0.5)),
    ((0.5, 0.5), (1.0, 0.5)),
    ((0.5, -0.5), (1.0, 0.0)),
    ((2.0, -0.5), (2.0, 0.0)),
)


@dataclass
class GTransportSpec:
    """Per-channel group elements as unconstrained (log_scale, angle) rows."""

    channels: int
    params: Optional[ParamLike] = None

    def __post_init__(self):
        if self.params is None:
            self.params = np.zeros((self.channels, 2))
        if tuple(np.shape(as_var(self.params).value)) != (self.channels, 2):
            raise ValueError(f"G-transport parameters must have shape {(self.channels, 2)}")

    @classmethod
    def from_groups(cls, groups: Sequence[GroupElement]) -> "GTransportSpec":
        rows = [(np.log(g.scale), g.angle) for g in groups]
        return cls(len(rows), np.array(rows, dtype=np.float64))

    def group(self, c: int) -> GroupElement:
        ls, ang = as_var(self.params).value[c]
        return GroupElement(float(np.exp(ls)), float(ang))


def g_transport(x: ComplexTensor, spec: GTransportSpec) -> ComplexTensor:
    x, squeeze = _batched(x)
    if x.channels != spec.channels:
        raise ValueError(f"g_transport expects {spec.channels} channels, got input shape {x.shape[1:]}")
    p = as_var(spec.params)
    log_scale = ops.reshape(ops.getitem(p, (slice(None), 0)), (1, spec.channels, 1, 1))
    angle = ops.reshape(ops.getitem(p, (slice(None), 1)), (1, spec.channels, 1, 1))
    out = ComplexTensor(ops.add(x.logmag, log_scale), ops.wrap(ops.add(x.phase, angle)))
    return _unbatched(out, squeeze)


# ---------------------------------------------------------------- distance transform

def distance_transform(x: ComplexTensor, weights) -> Var:
    """Distances from every element to weighted Frechet means of the map.

    ``weights`` holds one nonnegative row of length C*H*W per weight set;
    results for the sets are stacked along the channel axis.
    """
    x, squeeze = _batched(x)
    B, C, H, W = x.shape
    K = C * H * W
    weights = as_var(weights)
    if weights.ndim == 1:
        weights = ops.reshape(weights, (1, -1))
    sets = weights.shape[0]
    if weights.shape[1] != K:
        raise ValueError(f"weight sets have length {weights.shape[1]}, input has {K} elements")
    lf = ops.reshape(x.logmag, (B, K, 1))
    tf = ops.reshape(x.phase, (B, K, 1))
    m_l, m_t = wfm_combine(lf, tf, weights)  # (B, sets, 1)
    dl = ops.sub(ops.reshape(x.logmag, (B, 1, K)), m_l)
    dth = ops.wrap(ops.sub(ops.reshape(x.phase, (B, 1, K)), m_t))
    u = ops.reshape(ops.manifold_distance(dl, dth), (B, sets * C, H, W))
    return ops.reshape(u, u.shape[1:]) if squeeze else u


# ---------------------------------------------------------------- residual combination

def concat_channels(parts: Sequence[ComplexTensor]) -> ComplexTensor:
    return ComplexTensor(
        ops.concat([p.logmag for p in parts], axis=1),
        ops.concat([p.phase for p in parts], axis=1),
    )


def residual_combine(f1: ComplexTensor, f2: ComplexTensor, align: WfmConvSpec, logits: Optional[Var] = None) -> ComplexTensor:
    """Align f2 onto f1's grid with a wFM convolution, then concatenate
    channels (f1 first)."""
    f1, sq1 = _batched(f1)
    f2, _ = _batched(f2)
    aligned = wfm_conv(f2, align, logits)
    if aligned.shape[0] != f1.shape[0] or aligned.shape[2:] != f1.shape[2:]:
        raise ValueError(f"aligned branch has shape {aligned.shape[1:]}, expected spatial {f1.shape[2:]}")
    return _unbatched(concat_channels([f1, aligned]), sq1)


# ---------------------------------------------------------------- layer objects

class Layer:
    """Base for parameterised layers registered in a :class:`ParamStore`."""

    kind = "layer"
    complex_in = False
    complex_out = False

    def __init__(self, name: str):
        self.name = name

    def output_shape(self, in_shape):
        return tuple(in_shape)

    def __call__(self, x, training: bool = False):
        raise NotImplementedError


class WfmConv(Layer):
    kind = "wfm_conv"
    complex_in = complex_out = True

    def __init__(self, store: ParamStore, name: str, in_channels: int, out_channels: int,
                 kernel=(5, 5), stride=(1, 1), tr_rank: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None):
        super().__init__(name)
        self.spec = WfmConvSpec(in_channels, out_channels, kernel, stride)
        kh, kw = self.spec.kernel
        self.tr: Optional[TensorRing] = None
        if tr_rank:
            self.tr = TensorRing.create(store, f"{name}.tr", (out_channels, in_channels, kh, kw), tr_rank, rng)
        else:
            self.spec.logits = store.add(f"{name}.logits", np.zeros((out_channels, in_channels * kh * kw)))

    def logits(self) -> Var:
        if self.tr is None:
            return self.spec.logits
        return ops.reshape(self.tr.reconstruct(), (self.spec.out_channels, -1))

    def output_shape(self, in_shape):
        return self.spec.output_shape(in_shape)

    def __call__(self, x: ComplexTensor, training: bool = False) -> ComplexTensor:
        return wfm_conv(x, self.spec, self.logits())


class GTransport(Layer):
    kind = "g_transport"
    complex_in = complex_out = True

    def __init__(self, store: ParamStore, name: str, channels: int):
        super().__init__(name)
        self.spec = GTransportSpec(channels, store.add(f"{name}.g", np.zeros((channels, 2))))

    def __call__(self, x: ComplexTensor, training: bool = False) -> ComplexTensor:
        return g_transport(x, self.spec)


class TReLU(Layer):
    kind = "trelu"
    complex_in = complex_out = True

    def __call__(self, x: ComplexTensor, training: bool = False) -> ComplexTensor:
        return trelu(x)


class DistanceTransform(Layer):
    kind = "distance_transform"
    complex_in = True

    def __init__(self, store: ParamStore, name: str, in_shape, sets: int = 1):
        super().__init__(name)
        c, h, w = in_shape[-3:]
        self.in_shape = (c, h, w)
        self.sets = sets
        self.logits = store.add(f"{name}.logits", np.zeros((sets, c * h * w)))

    def output_shape(self, in_shape):
        c, h, w = in_shape[-3:]
        return (self.sets * c, h, w)

    def __call__(self, x: ComplexTensor, training: bool = False) -> Var:
        if tuple(x.shape[-3:]) != self.in_shape:
            raise ValueError(f"{self.name}: expected input {self.in_shape}, got {x.shape[-3:]}")
        return distance_transform(x, convex_weights(self.logits))


class WfmResidual(Layer):
    """Skip connection: wFM-align the earlier map, concatenate channels."""

    kind = "wfm_residual"
    complex_in = complex_out = True

    def __init__(self, store: ParamStore, name: str, skip_channels: int, out_channels: int,
                 kernel=(5, 5), stride=(2, 2)):
        super().__init__(name)
        self.align = WfmConv(store, f"{name}.align", skip_channels, out_channels, kernel, stride)

    def output_shape(self, in_shape, skip_shape=None):
        return (in_shape[-3] + self.align.spec.out_channels,) + tuple(in_shape[-2:])

    def __call__(self, f1: ComplexTensor, f2: ComplexTensor, training: bool = False) -> ComplexTensor:
        return residual_combine(f1, f2, self.align.spec, self.align.logits())


class ChartFlatten(Layer):
    """Complex (B, C, H, W) -> real (B, 2*C*H*W): log-magnitudes then phases."""

    kind = "chart_flatten"
    complex_in = True

    def output_shape(self, in_shape):
        return (2 * int(np.prod(in_shape[-3:])),)

    def __call__(self, x: ComplexTensor, training: bool = False) -> Var:
        B = x.shape[0]
        return ops.concat([ops.reshape(x.logmag, (B, -1)), ops.reshape(x.phase, (B, -1))], axis=1)


class Cartesian(Layer):
    """Complex (B, C, H, W) -> real (B, 2C, H, W) as (re..., im...) channels."""

    kind = "cartesian"
    complex_in = True

    def output_shape(self, in_shape):
        return (2 * in_shape[-3],) + tuple(in_shape[-2:])

    def __call__(self, x: ComplexTensor, training: bool = False) -> Var:
        r = ops.exp(x.logmag)
        return ops.concat([ops.mul(r, ops.cos(x.phase)), ops.mul(r, ops.sin(x.phase))], axis=1)
