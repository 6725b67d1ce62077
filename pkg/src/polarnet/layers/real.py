"""Real-valued layers for the classifier tail and the two-channel baseline."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.params import ParamStore
from ..autodiff.tape import Var
from .complex import Layer, _pair, conv_output_size
from .tensor_ring import TensorRing


def real_conv(x: Var, weight: Var, bias: Optional[Var], stride=(1, 1), padding=(0, 0)) -> Var:
    """Cross-correlation of (B, C, H, W) with (O, C, kh, kw), zero padding."""
    B, C, H, W = x.shape
    O, Cw, kh, kw = weight.shape
    if C != Cw:
        raise ValueError(f"conv expects {Cw} input channels, got input shape {x.shape[1:]}")
    ph, pw = _pair(padding)
    sh, sw = _pair(stride)
    if ph or pw:
        x = ops.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    Ho = conv_output_size(H, kh, sh, ph)
    Wo = conv_output_size(W, kw, sw, pw)
    cols = ops.unfold(x, (kh, kw), (sh, sw))
    out = ops.matmul(ops.reshape(weight, (O, C * kh * kw)), cols)
    if bias is not None:
        out = ops.add(out, ops.reshape(bias, (1, O, 1)))
    return ops.reshape(out, (B, O, Ho, Wo))


def max_pool(x: Var, kernel=(2, 2), stride=None) -> Var:
    B, C, H, W = x.shape
    kh, kw = _pair(kernel)
    sh, sw = _pair(kernel if stride is None else stride)
    Ho, Wo = conv_output_size(H, kh, sh), conv_output_size(W, kw, sw)
    cols = ops.unfold(ops.reshape(x, (B * C, 1, H, W)), (kh, kw), (sh, sw))
    return ops.reshape(ops.max_reduce(cols, axis=1), (B, C, Ho, Wo))


def fully_connected(x: Var, weight: Var, bias: Optional[Var]) -> Var:
    out = ops.matmul(x, ops.transpose(weight))
    return out if bias is None else ops.add(out, bias)


def softmax_cross_entropy(logits: Var, labels) -> Var:
    return ops.softmax_cross_entropy(logits, labels)


def _fan_in_uniform(rng: np.random.Generator, shape, fan_in: int, gain: float = np.sqrt(6.0)):
    bound = gain / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class Conv2d(Layer):
    kind = "conv"

    def __init__(self, store: ParamStore, name: str, in_channels: int, out_channels: int,
                 kernel=(5, 5), stride=(1, 1), padding=(0, 0), bias: bool = True,
                 tr_rank: Optional[int] = None, rng: Optional[np.random.Generator] = None):
        super().__init__(name)
        rng = np.random.default_rng(0) if rng is None else rng
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel, self.stride, self.padding = _pair(kernel), _pair(stride), _pair(padding)
        kh, kw = self.kernel
        fan_in = in_channels * kh * kw
        self.tr: Optional[TensorRing] = None
        if tr_rank:
            self.tr = TensorRing.create(store, f"{name}.tr", (out_channels, in_channels, kh, kw), tr_rank, rng)
            self.weight = None
        else:
            self.weight = store.add(f"{name}.weight", _fan_in_uniform(rng, (out_channels, in_channels, kh, kw), fan_in))
        self.bias = store.add(f"{name}.bias", _fan_in_uniform(rng, (out_channels,), fan_in, 1.0)) if bias else None

    def output_shape(self, in_shape):
        c, h, w = in_shape[-3:]
        return (
            self.out_channels,
            conv_output_size(h, self.kernel[0], self.stride[0], self.padding[0]),
            conv_output_size(w, self.kernel[1], self.stride[1], self.padding[1]),
        )

    def __call__(self, x: Var, training: bool = False) -> Var:
        weight = self.weight if self.tr is None else self.tr.reconstruct()
        return real_conv(x, weight, self.bias, self.stride, self.padding)


class BatchNorm2d(Layer):
    """Batch statistics while training, running statistics at eval time.

    running <- momentum * running + (1 - momentum) * batch.
    """

    kind = "batch_norm"

    def __init__(self, store: ParamStore, name: str, channels: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__(name)
        self.gamma = store.add(f"{name}.gamma", np.ones(channels))
        self.beta = store.add(f"{name}.beta", np.zeros(channels))
        self.running_mean = store.add_buffer(f"{name}.running_mean", np.zeros(channels))
        self.running_var = store.add_buffer(f"{name}.running_var", np.ones(channels))
        self.channels, self.momentum, self.eps = channels, momentum, eps

    def __call__(self, x: Var, training: bool = False) -> Var:
        shape = (1, self.channels, 1, 1)
        if training:
            mu = ops.mean(x, axis=(0, 2, 3), keepdims=True)
            xc = ops.sub(x, mu)
            var = ops.mean(ops.square(xc), axis=(0, 2, 3), keepdims=True)
            n = x.value.size // self.channels
            m = self.momentum
            self.running_mean[...] = m * self.running_mean + (1 - m) * mu.value.ravel()
            unbiased = var.value.ravel() * (n / max(n - 1, 1))
            self.running_var[...] = m * self.running_var + (1 - m) * unbiased
            xhat = ops.div(xc, ops.sqrt(ops.add(var, self.eps)))
        else:
            mu = self.running_mean.reshape(shape)
            sd = np.sqrt(self.running_var.reshape(shape) + self.eps)
            xhat = ops.div(ops.sub(x, mu), sd)
        return ops.add(ops.mul(xhat, ops.reshape(self.gamma, shape)), ops.reshape(self.beta, shape))


class ReLU(Layer):
    kind = "relu"

    def __call__(self, x: Var, training: bool = False) -> Var:
        return ops.relu(x)


class MaxPool2d(Layer):
    kind = "max_pool"

    def __init__(self, name: str, kernel=(2, 2), stride=None):
        super().__init__(name)
        self.kernel = _pair(kernel)
        self.stride = self.kernel if stride is None else _pair(stride)

    def output_shape(self, in_shape):
        c, h, w = in_shape[-3:]
        return (c, conv_output_size(h, self.kernel[0], self.stride[0]),
                conv_output_size(w, self.kernel[1], self.stride[1]))

    def __call__(self, x: Var, training: bool = False) -> Var:
        return max_pool(x, self.kernel, self.stride)


class GlobalAvgPool(Layer):
    """Average over all spatial positions, leaving (N, C)."""

    kind = "global_avg_pool"

    def output_shape(self, in_shape):
        return (in_shape[-3],)

    def __call__(self, x: Var, training: bool = False) -> Var:
        return ops.mean(x, axis=(2, 3))


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def __call__(self, x: Var, training: bool = False) -> Var:
        return ops.reshape(x, (x.shape[0], -1))


class Linear(Layer):
    kind = "fc"

    def __init__(self, store: ParamStore, name: str, in_features: int, out_features: int,
                 bias: bool = True, rng: Optional[np.random.Generator] = None):
        super().__init__(name)
        rng = np.random.default_rng(0) if rng is None else rng
        self.in_features, self.out_features = in_features, out_features
        self.weight = store.add(f"{name}.weight", _fan_in_uniform(rng, (out_features, in_features), in_features))
        self.bias = store.add(f"{name}.bias", _fan_in_uniform(rng, (out_features,), in_features, 1.0)) if bias else None

    def output_shape(self, in_shape):
        if int(np.prod(in_shape)) != self.in_features:
            raise ValueError(f"{self.name}: expected {self.in_features} features, got shape {tuple(in_shape)}")
        return (self.out_features,)

    def __call__(self, x: Var, training: bool = False) -> Var:
        if x.shape[-1] != self.in_features:
            raise ValueError(f"{self.name}: expected {self.in_features} features, got {x.shape[-1]}")
        return fully_connected(x, self.weight, self.bias)
