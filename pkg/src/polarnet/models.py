"""Network architectures.

``surreal`` follows the reference image layout (two wFM convolutions with
G-transport, a distance transform, then a small real CNN), ``surreal-res``
the residual variant, and ``real-baseline`` treats re/im as two independent
real channels. Inputs with height 1 are treated as 1-D signals: every k x k
kernel becomes 1 x k and strides/pools act along the time axis only.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .autodiff import ops
from .autodiff.params import ParamStore
from .autodiff.tape import Var, scope
from .layers.complex import (
    Cartesian,
    ComplexTensor,
    DistanceTransform,
    GTransport,
    Layer,
    TReLU,
    WfmConv,
    WfmResidual,
)
from .layers.real import BatchNorm2d, Conv2d, Flatten, GlobalAvgPool, Linear, MaxPool2d, ReLU

ARCHS = ("surreal", "surreal-res", "real-baseline")


@dataclass
class ArchConfig:
    arch: str = "surreal"
    input_shape: tuple = (1, 100, 100)
    classes: int = 11
    complex_channels: int = 20
    real_channels: int = 30
    hidden: int = 50
    dist_sets: int = 1
    activation: str = "gtransport"
    tr_rank: int = 0
    seed: int = 0
    wfm_kernel: int = 5
    wfm_stride: int = 2
    global_pool: bool = False

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}; expected one of {ARCHS}")
        if self.activation not in ("gtransport", "trelu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"input_shape must be (C, H, W), got {self.input_shape}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d


class Model:
    """A differentiable network whose parameters live in ``self.params``."""

    arch = "model"

    def __init__(self, input_shape: Sequence[int], classes: int):
        self.params = ParamStore()
        self.input_shape = tuple(input_shape)
        self.classes = classes
        self.config: Optional[ArchConfig] = None
        self._diagnose = False
        self.timings: Optional[dict] = None

    # subclasses implement _forward using self._run for every layer
    def _forward(self, x: ComplexTensor, training: bool):
        raise NotImplementedError

    def layers(self) -> list[Layer]:
        raise NotImplementedError

    def _run(self, layer: Layer, *args, training: bool = False):
        t0 = time.perf_counter()
        with scope(layer.name):
            out = layer(*args, training=training)
        if self.timings is not None:
            self.timings[layer.name] = self.timings.get(layer.name, 0.0) + time.perf_counter() - t0
        if self._diagnose:
            fields = (out.logmag.value, out.phase.value) if isinstance(out, ComplexTensor) else (out.value,)
            if not all(np.all(np.isfinite(f)) for f in fields):
                raise FloatingPointError(f"non-finite values first produced by layer {layer.name!r}")
        return out

    def forward(self, x: ComplexTensor, training: bool = False) -> Var:
        if tuple(x.shape[-3:]) != self.input_shape:
            raise ValueError(f"{self.arch}: expected input shape {self.input_shape}, got {tuple(x.shape[-3:])}")
        squeeze = x.logmag.ndim == 3
        if squeeze:
            x = ComplexTensor(x.logmag.value[None], x.phase.value[None])
        out = self._forward(x, training)
        return ops.reshape(out, out.shape[1:]) if squeeze else out

    __call__ = forward

    def locate_nonfinite(self, x: ComplexTensor, training: bool = False) -> Optional[str]:
        """Name of the first layer producing NaN/inf on ``x``, if any."""
        self._diagnose = True
        try:
            self.forward(x, training)
        except FloatingPointError as err:
            return str(err)
        finally:
            self._diagnose = False
        return None

    def param_count(self) -> int:
        return self.params.count()

    def summary(self) -> list[dict]:
        rows = []
        for layer in self.layers():
            names = [n for n in self.params if n.startswith(layer.name + ".")]
            rows.append({
                "layer": layer.name,
                "kind": layer.kind,
                "params": int(sum(self.params[n].value.size for n in names)),
            })
        return rows


class Sequential(Model):
    arch = "sequential"

    def __init__(self, input_shape, classes, layers: Optional[list[Layer]] = None):
        super().__init__(input_shape, classes)
        self._layers: list[Layer] = list(layers or [])

    def append(self, layer: Layer) -> Layer:
        self._layers.append(layer)
        return layer

    def layers(self) -> list[Layer]:
        return self._layers

    def _forward(self, x, training):
        for layer in self._layers:
            x = self._run(layer, x, training=training)
        return x


def _geometry(input_shape):
    """Kernel/stride conventions for images versus 1-D signals."""
    signal = input_shape[1] == 1

    def k(n):
        return (1, n) if signal else (n, n)

    def s(n):
        return (1, n) if signal else (n, n)

    def p(n):
        return (0, n) if signal else (n, n)

    return k, s, p


def _shape_after(layer: Layer, shape):
    out = layer.output_shape(shape)
    if min(out) < 1:
        raise ValueError(f"layer {layer.name!r} produces empty output {out} from {shape}")
    return out


def _real_tail(model: Sequential, store: ParamStore, shape, cfg: ArchConfig, rng) -> None:
    """CONV-BN-ReLU, MaxPool, CONV-BN-ReLU, CONV-BN-ReLU, FC, FC (reference tail)."""
    k, s, _ = _geometry(cfg.input_shape)
    rc = cfg.real_channels
    tr = cfg.tr_rank or None
    for layer in (
        Conv2d(store, "conv1", shape[0], rc, k(5), s(1), tr_rank=tr, rng=rng),
        BatchNorm2d(store, "bn1", rc),
        ReLU("relu1"),
        MaxPool2d("pool1", k(2), s(2)),
        Conv2d(store, "conv2", rc, rc, k(5), s(3), tr_rank=tr, rng=rng),
        BatchNorm2d(store, "bn2", rc),
        ReLU("relu2"),
    ):
        model.append(layer)
        shape = _shape_after(layer, shape)
    # last conv collapses whatever spatial extent remains (2x2 on 100x100 inputs);
    # with global_pool it is pointwise and positions are averaged instead
    if cfg.global_pool:
        conv3 = Conv2d(store, "conv3", rc, rc, k(1), (1, 1), tr_rank=tr, rng=rng)
        squash = GlobalAvgPool("gap")
    else:
        conv3 = Conv2d(store, "conv3", rc, rc, shape[1:], (1, 1), tr_rank=tr, rng=rng)
        squash = Flatten("flatten")
    for layer in (conv3, BatchNorm2d(store, "bn3", rc), ReLU("relu3"), squash):
        model.append(layer)
        shape = _shape_after(layer, shape)
    for layer in (
        Linear(store, "fc1", shape[0], cfg.hidden, rng=rng),
        ReLU("relu4"),
        Linear(store, "fc2", cfg.hidden, cfg.classes, rng=rng),
    ):
        model.append(layer)


def build_surreal(cfg: ArchConfig) -> Sequential:
    rng = np.random.default_rng(cfg.seed)
    model = Sequential(cfg.input_shape, cfg.classes)
    model.arch = "surreal"
    model.config = cfg
    store = model.params
    k, s, _ = _geometry(cfg.input_shape)
    cc = cfg.complex_channels
    shape = cfg.input_shape

    def act(name, channels):
        return GTransport(store, name, channels) if cfg.activation == "gtransport" else TReLU(name)

    wk, ws = k(cfg.wfm_kernel), s(cfg.wfm_stride)
    for layer in (
        WfmConv(store, "wfm1", shape[0], cc, wk, ws, tr_rank=cfg.tr_rank or None, rng=rng),
        act("act1", cc),
        WfmConv(store, "wfm2", cc, cc, wk, ws, tr_rank=cfg.tr_rank or None, rng=rng),
        act("act2", cc),
    ):
        model.append(layer)
        shape = _shape_after(layer, shape)
    dist = DistanceTransform(store, "dist", shape, cfg.dist_sets)
    model.append(dist)
    shape = _shape_after(dist, shape)
    _real_tail(model, store, shape, cfg, rng)
    return model


def build_real_baseline(cfg: ArchConfig) -> Sequential:
    """Same depth as ``surreal`` with real convolutions on (re, im) channels.

    Each complex channel carries two reals, so the front convolutions are
    twice as wide as the complex ones they replace; kernel and stride follow
    the wFM front.
    """
    rng = np.random.default_rng(cfg.seed)
    model = Sequential(cfg.input_shape, cfg.classes)
    model.arch = "real-baseline"
    model.config = cfg
    store = model.params
    k, s, _ = _geometry(cfg.input_shape)
    wide = 2 * cfg.complex_channels
    shape = cfg.input_shape
    front = [Cartesian("cartesian")]
    wk, ws = k(cfg.wfm_kernel), s(cfg.wfm_stride)
    front += [Conv2d(store, "rconv1", 2 * shape[0], wide, wk, ws, rng=rng),
              BatchNorm2d(store, "rbn1", wide), ReLU("rrelu1"),
              Conv2d(store, "rconv2", wide, wide, wk, ws, rng=rng),
              BatchNorm2d(store, "rbn2", wide), ReLU("rrelu2")]
    for layer in front:
        model.append(layer)
        shape = _shape_after(layer, shape)
    _real_tail(model, store, shape, cfg, rng)
    return model


class ConvStack(Layer):
    """1x1 -> 3x3 (zero padded) -> 1x1 convolutions with ReLU in between."""

    kind = "conv_stack"

    def __init__(self, store, name, channels, geometry, rng):
        super().__init__(name)
        k, s, p = geometry
        self.convs = [
            Conv2d(store, f"{name}.a", channels, channels, k(1), s(1), rng=rng),
            Conv2d(store, f"{name}.b", channels, channels, k(3), s(1), p(1), rng=rng),
            Conv2d(store, f"{name}.c", channels, channels, k(1), s(1), rng=rng),
        ]

    def __call__(self, x, training=False):
        x = ops.relu(self.convs[0](x))
        x = ops.relu(self.convs[1](x))
        return self.convs[2](x)


class ConvResidual(Layer):
    """Real skip connection: 1x1-project both branches, then add."""

    kind = "conv_residual"

    def __init__(self, store, name, in_main, in_skip, out_channels, geometry, rng):
        super().__init__(name)
        k, s, _ = geometry
        self.main = Conv2d(store, f"{name}.main", in_main, out_channels, k(1), s(1), rng=rng)
        self.skip = Conv2d(store, f"{name}.skip", in_skip, out_channels, k(1), s(1), rng=rng)
        self.out_channels = out_channels

    def output_shape(self, in_shape):
        return (self.out_channels,) + tuple(in_shape[1:])

    def __call__(self, main, skip, training=False):
        return ops.add(self.main(main), self.skip(skip))


class SurRealResNet(Model):
    """Residual variant: wFM skip connection plus residual real blocks."""

    arch = "surreal-res"

    def __init__(self, cfg: ArchConfig):
        super().__init__(cfg.input_shape, cfg.classes)
        self.config = cfg
        rng = np.random.default_rng(cfg.seed)
        store = self.params
        geo = _geometry(cfg.input_shape)
        k, s, _ = geo
        cc = cfg.complex_channels
        shape = cfg.input_shape

        self.wfm1 = WfmConv(store, "wfm1", shape[0], cc, k(5), s(2))
        self.act1 = GTransport(store, "act1", cc)
        skip_shape = _shape_after(self.wfm1, shape)
        self.wfm2 = WfmConv(store, "wfm2", cc, cc, k(5), s(2))
        shape = _shape_after(self.wfm2, skip_shape)
        self.res = WfmResidual(store, "wfm_res", cc, cc, k(5), s(2))
        shape = self.res.output_shape(shape)
        self.act2 = GTransport(store, "act2", shape[0])
        self.dist = DistanceTransform(store, "dist", shape, cfg.dist_sets)
        shape = self.dist.output_shape(shape)

        widths = (30, 40, 50, 60, 70)
        self.conv1 = Conv2d(store, "conv1", shape[0], widths[0], k(5), s(1), rng=rng)
        self.bn1 = BatchNorm2d(store, "bn1", widths[0])
        shape = _shape_after(self.conv1, shape)
        self.stack1 = ConvStack(store, "stack1", widths[0], geo, rng)
        self.res1 = ConvResidual(store, "res1", widths[0], widths[0], widths[1], geo, rng)
        self.pool = MaxPool2d("pool1", k(2), s(2))
        shape = _shape_after(self.pool, self.res1.output_shape(shape))
        self.conv2 = Conv2d(store, "conv2", widths[1], widths[2], k(5), s(3), rng=rng)
        self.bn2 = BatchNorm2d(store, "bn2", widths[2])
        shape = _shape_after(self.conv2, shape)
        self.stack2 = ConvStack(store, "stack2", widths[2], geo, rng)
        self.res2 = ConvResidual(store, "res2", widths[2], widths[2], widths[3], geo, rng)
        shape = self.res2.output_shape(shape)
        self.conv3 = Conv2d(store, "conv3", widths[3], widths[4], shape[1:], (1, 1), rng=rng)
        self.bn3 = BatchNorm2d(store, "bn3", widths[4])
        self.fc1 = Linear(store, "fc1", widths[4], 30, rng=rng)
        self.fc2 = Linear(store, "fc2", 30, cfg.classes, rng=rng)
        self.relu = ReLU("relu")
        self.flatten = Flatten("flatten")

    def layers(self) -> list[Layer]:
        return [self.wfm1, self.act1, self.wfm2, self.res, self.act2, self.dist, self.conv1, self.bn1,
                self.stack1, self.res1, self.pool, self.conv2, self.bn2, self.stack2, self.res2,
                self.conv3, self.bn3, self.fc1, self.fc2]

    def _forward(self, x, training):
        run = self._run
        f2 = run(self.act1, run(self.wfm1, x, training=training), training=training)
        f1 = run(self.wfm2, f2, training=training)
        z = run(self.act2, run(self.res, f1, f2, training=training), training=training)
        h = run(self.dist, z, training=training)
        h = ops.relu(run(self.bn1, run(self.conv1, h, training=training), training=training))
        h = run(self.res1, run(self.stack1, h, training=training), h, training=training)
        h = run(self.pool, h, training=training)
        h = ops.relu(run(self.bn2, run(self.conv2, h, training=training), training=training))
        h = run(self.res2, run(self.stack2, h, training=training), h, training=training)
        h = ops.relu(run(self.bn3, run(self.conv3, h, training=training), training=training))
        h = run(self.flatten, h, training=training)
        h = ops.relu(run(self.fc1, h, training=training))
        return run(self.fc2, h, training=training)


def build_model(cfg: ArchConfig) -> Model:
    if cfg.arch == "surreal":
        return build_surreal(cfg)
    if cfg.arch == "surreal-res":
        return SurRealResNet(cfg)
    return build_real_baseline(cfg)


def reference_image_config(arch: str = "surreal", classes: int = 11, **kw) -> ArchConfig:
    """100x100 single-channel images with the stock ``ArchConfig`` widths."""
    return ArchConfig(arch=arch, input_shape=(1, 100, 100), classes=classes, **kw)


# Signals are short (128 samples) and carry their class in sample-to-sample
# phase steps, so the desk front keeps full time resolution with 3-tap wFM
# windows, and the tail averages over time instead of memorising positions.
DESK_SIGNAL_DEFAULTS = {"complex_channels": 10, "wfm_kernel": 3, "wfm_stride": 1, "global_pool": True}


def default_config(arch: str, input_shape, classes: int, **kw) -> ArchConfig:
    """Desk defaults for 1-D signals (height 1), stock defaults for images."""
    input_shape = tuple(input_shape)
    base = DESK_SIGNAL_DEFAULTS if len(input_shape) == 3 and input_shape[1] == 1 else {}
    return ArchConfig(arch=arch, input_shape=input_shape, classes=classes, **{**base, **kw})


def desk_signal_config(arch: str = "surreal", classes: int = 4, length: int = 128, **kw) -> ArchConfig:
    return default_config(arch, (1, 1, length), classes, **kw)
