"""Tiny models wrapping one layer type each, for gradient checks."""
import numpy as np

from polarnet.autodiff import Var
from polarnet.layers.complex import ComplexTensor, DistanceTransform, GTransport, TReLU, WfmConv, WfmResidual
from polarnet.layers.real import BatchNorm2d, Conv2d, Flatten, Linear, MaxPool2d, ReLU
from polarnet.manifold import random_points
from polarnet.models import Sequential

LAYER_TYPES = ("wfm", "gtransport", "trelu", "dist", "residual", "conv", "bn", "pool", "relu", "fc")
REAL_LAYER_TYPES = ("conv", "bn", "pool", "relu", "fc")


def rand_tensor(rng, shape):
    p = random_points(rng, shape)
    return ComplexTensor.from_polar(p.magnitude, p.phase)


def randomize(model, rng):
    for _, var in model.params.items():
        var.value = rng.normal(size=var.value.shape)


class RealInput(Var):
    """A real batch standing in for a complex one in the identity test."""

    @property
    def logmag(self):
        return self


class Pair:
    """Feeds one input to both branches of a residual layer."""

    def __init__(self, res, conv):
        self.res, self.conv, self.name, self.kind = res, conv, "pair", "pair"

    def __call__(self, x, training=False):
        return self.res(self.conv(x), x)

    def output_shape(self, shape):
        return self.res.output_shape(self.conv.output_shape(shape))


def single_layer_model(layer, rng):
    complex_head = {
        "wfm": lambda st: [WfmConv(st, "wfm", 2, 2, (2, 2), (1, 1))],
        "gtransport": lambda st: [GTransport(st, "g", 2)],
        "trelu": lambda st: [TReLU("trelu")],
        "residual": lambda st: [Pair(WfmResidual(st, "res", 2, 2, (2, 2), (2, 2)), WfmConv(st, "wfm", 2, 2, (2, 2), (2, 2)))],
        "dist": lambda st: [],
    }
    real_layers = {
        "conv": lambda st: [Conv2d(st, "conv", 2, 3, (2, 2), (1, 1), rng=rng)],
        "bn": lambda st: [BatchNorm2d(st, "bn", 2)],
        "pool": lambda st: [MaxPool2d("pool", (2, 2))],
        "relu": lambda st: [ReLU("relu")],
        "fc": lambda st: [],
    }
    model = Sequential((2, 4, 4), 2)
    store = model.params
    if layer in complex_head:
        shape = (2, 4, 4)
        for lay in complex_head[layer](store):
            model.append(lay)
            shape = lay.output_shape(shape)
        model.append(GTransport(store, "post", shape[0]))
        model.append(DistanceTransform(store, "dist", shape, 1))
        n = int(np.prod(shape))
    else:
        model.append(Identity())
        shape = (2, 4, 4)
        for lay in real_layers[layer](store):
            model.append(lay)
            shape = lay.output_shape(shape)
        n = int(np.prod(shape))
    model.append(Flatten("flatten"))
    model.append(Linear(store, "fc", n, 2, rng=rng))
    randomize(model, rng)
    if "bn.running_var" in store.buffers:
        store.buffers["bn.running_var"][:] = 1.0
    return model


class Identity:
    name, kind = "identity", "identity"

    def __call__(self, x, training=False):
        return Var(x.value) if not isinstance(x, Var) else x

    def output_shape(self, shape):
        return shape


def layer_input(layer, model, rng, batch=3):
    if layer in REAL_LAYER_TYPES:
        return RealInput(rng.normal(size=(batch,) + model.input_shape))
    return rand_tensor(rng, (batch,) + model.input_shape)
