import struct
from collections import OrderedDict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from polarnet.checkpoint import Checkpoint, CheckpointError, decode, encode, load, save
from polarnet.models import build_model, desk_signal_config

names = st.text(st.characters(codec="utf-8", exclude_categories=("Cs",)), min_size=1, max_size=12)
arrays = hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=3, min_side=0, max_side=4),
                    elements=st.floats(allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(names, arrays, max_size=5), st.integers(0, 500))
def test_round_trip(tensors, epoch):
    ckpt = Checkpoint({"epoch": epoch, "arch": {"seed": 1}}, OrderedDict(tensors))
    back = decode(encode(ckpt))
    assert back.config == ckpt.config and back.epoch == epoch
    assert list(back.tensors) == list(tensors)
    for k, v in tensors.items():
        assert back.tensors[k].shape == v.shape and np.array_equal(back.tensors[k], v)


def test_header_layout():
    buf = encode(Checkpoint({"epoch": 2}, OrderedDict(w=np.arange(3.0))))
    assert buf[:4] == b"CVCK"
    version, n = struct.unpack_from("<2I", buf, 4)
    assert version == 1 and buf[12:12 + n] == b'{"epoch": 2}'


def test_rejects_bad_magic():
    with pytest.raises(CheckpointError, match="not a checkpoint file"):
        decode(b"CVDS" + bytes(20))


@pytest.mark.parametrize("cut", [1, 9, 30])
def test_rejects_truncation(cut):
    buf = encode(Checkpoint({"epoch": 1}, OrderedDict(w=np.ones((2, 3)))))
    with pytest.raises(CheckpointError, match="truncated"):
        decode(buf[:-cut])
    with pytest.raises(CheckpointError, match="trailing"):
        decode(buf + b"x")


def test_rejects_unknown_version():
    buf = bytearray(encode(Checkpoint({}, OrderedDict())))
    buf[4:8] = struct.pack("<I", 7)
    with pytest.raises(CheckpointError, match="version 7"):
        decode(bytes(buf))


def test_model_state_restores_logits(tmp_path):
    cfg = desk_signal_config(length=48, complex_channels=2, real_channels=3, hidden=4, wfm_kernel=3, wfm_stride=1)
    model = build_model(cfg)
    rng = np.random.default_rng(0)
    for _, var in model.params.items():
        var.value = rng.normal(size=var.value.shape)
    save(tmp_path / "m.cvck", Checkpoint({"arch": cfg.to_dict(), "epoch": 3}, model.params.state()))
    ckpt = load(tmp_path / "m.cvck")
    fresh = build_model(type(cfg)(**{**ckpt.config["arch"], "input_shape": tuple(ckpt.config["arch"]["input_shape"])}))
    fresh.params.load(ckpt.tensors)
    from polarnet.layers.complex import ComplexTensor

    x = ComplexTensor.from_complex(rng.normal(size=(2, 1, 1, 48)) + 1j * rng.normal(size=(2, 1, 1, 48)))
    assert np.array_equal(fresh.forward(x).value, model.forward(x).value)
