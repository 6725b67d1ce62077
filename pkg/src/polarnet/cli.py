"""Command-line interface: gen, train, eval, verify, bench.

Exit codes: 0 success, 1 failed property or check, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import checkpoint as ckpt_io
from .autodiff import ops
from .autodiff.params import Optimizer, OptimizerConfig
from .autodiff.tape import Tape, backward
from .autodiff.training import TrainConfig, evaluate, train_loop
from .data import (
    MODULATIONS,
    BlobSpec,
    CvdsError,
    ModulationSpec,
    augment_scale,
    gen_blobs,
    gen_modulation,
    read_cvds,
    write_cvds,
    write_group_log,
)
from .models import ARCHS, ArchConfig, build_model, default_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
REFERENCE_PARAMS = 67_000


class UsageError(Exception):
    pass


def emit(obj, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(obj, allow_nan=False) + "\n")
    stream.flush()


def _thread_limit():
    n = os.environ.get("SURREAL_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    try:
        limit = int(n)
    except ValueError:
        raise UsageError(f"SURREAL_THREADS must be an integer, got {n!r}") from None
    return threadpool_limits(limits=max(1, limit))


# ---------------------------------------------------------------- config

ARCH_FIELDS = ("complex_channels", "real_channels", "hidden", "dist_sets", "tr_rank",
               "wfm_kernel", "wfm_stride", "global_pool")


@dataclass
class RunConfig:
    """Training run settings. Architecture fields left as None take the
    defaults for the dataset's shape (desk defaults for 1-D signals)."""

    arch: str = "surreal"
    data: str = ""
    test: str = ""
    out: str = "run"
    epochs: int = 120
    batch: int = 32
    lr: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"
    clip_norm: float = 0.0
    complex_channels: Optional[int] = None
    real_channels: Optional[int] = None
    hidden: Optional[int] = None
    dist_sets: Optional[int] = None
    tr_rank: Optional[int] = None
    wfm_kernel: Optional[int] = None
    wfm_stride: Optional[int] = None
    global_pool: Optional[bool] = None

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise UsageError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise UsageError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.epochs < 0:
            raise UsageError("epochs must be nonnegative")
        for name in ("batch", "complex_channels", "real_channels", "hidden", "dist_sets", "wfm_kernel", "wfm_stride"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise UsageError(f"{name} must be positive")
        if not self.lr > 0:
            raise UsageError("lr must be positive")
        if self.clip_norm < 0 or (self.tr_rank or 0) < 0:
            raise UsageError("clip_norm and tr_rank must be nonnegative")

    def arch_config(self, input_shape, classes) -> ArchConfig:
        overrides = {k: getattr(self, k) for k in ARCH_FIELDS if getattr(self, k) is not None}
        try:
            return default_config(self.arch, input_shape, classes, seed=self.seed, **overrides)
        except ValueError as err:
            raise UsageError(str(err)) from None

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(kind=self.optimizer, lr=self.lr, clip_norm=self.clip_norm or None)


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def build_run_config(args) -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    if args.config:
        for key, raw in read_config_file(args.config).items():
            if key not in types:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = raw
    for key in types:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    casts = {"int": int, "float": float, "str": str, "bool": _parse_bool}
    try:
        typed = {k: casts[types[k].removeprefix("Optional[").rstrip("]")](v) for k, v in values.items()}
    except ValueError as err:
        raise UsageError(f"bad config value: {err}") from None
    return RunConfig(**typed)


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    if args.kind == "modulation":
        if args.size is not None or args.noise is not None:
            raise UsageError("--size/--noise apply to --kind blobs only")
        if not 1 <= args.classes <= len(MODULATIONS):
            raise UsageError(f"--classes must be between 1 and {len(MODULATIONS)} for modulation data")
        snr = float(args.snr) if args.snr is not None else 10.0
        spec = ModulationSpec(MODULATIONS[: args.classes], args.per_class, args.length or 128,
                              snr, args.seed, noise=bool(np.isfinite(snr)))
        data = gen_modulation(spec)
    else:
        if args.snr is not None or args.length is not None:
            raise UsageError("--snr/--length apply to --kind modulation only")
        size = (16, 16)
        if args.size:
            try:
                size = tuple(int(v) for v in args.size.lower().split("x"))
            except ValueError:
                raise UsageError("--size must look like HxW") from None
        try:
            spec = BlobSpec(args.classes, args.per_class, size,
                            0.1 if args.noise is None else args.noise, args.seed)
        except ValueError as err:
            raise UsageError(str(err)) from None
        data = gen_blobs(spec)
    nbytes = write_cvds(args.out, data)
    emit({"path": str(args.out), "n": len(data), "classes": data.classes,
          "shape": list(data.sample_shape), "bytes": nbytes})
    return EXIT_OK


def _check_shape(model_shape, data, what: str) -> None:
    if tuple(data.sample_shape) != tuple(model_shape):
        raise UsageError(f"{what} samples have shape {data.sample_shape}, model expects {tuple(model_shape)}")


def _save(path, model, optimizer, run: RunConfig, epoch: int) -> None:
    tensors = model.params.state()
    tensors.update(optimizer.state())
    ckpt_io.save(path, ckpt_io.Checkpoint(
        {"arch": model.config.to_dict(), "run": asdict(run), "epoch": epoch}, tensors))


def _build(cfg: ArchConfig):
    try:
        return build_model(cfg)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _model_from_checkpoint(ck: ckpt_io.Checkpoint):
    model = build_model(ArchConfig(**ck.config["arch"]))
    params = {k: v for k, v in ck.tensors.items() if not k.startswith("optim.")}
    model.params.load(params)
    return model


def cmd_train(args) -> int:
    run = build_run_config(args)
    if not run.data:
        raise UsageError("train needs a dataset (--data or 'data =' in --config)")
    train = read_cvds(run.data)
    test = read_cvds(run.test) if run.test else None
    start = 0
    if args.resume:
        ck = ckpt_io.load(args.resume)
        model = _model_from_checkpoint(ck)
        optimizer = Optimizer(model.params, run.optimizer_config())
        optimizer.load({k: v for k, v in ck.tensors.items() if k.startswith("optim.")})
        start = ck.epoch
    else:
        model = _build(run.arch_config(train.sample_shape, train.classes))
        optimizer = Optimizer(model.params, run.optimizer_config())
    _check_shape(model.input_shape, train, "training")
    if train.classes > model.classes:
        raise UsageError(f"dataset has {train.classes} classes, model has {model.classes}")
    if test is not None:
        _check_shape(model.input_shape, test, "test")

    out = Path(run.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = TrainConfig(epochs=run.epochs, batch_size=run.batch, seed=run.seed, optimizer=run.optimizer_config())
    epoch = start
    with open(out / "metrics.jsonl", "a" if args.resume else "w", encoding="utf-8") as log:
        for rec in train_loop(model, train, cfg, test, optimizer, start_epoch=start):
            emit(rec)
            emit(rec, log)
            epoch = rec["epoch"]
    _save(out / "checkpoint.cvck", model, optimizer, run, epoch)
    return EXIT_OK


def cmd_eval(args) -> int:
    ck = ckpt_io.load(args.checkpoint)
    model = _model_from_checkpoint(ck)
    data = read_cvds(args.data)
    _check_shape(model.input_shape, data, "evaluation")
    if data.classes > model.classes:
        raise UsageError(f"dataset has {data.classes} classes, model has {model.classes}")
    augmented = args.augment_scale is not None
    if augmented:
        data, groups = augment_scale(data, args.augment_scale)
        if args.augment_log:
            write_group_log(args.augment_log, groups)
    report = evaluate(model, data, args.batch)
    out = report.to_dict()
    out.update({"n": len(data), "augmented": augmented, "epoch": ck.epoch, "arch": ck.config["arch"]["arch"]})
    if not np.isfinite(out["loss"]):
        out["loss"] = None
        out["accuracy"] = None
    emit(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import property_names, run_suite

    names = [n for item in (args.property or []) for n in item.split(",") if n]
    try:
        results = run_suite(names or None, seed=args.seed, trials=args.trials)
    except ValueError as err:
        raise UsageError(f"{err}; known: {property_names()}") from None
    for r in results:
        emit(r.to_dict())
    failed = [r.name for r in results if not r.passed]
    emit({"summary": "pass" if not failed else "fail", "properties": len(results), "failed": failed})
    return EXIT_FAIL if failed else EXIT_OK


def _time_model(model, batch: int, rng) -> dict:
    shape = (batch,) + tuple(model.input_shape)
    from .layers.complex import ComplexTensor

    x = ComplexTensor.from_complex(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    labels = rng.integers(model.classes, size=batch)
    model.timings = {}
    t0 = time.perf_counter()
    with Tape() as tape:
        loss = ops.softmax_cross_entropy(model.forward(x, training=True), labels)
    fwd_total = time.perf_counter() - t0
    forward_times = model.timings
    model.timings = None
    back = {}
    t0 = time.perf_counter()
    backward(tape, loss, timings=back)
    bwd_total = time.perf_counter() - t0
    model.params.zero_grad()
    layers = []
    for row in model.summary():
        name = row["layer"]
        layers.append(dict(row, forward_s=forward_times.get(name, 0.0), backward_s=back.get(name, 0.0)))
    return {"forward_s": fwd_total, "backward_s": bwd_total, "layers": layers}


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    try:
        shape = tuple(int(v) for v in args.input_shape.split(","))
    except ValueError:
        raise UsageError("--input-shape must look like C,H,W") from None
    archs = args.arch or list(ARCHS)
    for arch in archs:
        if arch not in ARCHS:
            raise UsageError(f"unknown arch {arch!r}")
        for rank in [0] + list(args.tr_rank or []):
            if rank and arch == "surreal-res":
                continue
            try:
                cfg = default_config(arch, shape, args.classes, tr_rank=rank, seed=args.seed)
            except ValueError as err:
                raise UsageError(str(err)) from None
            model = _build(cfg)
            rec = {"arch": arch, "input_shape": list(shape), "tr_rank": rank, "params": model.param_count()}
            if rank:
                rings = [layer.tr for layer in model.layers() if getattr(layer, "tr", None) is not None]
                formula = sum(r.rank ** 2 * sum(r.mode_sizes) for r in rings)
                counted = sum(model.params[f"{l.name}.tr.core{k}"].value.size
                              for l in model.layers() if getattr(l, "tr", None) is not None
                              for k in range(len(l.tr.mode_sizes)))
                rec.update({"tr_params_counted": counted, "tr_params_formula": formula})
            if arch == "surreal" and shape == (1, 100, 100) and not rank:
                rec["reference_params"] = REFERENCE_PARAMS
                rec["relative_difference"] = model.param_count() / REFERENCE_PARAMS - 1.0
            if args.batch:
                rec.update(_time_model(model, args.batch, rng))
            emit(rec)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _finite_or_inf(text: str) -> float:
    v = float(text)
    if np.isnan(v):
        raise argparse.ArgumentTypeError("SNR must be a number or inf")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic CVDS dataset")
    g.add_argument("--kind", choices=("modulation", "blobs"), required=True)
    g.add_argument("--classes", type=int, default=4)
    g.add_argument("--per-class", type=int, default=500)
    g.add_argument("--snr", type=_finite_or_inf, default=None, help="dB; 'inf' disables noise (modulation)")
    g.add_argument("--length", type=int, default=None, help="samples per signal (modulation, default 128)")
    g.add_argument("--size", default=None, help="HxW image size (blobs, default 16x16)")
    g.add_argument("--noise", type=float, default=None, help="noise level (blobs, default 0.1)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a model on a CVDS dataset")
    t.add_argument("--config", default=None, help="key = value file; flags override it")
    t.add_argument("--arch", choices=ARCHS)
    t.add_argument("--data")
    t.add_argument("--test")
    t.add_argument("--out")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--optimizer", choices=("adam", "sgd"))
    t.add_argument("--clip-norm", dest="clip_norm", type=float)
    t.add_argument("--complex-channels", dest="complex_channels", type=int)
    t.add_argument("--real-channels", dest="real_channels", type=int)
    t.add_argument("--hidden", type=int)
    t.add_argument("--dist-sets", dest="dist_sets", type=int)
    t.add_argument("--tr-rank", dest="tr_rank", type=int)
    t.add_argument("--wfm-kernel", dest="wfm_kernel", type=int)
    t.add_argument("--wfm-stride", dest="wfm_stride", type=int)
    t.add_argument("--global-pool", dest="global_pool", action=argparse.BooleanOptionalAction, default=None,
                   help="average the last real feature map over positions instead of a full-extent conv")
    t.add_argument("--resume", default=None, help="checkpoint to continue from")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--augment-scale", dest="augment_scale", type=int, default=None, metavar="SEED")
    e.add_argument("--augment-log", dest="augment_log", default=None, help="write drawn group elements here")
    e.add_argument("--batch", type=int, default=256)

    v = sub.add_parser("verify", help="run the randomized property suites")
    v.add_argument("--property", action="append", help="property or group name (repeatable)")
    v.add_argument("--trials", type=int, default=None)
    v.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="parameter counts and per-layer timings")
    b.add_argument("--arch", action="append", choices=ARCHS)
    b.add_argument("--input-shape", dest="input_shape", default="1,100,100")
    b.add_argument("--classes", type=int, default=11)
    b.add_argument("--tr-rank", dest="tr_rank", type=int, action="append")
    b.add_argument("--batch", type=int, default=4, help="timing batch; 0 skips timing")
    b.add_argument("--seed", type=int, default=0)
    return p


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with _thread_limit():
            return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"{parser.prog} {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, CvdsError, ckpt_io.CheckpointError) as err:
        print(f"{parser.prog} {args.command}: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except FloatingPointError as err:
        print(f"{parser.prog} {args.command}: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
