"""Forward/backward drivers, the training loop and evaluation."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import ops
from .params import Optimizer, OptimizerConfig
from .tape import Tape, Var, backward


def forward(model, x, tape: Optional[Tape] = None, training: bool = False) -> Var:
    """Run ``model`` on ``x``, recording primitives on ``tape`` when given."""
    if tape is None:
        return model.forward(x, training)
    with tape:
        return model.forward(x, training)


def _nonfinite_error(model, x, loss: float) -> FloatingPointError:
    where = model.locate_nonfinite(x, training=True)
    detail = where or "all layer outputs finite; the loss itself overflowed"
    return FloatingPointError(f"loss is {loss}: {detail}")


def train_step(model, batch, optimizer: Optimizer) -> float:
    """One update from the mean cross-entropy over ``batch = (x, labels)``."""
    x, labels = batch
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty batch")
    if labels.min() < 0 or labels.max() >= model.classes:
        raise ValueError(f"labels must lie in [0, {model.classes})")
    model.params.zero_grad()
    with Tape() as tape:
        logits = model.forward(x, training=True)
        loss = ops.softmax_cross_entropy(logits, labels)
    value = float(loss.value)
    if not np.isfinite(value):
        raise _nonfinite_error(model, x, value)
    backward(tape, loss)
    optimizer.step()
    return value


def predict_logits(model, data, batch_size: int = 256) -> np.ndarray:
    chunks = [model.forward(x, training=False).value for x, _ in data.batches(batch_size)]
    if not chunks:
        return np.zeros((0, model.classes))
    return np.concatenate(chunks)


@dataclass
class EvalReport:
    loss: float
    accuracy: float
    confusion: np.ndarray

    @property
    def per_class_accuracy(self) -> list[Optional[float]]:
        totals = self.confusion.sum(axis=1)
        return [float(self.confusion[k, k] / t) if t else None for k, t in enumerate(totals)]

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion.tolist(),
        }


def evaluate(model, data, batch_size: int = 256) -> EvalReport:
    logits = predict_logits(model, data, batch_size)
    k = model.classes
    confusion = np.zeros((k, k), dtype=np.int64)
    if len(data) == 0:
        return EvalReport(float("nan"), float("nan"), confusion)
    pred = logits.argmax(axis=1)
    np.add.at(confusion, (data.labels, pred), 1)
    loss = float(ops.softmax_cross_entropy(Var(logits), data.labels).value)
    return EvalReport(loss, float(np.mean(pred == data.labels)), confusion)


@dataclass
class TrainConfig:
    epochs: int = 120
    batch_size: int = 32
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    recalibrate_bn: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


def recalibrate_batch_norm(model, data, batch_size: int = 256, seed: int = 0) -> None:
    """Replace BN running statistics by their average over ``data``.

    Exponential running averages track heavy-tailed features poorly; one
    extra forward pass with a cumulative average gives population
    estimates that no longer depend on the last few batches.
    """
    norms = [layer for layer in model.layers() if hasattr(layer, "running_var")]
    if not norms or len(data) == 0:
        return
    saved = [layer.momentum for layer in norms]
    try:
        # shuffled so each batch sees every class, as training batches do
        order = np.random.default_rng(seed).permutation(len(data))
        for k, (x, _) in enumerate(data.batches(batch_size, order)):
            for layer in norms:
                layer.momentum = k / (k + 1)
            model.forward(x, training=True)
    finally:
        for layer, m in zip(norms, saved):
            layer.momentum = m


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Shuffle for one epoch; keyed by (seed, epoch) so resumed runs match."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def train_loop(model, train, config: TrainConfig, test=None, optimizer: Optional[Optimizer] = None,
               start_epoch: int = 0) -> Iterator[dict]:
    """Train for ``config.epochs`` epochs, yielding one metrics record per split per epoch."""
    if train.sample_shape != tuple(model.input_shape):
        raise ValueError(f"dataset samples {train.sample_shape} do not fit model input {model.input_shape}")
    optimizer = optimizer or Optimizer(model.params, config.optimizer)
    for epoch in range(start_epoch, start_epoch + config.epochs):
        t0 = time.perf_counter()
        total, correct, seen = 0.0, 0, 0
        for x, labels in train.batches(config.batch_size, epoch_order(len(train), config.seed, epoch)):
            model.params.zero_grad()
            with Tape() as tape:
                logits = model.forward(x, training=True)
                loss = ops.softmax_cross_entropy(logits, labels)
            value = float(loss.value)
            if not np.isfinite(value):
                raise _nonfinite_error(model, x, value)
            backward(tape, loss)
            optimizer.step()
            total += value * len(labels)
            correct += int(np.sum(logits.value.argmax(axis=1) == labels))
            seen += len(labels)
        if config.recalibrate_bn:
            recalibrate_batch_norm(model, train, seed=config.seed)
        yield {"epoch": epoch + 1, "split": "train", "loss": total / max(seen, 1),
               "accuracy": correct / max(seen, 1), "seconds": time.perf_counter() - t0}
        if test is not None:
            t0 = time.perf_counter()
            rep = evaluate(model, test)
            yield {"epoch": epoch + 1, "split": "test", "loss": rep.loss, "accuracy": rep.accuracy,
                   "seconds": time.perf_counter() - t0}
