from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .tape import Var


class ParamStore:
    """Named, shape-frozen parameter arrays.

    Frozen parameters are kept but do not require gradients, so backward
    leaves their ``grad`` at None.
    """

    def __init__(self):
        self._params: "OrderedDict[str, Var]" = OrderedDict()
        self._frozen: set[str] = set()
        self.buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def add(self, name: str, value) -> Var:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        var = Var(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = var
        return var

    def add_buffer(self, name: str, value) -> np.ndarray:
        """Non-trainable state (e.g. running statistics) saved with checkpoints."""
        if name in self.buffers or name in self._params:
            raise KeyError(f"duplicate name {name!r}")
        arr = np.array(value, dtype=np.float64)
        self.buffers[name] = arr
        return arr

    def __getitem__(self, name: str) -> Var:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def trainable(self) -> list[tuple[str, Var]]:
        return [(k, v) for k, v in self._params.items() if k not in self._frozen]

    def freeze(self, *prefixes: str) -> None:
        for name, var in self._params.items():
            if any(name.startswith(p) for p in prefixes):
                self._frozen.add(name)
                var.requires_grad = False
                var.grad = None

    def unfreeze(self, *prefixes: str) -> None:
        for name, var in self._params.items():
            if any(name.startswith(p) for p in prefixes):
                self._frozen.discard(name)
                var.requires_grad = True

    def zero_grad(self) -> None:
        for var in self._params.values():
            var.grad = None

    def count(self) -> int:
        return int(sum(v.value.size for v in self._params.values()))

    def state(self, buffers: bool = True) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict((k, v.value.copy()) for k, v in self._params.items())
        if buffers:
            out.update((k, b.copy()) for k, b in self.buffers.items())
        return out

    def load(self, arrays: dict) -> None:
        for name, arr in arrays.items():
            if name in self.buffers:
                self.buffers[name][...] = arr
                continue
            if name not in self._params:
                raise KeyError(f"unknown parameter {name!r}")
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != self._params[name].value.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: {arr.shape} vs {self._params[name].value.shape}"
                )
            self._params[name].value = arr.copy()

    def grads(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict(
            (k, np.zeros_like(v.value) if v.grad is None else v.grad) for k, v in self._params.items()
        )


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if not self.lr >= 0:
            raise ValueError("learning rate must be nonnegative")


class Optimizer:
    def __init__(self, params: ParamStore, config: OptimizerConfig):
        self.params = params
        self.config = config
        self.steps = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def _clip_scale(self, trainable) -> float:
        cn = self.config.clip_norm
        if not cn:
            return 1.0
        total = np.sqrt(sum(float(np.sum(v.grad ** 2)) for _, v in trainable if v.grad is not None))
        return min(1.0, cn / total) if total > 0 else 1.0

    def step(self) -> None:
        cfg = self.config
        trainable = self.params.trainable()
        scale = self._clip_scale(trainable)
        self.steps += 1
        for name, var in trainable:
            if var.grad is None:
                continue
            g = var.grad * scale
            if cfg.kind == "sgd":
                var.value = var.value - cfg.lr * g
                continue
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(var.value)
                self.v[name] = np.zeros_like(var.value)
            v = self.v[name]
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            mhat = m / (1 - cfg.beta1 ** self.steps)
            vhat = v / (1 - cfg.beta2 ** self.steps)
            var.value = var.value - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {"optim.steps": np.array([self.steps], dtype=np.float64)}
        for k, arr in self.m.items():
            out[f"optim.m.{k}"] = arr.copy()
            out[f"optim.v.{k}"] = self.v[k].copy()
        return out

    def load(self, arrays: dict) -> None:
        for key, arr in arrays.items():
            if key == "optim.steps":
                self.steps = int(arr[0])
            elif key.startswith("optim.m."):
                self.m[key[len("optim.m."):]] = np.array(arr, dtype=np.float64)
            elif key.startswith("optim.v."):
                self.v[key[len("optim.v."):]] = np.array(arr, dtype=np.float64)
