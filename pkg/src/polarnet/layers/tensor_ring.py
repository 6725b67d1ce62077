"""Tensor-ring factorisation of weight tensors.

A tensor of shape n_1 x ... x n_c is the cyclic trace of c cores of shape
(b, n_k, b): W[k_1..k_c] = trace(T_1[:, k_1, :] @ ... @ T_c[:, k_c, :]).
"""
from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.params import ParamStore
from ..autodiff.tape import Var


@dataclass
class TensorRingSpec:
    mode_sizes: tuple
    rank: int
    cores: list

    def __post_init__(self):
        self.mode_sizes = tuple(int(n) for n in self.mode_sizes)
        if len(self.cores) != len(self.mode_sizes):
            raise ValueError("need one core per mode")
        b = self.rank
        for n, core in zip(self.mode_sizes, self.cores):
            if np.shape(core) != (b, n, b):
                raise ValueError(f"core shape {np.shape(core)} != {(b, n, b)}")

    @classmethod
    def random(cls, mode_sizes: Sequence[int], rank: int, rng: np.random.Generator, scale: float = 1.0):
        cores = [rng.normal(0.0, scale, (rank, n, rank)) for n in mode_sizes]
        return cls(tuple(mode_sizes), rank, cores)


def tensor_ring_param_count(spec: TensorRingSpec) -> int:
    return spec.rank ** 2 * sum(spec.mode_sizes)


def tensor_ring_reconstruct(spec: TensorRingSpec) -> np.ndarray:
    acc = np.asarray(spec.cores[0], dtype=np.float64)
    for core in spec.cores[1:]:
        acc = np.einsum("a...b,bjc->a...jc", acc, core)
    return np.einsum("a...a->...", acc)


def _ring_specs(c: int) -> list[str]:
    modes = string.ascii_lowercase[:c]
    bonds = string.ascii_uppercase
    specs = []
    left = f"A{modes[0]}B"
    for k in range(1, c):
        right = f"{bonds[k]}{modes[k]}{bonds[k + 1]}"
        out = f"A{modes[:k + 1]}{bonds[k + 1]}"
        specs.append(f"{left},{right}->{out}")
        left = out
    specs.append(f"{left},A{left[-1]}->{modes}")
    return specs


def reconstruct_var(cores: Sequence[Var]) -> Var:
    """Differentiable reconstruction from core variables."""
    specs = _ring_specs(len(cores))
    b = cores[0].shape[0]
    acc = cores[0]
    for spec, core in zip(specs[:-1], cores[1:]):
        acc = ops.einsum(spec, acc, core)
    return ops.einsum(specs[-1], acc, Var(np.eye(b)))


class TensorRing:
    """Ring-factorised parameter tensor living in a ParamStore."""

    def __init__(self, cores: list[Var], mode_sizes: tuple, rank: int):
        self.cores = cores
        self.mode_sizes = mode_sizes
        self.rank = rank

    @classmethod
    def create(cls, store: ParamStore, name: str, mode_sizes: Sequence[int], rank: int,
               rng: Optional[np.random.Generator] = None) -> "TensorRing":
        rng = np.random.default_rng(0) if rng is None else rng
        # scale so reconstructed entries start with O(0.1) spread
        scale = (0.1 / np.sqrt(rank)) ** (1.0 / len(mode_sizes))
        cores = [store.add(f"{name}.core{k}", rng.normal(0.0, scale, (rank, n, rank)))
                 for k, n in enumerate(mode_sizes)]
        return cls(cores, tuple(mode_sizes), rank)

    def reconstruct(self) -> Var:
        return reconstruct_var(self.cores)

    def param_count(self) -> int:
        return self.rank ** 2 * sum(self.mode_sizes)


def fit_tensor_ring(target: np.ndarray, rank: int, rng: Optional[np.random.Generator] = None,
                    steps: int = 20_000, lr: float = 1e-2, tol: float = 1e-16) -> TensorRingSpec:
    """Fit ring cores to a dense tensor by Adam on the squared error."""
    from ..autodiff.params import Optimizer, OptimizerConfig
    from ..autodiff.tape import Tape, backward

    target = np.asarray(target, dtype=np.float64)
    store = ParamStore()
    ring = TensorRing.create(store, "ring", target.shape, rank, rng)
    opt = Optimizer(store, OptimizerConfig("adam", lr))
    for step in range(steps):
        store.zero_grad()
        with Tape() as tape:
            loss = ops.sum(ops.square(ops.sub(ring.reconstruct(), target)))
        if loss.value < tol:
            break
        backward(tape, loss)
        opt.step()
        if step % 2000 == 1999:
            opt.config.lr *= 0.5
    return TensorRingSpec(target.shape, rank, [c.value.copy() for c in ring.cores])
