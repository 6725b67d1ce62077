"""Reverse-mode differentiation over numpy arrays.

A :class:`Tape` records every primitive applied while it is active. Each
primitive returns its output together with a vector-Jacobian closure, so the
backward pass is a reverse walk over the recorded nodes.
"""
from __future__ import annotations

import time
from collections import defaultdict
from typing import Callable, Optional

import numpy as np

_ACTIVE: list["Tape"] = []


class Var:
    """An array value that may carry a gradient."""

    __slots__ = ("value", "grad", "requires_grad", "name")
    __array_priority__ = 1000

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Var{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; the primitives live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, idx):
        from . import ops
        return ops.getitem(self, idx)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


class Node:
    __slots__ = ("out", "inputs", "vjp", "fn", "kwargs", "label")

    def __init__(self, out, inputs, vjp, fn, kwargs, label):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp
        self.fn = fn
        self.kwargs = kwargs
        self.label = label


class Tape:
    """Ordered record of primitive applications.

    ``track_branches`` makes non-smooth primitives (max gates, phase wraps,
    pooling) log which branch each element took; ``grad_check`` compares
    these logs across perturbed evaluations.
    """

    def __init__(self, track_branches: bool = False):
        self.nodes: list[Node] = []
        self.branches: list[tuple[Optional[str], np.ndarray]] = []
        self.track_branches = track_branches
        self.label: Optional[str] = None

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def scope(self, label: Optional[str]):
        return _Scope(self, label)

    def replay(self) -> Optional[Var]:
        """Recompute every recorded value from the current leaf values."""
        for node in self.nodes:
            vals = [x.value for x in node.inputs]
            node.out.value = node.fn(*vals, **node.kwargs)[0]
        return self.nodes[-1].out if self.nodes else None


class _Scope:
    def __init__(self, tape: Tape, label):
        self.tape, self.label, self.prev = tape, label, None

    def __enter__(self):
        self.prev = self.tape.label
        self.tape.label = self.label
        return self.tape

    def __exit__(self, *exc):
        self.tape.label = self.prev


class _NullScope:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return None


def current_tape() -> Optional[Tape]:
    return _ACTIVE[-1] if _ACTIVE else None


def scope(label: Optional[str]):
    """Label nodes recorded on the active tape (used for per-layer timing)."""
    tape = current_tape()
    return tape.scope(label) if tape is not None else _NullScope()


def record_branch(make_signature: Callable[[], np.ndarray]) -> None:
    tape = current_tape()
    if tape is not None and tape.track_branches:
        tape.branches.append((tape.label, make_signature()))


def apply(fn: Callable, *inputs, **kwargs) -> Var:
    """Run primitive ``fn`` on the values of ``inputs`` and record it.

    ``fn`` returns ``(value, vjp)`` where ``vjp(g)`` yields one gradient (or
    None) per input.
    """
    inputs = tuple(as_var(x) for x in inputs)
    value, vjp = fn(*[x.value for x in inputs], **kwargs)
    needs = any(x.requires_grad for x in inputs)
    out = Var(value, requires_grad=needs)
    tape = current_tape()
    if tape is not None:
        tape.nodes.append(Node(out, inputs, vjp if needs else None, fn, kwargs, tape.label))
    return out


def backward(tape: Tape, loss: Var, adjoint=None, timings: Optional[dict] = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it."""
    if not tape.nodes:
        raise RuntimeError("backward called before forward: the tape is empty")
    if not any(node.out is loss for node in reversed(tape.nodes)):
        raise RuntimeError("backward called before forward: loss was not recorded on this tape")
    if adjoint is None:
        adjoint = np.ones_like(loss.value)
    grads: dict[int, np.ndarray] = {id(loss): np.asarray(adjoint, dtype=np.float64)}
    leaves: dict[int, Var] = {}
    produced = {id(node.out) for node in tape.nodes}
    spent = defaultdict(float) if timings is not None else None

    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None or node.vjp is None:
            continue
        t0 = time.perf_counter() if spent is not None else 0.0
        gins = node.vjp(g)
        if spent is not None:
            spent[node.label] += time.perf_counter() - t0
        for x, gx in zip(node.inputs, gins):
            if gx is None or not x.requires_grad:
                continue
            key = id(x)
            if key in grads:
                grads[key] = grads[key] + gx
            else:
                grads[key] = gx
            if key not in produced:
                leaves[key] = x

    for key, x in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        g = np.broadcast_to(g, x.value.shape) if g.shape != x.value.shape else g
        x.grad = g.copy() if x.grad is None else x.grad + g
    if timings is not None:
        for k, v in spent.items():
            timings[k] = timings.get(k, 0.0) + v
