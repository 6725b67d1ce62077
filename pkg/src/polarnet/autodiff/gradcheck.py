"""Central-difference gradient checking against the tape."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import ops
from .tape import Tape, Var, backward

REL_FLOOR = 1e-5


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    excluded: int
    worst: Optional[tuple] = None
    per_param: dict = field(default_factory=dict)

    def passed(self, tol: float) -> bool:
        return self.checked > 0 and self.max_rel_error < tol


def relative_error(analytic, numeric, floor: float = REL_FLOOR):
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def _signatures(tape: Tape) -> list[np.ndarray]:
    return [sig for _, sig in tape.branches]


def _same_branches(a: list, b: list) -> bool:
    return len(a) == len(b) and all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(model, x, param_subset: Optional[Iterable[str]] = None, h: float = 1e-5, tol: float = 1e-4,
               objective: Optional[Callable[[Var], Var]] = None, training: bool = False,
               max_entries: Optional[int] = None, seed: int = 0) -> GradCheckReport:
    """Compare tape gradients with (f(p+h) - f(p-h)) / 2h entry by entry.

    The scalar checked is ``objective(logits)``; by default a fixed random
    projection of the outputs. Entries whose +-10h perturbation flips the
    branch taken by any non-smooth primitive are excluded. ``max_entries``
    samples that many entries per parameter (all when None).
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError(f"step h={h} outside [1e-6, 1e-3]")
    rng = np.random.default_rng(seed)
    params = model.params
    names = list(param_subset) if param_subset is not None else [n for n, _ in params.trainable()]

    if objective is None:
        probe = model.forward(x, training).value
        weights = rng.normal(size=probe.shape)

        def objective(out: Var) -> Var:
            return ops.sum(ops.mul(out, weights))

    def evaluate(track: bool = False):
        with Tape(track_branches=track) as tape:
            out = objective(model.forward(x, training))
        return out, tape

    params.zero_grad()
    out, tape = evaluate()
    backward(tape, out)
    analytic = {n: (np.zeros_like(params[n].value) if params[n].grad is None else params[n].grad.copy())
                for n in names}

    report = GradCheckReport(0.0, 0, 0)
    for name in names:
        var = params[name]
        flat = var.value.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, max_entries, replace=False))
        worst_here = 0.0
        for i in entries:
            base = flat[i]

            def at(v, track=False):
                flat[i] = v
                val, tp = evaluate(track)
                return float(val.value), tp

            _, lo_tape = at(base - 10 * h, True)
            _, hi_tape = at(base + 10 * h, True)
            smooth = _same_branches(_signatures(lo_tape), _signatures(hi_tape))
            if smooth:
                f_plus, _ = at(base + h)
                f_minus, _ = at(base - h)
            flat[i] = base
            if not smooth:
                report.excluded += 1
                continue
            numeric = (f_plus - f_minus) / (2 * h)
            err = float(relative_error(analytic[name].reshape(-1)[i], numeric))
            report.checked += 1
            worst_here = max(worst_here, err)
            if report.worst is None or err > report.max_rel_error:
                report.max_rel_error = err
                report.worst = (name, int(i), float(analytic[name].reshape(-1)[i]), numeric)
        report.per_param[name] = worst_here
    params.zero_grad()
    return report
