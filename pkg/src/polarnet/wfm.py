"""Weighted Frechet means on R+ x SO(2).

``wfm_incremental`` is the production estimator: a running geodesic
interpolation that is exactly equivariant under the scaling-rotation group.
``wfm_fixed_point`` and ``wfm_bruteforce`` exist to cross-check it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .manifold import TWO_PI, PolarComplex, wrap_phase

PointsLike = Union[PolarComplex, Sequence[PolarComplex]]


def as_point_arrays(points: PointsLike) -> tuple[np.ndarray, np.ndarray]:
    """Return (magnitudes, phases) as flat float64 arrays."""
    if isinstance(points, PolarComplex):
        mag = np.atleast_1d(np.asarray(points.magnitude, dtype=np.float64)).ravel()
        ph = np.atleast_1d(np.asarray(points.phase, dtype=np.float64)).ravel()
    else:
        points = list(points)
        if not points:
            raise ValueError("point set must be nonempty")
        mag = np.array([p.magnitude for p in points], dtype=np.float64)
        ph = np.array([p.phase for p in points], dtype=np.float64)
    if mag.size == 0:
        raise ValueError("point set must be nonempty")
    return mag, ph


def normalize_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size != n:
        raise ValueError(f"expected {n} weights, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("degenerate weight vector")
    return w / total


def _wrap(x: float) -> float:
    # scalar twin of manifold.wrap_phase; numpy overhead dominates for single points
    k = math.ceil((x - math.pi) / TWO_PI)
    if k != 0:
        x -= TWO_PI * k
    if x <= -math.pi:
        x += TWO_PI
    elif x > math.pi:
        x -= TWO_PI
    return x


def wfm_incremental(points: PointsLike, weights) -> PolarComplex:
    mag, ph = as_point_arrays(points)
    w = normalize_weights(weights, mag.size)
    nz = np.flatnonzero(w)
    if nz.size == 1:
        return PolarComplex(float(mag[nz[0]]), float(ph[nz[0]]))
    logs, phases, ws = np.log(mag[nz]).tolist(), ph[nz].tolist(), w[nz].tolist()
    m_log, m_ph, acc = logs[0], phases[0], ws[0]
    for lk, pk, wk in zip(logs[1:], phases[1:], ws[1:]):
        acc += wk
        t = wk / acc
        m_log = (1.0 - t) * m_log + t * lk
        m_ph = _wrap(m_ph + t * _wrap(pk - m_ph))
    return PolarComplex(math.exp(m_log), m_ph)


def chart_mean(points: PointsLike, weights, reference: float | None = None) -> PolarComplex:
    """Weighted arithmetic mean in (log r, theta) with phases unwrapped
    around ``reference`` (default: the first point). Valid when all phases
    sit inside a half-circle around the reference."""
    mag, ph = as_point_arrays(points)
    w = normalize_weights(weights, mag.size)
    ref = ph[0] if reference is None else reference
    rel = wrap_phase(ph - ref)
    return PolarComplex(float(np.exp(np.dot(w, np.log(mag)))), float(wrap_phase(ref + np.dot(w, rel))))


def objective(points: PointsLike, weights, m: PolarComplex) -> float:
    """Weighted sum of squared manifold distances to ``m``."""
    mag, ph = as_point_arrays(points)
    w = normalize_weights(weights, mag.size)
    dl = np.log(mag) - np.log(m.magnitude)
    dth = wrap_phase(ph - m.phase)
    return float(np.dot(w, dl * dl + 2.0 * dth * dth))


@dataclass(frozen=True)
class FixedPointResult:
    point: PolarComplex
    converged: bool
    iterations: int


def wfm_fixed_point(points: PointsLike, weights, max_iter: int = 32, tol: float = 1e-10) -> FixedPointResult:
    """Karcher iteration started from the incremental estimate.

    Each step moves to the exponential of the weighted mean of the
    log-mapped residuals in the chart centred at the current iterate.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    mag, ph = as_point_arrays(points)
    w = normalize_weights(weights, mag.size)
    start = wfm_incremental(PolarComplex(mag, ph), w)
    lm, th = float(np.log(start.magnitude)), float(start.phase)
    logs = np.log(mag)

    best = (lm, th)
    best_obj = np.inf
    for it in range(1, max_iter + 1):
        res_l = logs - lm
        res_t = wrap_phase(ph - th)
        obj = float(np.dot(w, res_l * res_l + 2.0 * res_t * res_t))
        if obj < best_obj:
            best, best_obj = (lm, th), obj
        step_l = float(np.dot(w, res_l))
        step_t = float(np.dot(w, res_t))
        lm, th = lm + step_l, float(wrap_phase(th + step_t))
        if np.hypot(step_l, step_t) < tol:
            return FixedPointResult(PolarComplex(float(np.exp(lm)), th), True, it)

    res_t = wrap_phase(ph - th)
    obj = float(np.dot(w, (logs - lm) ** 2 + 2.0 * res_t * res_t))
    if obj < best_obj:
        best = (lm, th)
    return FixedPointResult(PolarComplex(float(np.exp(best[0])), best[1]), False, max_iter)


def _parabola_vertex(f_m: float, f_0: float, f_p: float) -> float:
    """Offset (in grid steps) of the vertex through three equispaced samples."""
    denom = f_m - 2.0 * f_0 + f_p
    if denom <= 0:
        return 0.0
    return float(np.clip(0.5 * (f_m - f_p) / denom, -1.0, 1.0))


def wfm_bruteforce(points: PointsLike, weights, grid: int = 512) -> PolarComplex:
    """Lattice minimisation of the wFM objective.

    The lattice spans the data's (log r, theta) bounding box inflated by 10%.
    Because the squared distance splits into a log-magnitude term plus a
    phase term, the minimum over a product lattice is attained at the pair of
    per-axis minimisers; each axis is therefore scanned on its own, followed
    by one parabolic refinement.
    """
    mag, ph = as_point_arrays(points)
    if mag.size > 16 or grid > 2048:
        raise ValueError("brute-force wFM limited to n <= 16 points and grid <= 2048")
    if grid < 3:
        raise ValueError("grid must be at least 3")
    w = normalize_weights(weights, mag.size)
    logs = np.log(mag)

    def axis_search(lo: float, hi: float, cost) -> float:
        pad = 0.1 * (hi - lo) if hi > lo else 0.1
        axis = np.linspace(lo - pad, hi + pad, grid)
        vals = cost(axis)
        i = int(np.argmin(vals))
        if 0 < i < grid - 1:
            step = axis[1] - axis[0]
            return float(axis[i] + step * _parabola_vertex(vals[i - 1], vals[i], vals[i + 1]))
        return float(axis[i])

    def cost_l(axis):
        d = logs[None, :] - axis[:, None]
        return (d * d) @ w

    def cost_t(axis):
        d = wrap_phase(ph[None, :] - axis[:, None])
        return (2.0 * d * d) @ w

    lm = axis_search(logs.min(), logs.max(), cost_l)
    th = axis_search(ph.min(), ph.max(), cost_t)
    return PolarComplex(float(np.exp(lm)), float(wrap_phase(th)))
