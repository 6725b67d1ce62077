"""Compiled loops for the incremental phase-mean recursion.

theta is (B, K, N): the K window points of N windows per batch item.
t is (O, K): per-output step fractions w_k / sum_{i<=k} w_i.
"""
import numpy as np
from numba import njit

PI = np.pi
TWO_PI = 2.0 * np.pi


@njit(cache=True, inline="always")
def _wrap(x):
    if x > PI:
        return x - TWO_PI
    if x <= -PI:
        return x + TWO_PI
    return x


@njit(cache=True)
def phase_forward(theta, t):
    B, K, N = theta.shape
    O = t.shape[0]
    out = np.empty((B, O, N))
    for b in range(B):
        for o in range(O):
            phi = out[b, o]
            phi[:] = theta[b, 0]
            for k in range(1, K):
                tk = t[o, k]
                if tk == 0.0:
                    continue
                th = theta[b, k]
                if tk == 1.0:
                    phi[:] = th
                    continue
                for n in range(N):
                    phi[n] = _wrap(phi[n] + tk * _wrap(th[n] - phi[n]))
    return out


@njit(cache=True)
def phase_signature(theta, t):
    """Which wrap branch each step took: bit 0/1 for the difference, 2/3 for the update."""
    B, K, N = theta.shape
    O = t.shape[0]
    sig = np.zeros((B, O, K, N), dtype=np.int8)
    phi = np.empty(N)
    for b in range(B):
        for o in range(O):
            phi[:] = theta[b, 0]
            for k in range(1, K):
                tk = t[o, k]
                th = theta[b, k]
                for n in range(N):
                    d = th[n] - phi[n]
                    code = 0
                    if d > PI:
                        code = 1
                    elif d <= -PI:
                        code = 2
                    p = phi[n] + tk * _wrap(d)
                    if p > PI:
                        code += 4
                    elif p <= -PI:
                        code += 8
                    sig[b, o, k, n] = code
                    phi[n] = th[n] if tk == 1.0 else _wrap(p)
    return sig


@njit(cache=True)
def phase_backward(theta, t, g):
    """Adjoints for theta and t, recomputing each trajectory instead of storing it."""
    B, K, N = theta.shape
    O = t.shape[0]
    gtheta = np.zeros((B, K, N))
    gt = np.zeros((O, K))
    deltas = np.empty((K, N))
    phi = np.empty(N)
    gphi = np.empty(N)
    for b in range(B):
        for o in range(O):
            phi[:] = theta[b, 0]
            for k in range(1, K):
                tk = t[o, k]
                th = theta[b, k]
                for n in range(N):
                    d = _wrap(th[n] - phi[n])
                    deltas[k, n] = d
                    if tk == 1.0:
                        phi[n] = th[n]
                    elif tk != 0.0:
                        phi[n] = _wrap(phi[n] + tk * d)
            gphi[:] = g[b, o]
            for k in range(K - 1, 0, -1):
                tk = t[o, k]
                acc = 0.0
                for n in range(N):
                    gtheta[b, k, n] += gphi[n] * tk
                    acc += gphi[n] * deltas[k, n]
                    gphi[n] *= 1.0 - tk
                gt[o, k] += acc
            for n in range(N):
                gtheta[b, 0, n] += gphi[n]
    return gtheta, gt
