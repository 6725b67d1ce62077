"""Reference computations that share no code with the package."""
import numpy as np
from scipy.linalg import expm, logm


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def matrix_distance(r1, t1, r2, t2):
    """Literal product-manifold distance with 2x2 rotation matrices."""
    rel = rotation(t2) @ np.linalg.inv(rotation(t1))
    skew = np.real(logm(rel))
    return float(np.sqrt(np.log(r2 / r1) ** 2 + np.linalg.norm(skew, "fro") ** 2))


def matrix_phase(theta):
    """Principal angle of R(theta) via exp/log of the skew generator."""
    R = expm(np.array([[0.0, -theta], [theta, 0.0]]))
    return float(np.arctan2(R[1, 0], R[0, 0]))


def chart_mean(mags, phases, weights):
    """Weighted mean of (log r, theta) with phases taken as given (no wrapping)."""
    w = np.asarray(weights, float) / np.sum(weights)
    return float(np.exp(w @ np.log(mags))), float(w @ np.asarray(phases, float))


def phase_grid_argmin(phases, weights, grid=200_001):
    """Circle component of the weighted Frechet mean by exhaustive search."""
    xs = np.linspace(-np.pi, np.pi, grid)
    d = np.angle(np.exp(1j * (xs[:, None] - np.asarray(phases)[None, :])))
    cost = (d ** 2) @ np.asarray(weights, float)
    return float(xs[np.argmin(cost)]), xs[1] - xs[0]


def central_difference(f, x, h=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def tensor_ring_entry(cores, index):
    """One reconstructed entry by explicit slice products."""
    prod = np.eye(cores[0].shape[0])
    for core, k in zip(cores, index):
        prod = prod @ core[:, k, :]
    return float(np.trace(prod))
