"""Square loss, its gradient and the two-point bandit gradient estimator.

All functions broadcast over leading axes: ``h`` and ``y`` have shape
``(..., m)`` and ``z`` has shape ``(...)``.  Inner products are accumulated
coordinate by coordinate in a fixed order so that data built with
:func:`predict` has residual exactly zero at the planted parameter.
"""

from __future__ import annotations

import numpy as np


def predict(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``h^T y`` over the last axis, summed left to right."""
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    if h.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: h has {h.shape[-1]} coords, y has {y.shape[-1]}")
    out = h[..., 0] * y[..., 0]
    for k in range(1, h.shape[-1]):
        out = out + h[..., k] * y[..., k]
    return out


def residual(h, z, y) -> np.ndarray:
    return predict(h, y) - np.asarray(z, dtype=float)


def loss(h, z, y) -> np.ndarray | float:
    """theta(y) = 0.5 * (h^T y - z)^2."""
    r = residual(h, z, y)
    return 0.5 * r * r


def grad(h, z, y) -> np.ndarray:
    """h * (h^T y - z)."""
    h = np.asarray(h, dtype=float)
    return h * residual(h, z, y)[..., None]


def random_unit_vector(m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the unit sphere (normalized Gaussian)."""
    return unit_from_gaussian(rng.standard_normal(m))


def unit_from_gaussian(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / norm


def random_ball_vector(m: int, rng: np.random.Generator, size: int | tuple | None = None) -> np.ndarray:
    """Uniform point in the unit ball: Gaussian direction scaled by U^(1/m)."""
    shape = () if size is None else ((size,) if isinstance(size, int) else tuple(size))
    g = rng.standard_normal(shape + (m,))
    u = rng.random(shape)
    return ball_from_draws(g, u)


def ball_from_draws(g: np.ndarray, u: np.ndarray) -> np.ndarray:
    m = g.shape[-1]
    return unit_from_gaussian(g) * (np.asarray(u) ** (1.0 / m))[..., None]


def two_point_estimate(h, z, y, u, eps: float, m: int | None = None) -> np.ndarray:
    """(m / 2 eps) * (theta(y + eps u) - theta(y - eps u)) * u.

    Only two loss values are queried; ``m`` defaults to ``u.shape[-1]``.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if m is None:
        m = u.shape[-1]
    up = loss(h, z, y + eps * u)
    down = loss(h, z, y - eps * u)
    return (m / (2.0 * eps)) * (up - down)[..., None] * u


def smoothed_loss_mc(h, z, y, eps: float, num_samples: int, seed: int) -> float:
    """Monte-Carlo estimate of E_v[theta(y + eps v)], v uniform in the unit ball.

    Test oracle only; the algorithms never evaluate the smoothed loss.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    y = np.asarray(y, dtype=float)
    if eps == 0:
        return float(loss(h, z, y))
    v = random_ball_vector(y.shape[-1], np.random.default_rng(seed), num_samples)
    return float(np.mean(loss(h, z, y + eps * v)))
