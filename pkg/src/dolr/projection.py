"""Euclidean projections, hinge penalties and the exact-solution set distance."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from dolr.graphs import ConvergenceError

PINV_RCOND = 1e-10
GRAM_MAX_ROWS = 2000


class InconsistentSystemError(ValueError):
    """The stacked equations h^T y = z have no common solution."""


class DecisionSet(Protocol):
    def project(self, x: np.ndarray) -> np.ndarray: ...

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool: ...

    def shrink(self, xi: float) -> "DecisionSet": ...


def project_ball(x: np.ndarray, radius: float) -> np.ndarray:
    """Project each row of ``x`` (shape ``(..., m)``) onto the ball of given radius."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    scale = np.where(norm > radius, radius / np.where(norm > 0, norm, 1.0), 1.0)
    return x * scale


@dataclass(frozen=True)
class Ball:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def project(self, x):
        return project_ball(x, self.radius)

    def contains(self, x, tol=1e-12):
        return bool((np.linalg.norm(np.asarray(x, dtype=float), axis=-1) <= self.radius + tol).all())

    def shrink(self, xi):
        return shrink_ball(self.radius, xi)


def shrink_ball(radius: float, xi: float) -> Ball:
    if not 0 <= xi < 1:
        raise ValueError(f"shrinkage xi must lie in [0, 1), got {xi}")
    return Ball((1 - xi) * radius)


def hinge(a):
    return np.maximum(0.0, a)


def hinge_subgrad(k: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Subgradient of [k^T x]_+ in x: ``k`` where k^T x > 0, else zero.

    ``k`` has shape ``(m,)`` or ``(s, m)``; ``x`` has shape ``(..., m)``.
    The result has shape ``x.shape[:-1] + k.shape``.
    """
    k = np.asarray(k, dtype=float)
    x = np.asarray(x, dtype=float)
    active = (x @ k.T) > 0
    return np.where(active[..., None], k, 0.0)


@dataclass(frozen=True)
class Polytope:
    """Homogeneous polytope {y : k_q^T y <= 0, q = 1..s}; rows of ``constraints`` are the k_q."""

    constraints: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        k = np.atleast_2d(np.array(self.constraints, dtype=float))
        k.setflags(write=False)
        object.__setattr__(self, "constraints", k)
        norms = np.linalg.norm(k, axis=1)
        if self.bound is None:
            object.__setattr__(self, "bound", float(norms.max()))
        elif (norms > self.bound * (1 + 1e-12)).any():
            raise ValueError(f"constraint norm {norms.max()} exceeds bound {self.bound}")

    @property
    def s(self) -> int:
        return self.constraints.shape[0]

    @property
    def m(self) -> int:
        return self.constraints.shape[1]

    def values(self, x: np.ndarray) -> np.ndarray:
        """k_q^T x for every constraint; shape ``x.shape[:-1] + (s,)``."""
        return np.asarray(x, dtype=float) @ self.constraints.T

    def violation(self, x: np.ndarray) -> np.ndarray:
        """sum_q [k_q^T x]_+ over the last axis of ``x``."""
        return hinge(self.values(x)).sum(axis=-1)

    def contains(self, x, tol=1e-12):
        return bool((self.values(x) <= tol).all())

    def project(self, x, max_iter=100_000, tol=1e-12):
        return project_polytope_dykstra(x, self, max_iter=max_iter, tol=tol)

    def shrink(self, xi):
        # a cone through the origin is invariant under scaling
        if not 0 <= xi < 1:
            raise ValueError(f"shrinkage xi must lie in [0, 1), got {xi}")
        return self

    def to_json(self) -> str:
        return json.dumps({"constraints": self.constraints.tolist()})

    @classmethod
    def from_json(cls, text: str, bound: float | None = None) -> "Polytope":
        return cls(np.array(json.loads(text)["constraints"], dtype=float), bound)

    @classmethod
    def random(cls, s: int, m: int, bound: float, rng: np.random.Generator) -> "Polytope":
        """``s`` constraint vectors drawn uniformly in the ball of radius ``bound``."""
        g = rng.standard_normal((s, m))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return cls(g * (bound * rng.random(s) ** (1.0 / m))[:, None], bound)


def _halfspace(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    return x - hinge(x @ k) * k / (k @ k)


def project_polytope_dykstra(x, p: Polytope, radius: float | None = None,
                             max_iter: int = 100_000, tol: float = 1e-12) -> np.ndarray:
    """Dykstra's alternating projections onto the half-spaces of ``p``.

    With ``radius`` given, the ball of that radius is added as one more set,
    so the result is the projection onto ``p`` intersected with the ball.
    Works on a single vector of shape ``(m,)``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        return np.stack([project_polytope_dykstra(v, p, radius, max_iter, tol) for v in x])
    sets = [lambda v, k=k: _halfspace(v, k) for k in p.constraints if k @ k > 0]
    if radius is not None:
        sets.append(lambda v: project_ball(v, radius))
    feasible = p.contains(x, 0.0) and (radius is None or np.linalg.norm(x) <= radius)
    if feasible or not sets:
        return x.copy()
    if len(sets) == 1:
        return sets[0](x)
    increments = [np.zeros_like(x) for _ in sets]
    y = x.copy()
    for _ in range(max_iter):
        prev = y
        for q, proj in enumerate(sets):
            shifted = y + increments[q]
            y_new = proj(shifted)
            increments[q] = shifted - y_new
            y = y_new
        if np.linalg.norm(y - prev) <= tol and p.contains(y, tol):
            return y
    raise ConvergenceError(f"Dykstra projection did not converge in {max_iter} sweeps")


@dataclass(frozen=True)
class PolytopeBall:
    """The decision set K = polytope intersected with the ball of radius R."""

    polytope: Polytope
    radius: float

    def project(self, x, max_iter=100_000, tol=1e-13):
        return project_polytope_dykstra(x, self.polytope, self.radius, max_iter, tol)

    def contains(self, x, tol=1e-12):
        return self.polytope.contains(x, tol) and Ball(self.radius).contains(x, tol)

    def shrink(self, xi):
        return PolytopeBall(self.polytope.shrink(xi), shrink_ball(self.radius, xi).radius)


def affine_solution_set_distance(h: np.ndarray, z: np.ndarray, point: np.ndarray,
                                 consistency_tol: float = 1e-8) -> float:
    """Distance from ``point`` to {y : h_k^T y = z_k for all stacked rows k}.

    ``h`` is any array of shape ``(..., m)`` and ``z`` the matching ``(...)``.
    The least-norm correction solves A delta = b - A point through the normal
    equations on A A^T, falling back to a pseudo-inverse when singular.
    """
    h = np.asarray(h, dtype=float)
    a = h.reshape(-1, h.shape[-1])
    b = np.asarray(z, dtype=float).reshape(-1)
    point = np.asarray(point, dtype=float)
    rhs = b - a @ point
    if a.shape[0] <= GRAM_MAX_ROWS:
        gram = a @ a.T
        try:
            lam = np.linalg.solve(gram, rhs)
            if not np.allclose(gram @ lam, rhs, rtol=1e-10, atol=1e-12):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            lam = np.linalg.pinv(gram, rcond=PINV_RCOND, hermitian=True) @ rhs
        delta = a.T @ lam
    else:
        # same least-norm correction without forming the (rows x rows) Gram matrix
        delta = np.linalg.lstsq(a, rhs, rcond=PINV_RCOND)[0]
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if np.abs(a @ delta - rhs).max(initial=0.0) > consistency_tol * scale:
        raise InconsistentSystemError("stacked equations are inconsistent; data is not exact")
    return float(np.linalg.norm(delta))
