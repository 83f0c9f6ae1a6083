"""Data streams: oblivious bounded data, exactly realizable data, adaptive adversaries.

A :class:`DataTensor` stores covariates ``h`` with shape ``(T, n, m)`` and
outcomes ``z`` with shape ``(T, n)``; rounds and nodes are 0-based in memory.
On disk (CSV) rounds are written 1-based, nodes 0-based.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from dolr.loss import predict, random_ball_vector

MAX_RANK_ATTEMPTS = 1000
MIN_COVARIATE_NORM = 1e-6


@dataclass(frozen=True)
class Sample:
    h: np.ndarray
    z: float


@dataclass
class DataTensor:
    h: np.ndarray
    z: np.ndarray
    mode: str = "oblivious"
    seed: int | None = None
    alpha_h: float | None = None
    alpha_z: float | None = None
    sigma_noise: float = 0.0
    y_star: np.ndarray | None = None

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.h.ndim != 3 or self.z.shape != self.h.shape[:2]:
            raise ValueError(f"bad shapes h={self.h.shape}, z={self.z.shape}")
        if self.y_star is not None:
            self.y_star = np.asarray(self.y_star, dtype=float)

    @property
    def T(self) -> int:
        return self.h.shape[0]

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[2]

    def sample(self, t: int, i: int) -> Sample:
        return Sample(self.h[t, i], float(self.z[t, i]))

    def round(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        return self.h[t], self.z[t]

    def meta(self) -> dict:
        return {
            "mode": self.mode, "seed": self.seed, "n": self.n, "m": self.m, "T": self.T,
            "alpha_h": self.alpha_h, "alpha_z": self.alpha_z, "sigma_noise": self.sigma_noise,
            "y_star": None if self.y_star is None else self.y_star.tolist(),
        }

    def truncate(self, T: int) -> "DataTensor":
        return DataTensor(self.h[:T], self.z[:T], self.mode, self.seed, self.alpha_h,
                          self.alpha_z, self.sigma_noise, self.y_star)

    def save_npz(self, path: str | Path) -> None:
        np.savez(path, h=self.h, z=self.z, meta=np.array(json.dumps(self.meta())),
                 y_star=np.array([]) if self.y_star is None else self.y_star)

    @classmethod
    def load_npz(cls, path: str | Path) -> "DataTensor":
        with np.load(path) as f:
            meta = json.loads(str(f["meta"]))
            y_star = f["y_star"] if meta["y_star"] is not None else None
            return cls(f["h"], f["z"], meta["mode"], meta["seed"], meta["alpha_h"],
                       meta["alpha_z"], meta["sigma_noise"], y_star)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.meta()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "i"] + [f"h_{k + 1}" for k in range(self.m)] + ["z"])
        for t in range(self.T):
            for i in range(self.n):
                w.writerow([t + 1, i] + [f"{v:.17g}" for v in self.h[t, i]] + [f"{self.z[t, i]:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DataTensor":
        lines = text.splitlines()
        meta = json.loads(lines[0][2:])
        h = np.zeros((meta["T"], meta["n"], meta["m"]))
        z = np.zeros((meta["T"], meta["n"]))
        for row in csv.reader(lines[2:]):
            t, i = int(row[0]) - 1, int(row[1])
            h[t, i] = [float(v) for v in row[2:-1]]
            z[t, i] = float(row[-1])
        return cls(h, z, meta["mode"], meta["seed"], meta["alpha_h"], meta["alpha_z"],
                   meta["sigma_noise"], meta["y_star"])


def _ball_covariates(rng: np.random.Generator, shape: tuple, m: int, alpha_h: float) -> np.ndarray:
    h = random_ball_vector(m, rng, shape) * np.sqrt(alpha_h)
    # U^(1/m) scaling can overshoot by one ulp; keep ||h||^2 <= alpha_h exact
    sq = (h * h).sum(-1)
    over = sq > alpha_h
    if over.any():
        h[over] *= np.sqrt(alpha_h / sq[over])[:, None] * (1 - 1e-15)
    return h


def _ensure_rank(h0: np.ndarray, rng, m, alpha_h, redraw) -> np.ndarray:
    for _ in range(MAX_RANK_ATTEMPTS):
        if np.linalg.matrix_rank(h0) == m:
            return h0
        h0 = redraw(rng)
    raise ValueError(f"could not draw a round with rank(H) = {m}")


def gen_oblivious(n: int, m: int, T: int, alpha_h: float, alpha_z: float, sigma_noise: float,
                  seed: int, y0: np.ndarray | None = None) -> DataTensor:
    """Covariates uniform in the sqrt(alpha_h)-ball, outcomes clamp(h^T y0 + noise, +-alpha_z).

    The hidden ``y0`` defaults to a standard Gaussian draw.  Round 1 is
    redrawn until its covariate matrix has rank ``m``.
    """
    if not n >= m >= 1:
        raise ValueError(f"rank condition needs n >= m >= 1, got n={n}, m={m}")
    if T < 1 or alpha_h <= 0:
        raise ValueError("need T >= 1 and alpha_h > 0")
    rng = np.random.default_rng(seed)
    y0 = rng.standard_normal(m) if y0 is None else np.asarray(y0, dtype=float)
    h = _ball_covariates(rng, (T, n), m, alpha_h)
    h[0] = _ensure_rank(h[0], rng, m, alpha_h, lambda r: _ball_covariates(r, (n,), m, alpha_h))
    z = predict(h, y0) + sigma_noise * rng.standard_normal((T, n))
    z = np.clip(z, -alpha_z, alpha_z)
    return DataTensor(h, z, "oblivious", seed, alpha_h, alpha_z, sigma_noise, y0)


def gen_exact(n: int, m: int, T: int, alpha_h: float, y_star: np.ndarray, seed: int) -> DataTensor:
    """Noise-free data with z = h^T y_star exactly; covariate norms kept >= 1e-6."""
    if not n >= m >= 1:
        raise ValueError(f"rank condition needs n >= m >= 1, got n={n}, m={m}")
    y_star = np.asarray(y_star, dtype=float)
    if y_star.shape != (m,):
        raise ValueError(f"y_star must have shape ({m},)")
    rng = np.random.default_rng(seed)
    h = _ball_covariates(rng, (T, n), m, alpha_h)
    while True:
        small = np.linalg.norm(h, axis=-1) < MIN_COVARIATE_NORM
        if not small.any():
            break
        h[small] = _ball_covariates(rng, (int(small.sum()),), m, alpha_h)
    h[0] = _ensure_rank(h[0], rng, m, alpha_h, lambda r: _ball_covariates(r, (n,), m, alpha_h))
    z = predict(h, y_star)
    return DataTensor(h, z, "exact", seed, alpha_h, None, 0.0, y_star)


class AdaptiveAdversary(Protocol):
    """Round-t sample for a node may depend on that node's past (h, z, x) triples."""

    def next(self, node_id: int, t: int, history: Sequence[tuple[np.ndarray, float, np.ndarray]]) -> Sample:
        ...


@dataclass
class TrackingAdversary:
    """Draws h in the sqrt(alpha_h)-ball and sets z = clamp(h^T x_prev + alpha_z/2, +-alpha_z).

    ``x_prev`` is the node's prediction in the previous round, so the
    adversary keeps pushing the loss away from where the node just was.
    With no history it falls back to a hidden ``y0`` like the oblivious
    generator.  Each node draws from its own stream seeded by (seed, node_id).
    """

    alpha_h: float
    alpha_z: float
    seed: int
    m: int
    block: int = 1024
    _streams: dict = field(default_factory=dict, repr=False)
    _y0: np.ndarray | None = field(default=None, repr=False)

    def _hidden(self) -> np.ndarray:
        if self._y0 is None:
            self._y0 = np.random.default_rng([self.seed, 2**31]).standard_normal(self.m)
        return self._y0

    def _draw_h(self, node_id: int) -> np.ndarray:
        st = self._streams.get(node_id)
        if st is None or st[2] >= self.block:
            rng = st[0] if st else np.random.default_rng([self.seed, node_id])
            h = _ball_covariates(rng, (self.block,), self.m, self.alpha_h)
            st = [rng, h, 0]
            self._streams[node_id] = st
        out = st[1][st[2]]
        st[2] += 1
        return out

    def respond(self, h: np.ndarray, x_prev: np.ndarray | None) -> float:
        base = predict(h, self._hidden()) if x_prev is None else predict(h, x_prev) + self.alpha_z / 2
        return float(np.clip(base, -self.alpha_z, self.alpha_z))

    def next(self, node_id, t, history):
        h = self._draw_h(node_id)
        x_prev = history[-1][2] if history else None
        return Sample(h, self.respond(h, x_prev))

    def next_round(self, t: int, n: int, x_prev: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        """All ``n`` nodes at once; ``x_prev`` is the (n, m) array of last-round predictions.

        Equivalent to calling :meth:`next` for nodes 0..n-1 in order.
        """
        h = np.stack([self._draw_h(i) for i in range(n)])
        base = predict(h, self._hidden()) if x_prev is None else predict(h, x_prev) + self.alpha_z / 2
        return h, np.clip(base, -self.alpha_z, self.alpha_z)


def make_tracking_adversary(alpha_h: float, alpha_z: float, seed: int, m: int) -> TrackingAdversary:
    return TrackingAdversary(alpha_h, alpha_z, seed, m)


def empirical_theta_star(data: DataTensor, y: np.ndarray) -> float:
    """max |h^T y - z| over the data: the residual bound measured post hoc."""
    return float(np.abs(predict(data.h, y) - data.z).max())
