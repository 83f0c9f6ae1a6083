"""Communication graphs, mixing matrices and the one-round averaging step.

Edges are ordered pairs ``(j, i)`` meaning node ``j`` sends to node ``i``;
node ids are 0-based.  Self-weights live only in the mixing matrix.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

FAMILIES = ("complete", "path", "cycle", "random_geometric", "random_regular", "custom")

MAX_ATTEMPTS = 1000
DENSE_SVD_MAX_N = 64


class GraphConstructionError(RuntimeError):
    """A randomized builder could not produce a strongly connected graph."""


class ConvergenceError(RuntimeError):
    pass


def _reachable(n: int, adj: list[list[int]], start: int = 0) -> int:
    seen = [False] * n
    seen[start] = True
    queue = deque([start])
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count


def is_strongly_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    """Forward and backward reachability from node 0 both cover every node."""
    if n <= 1:
        return True
    fwd: list[list[int]] = [[] for _ in range(n)]
    bwd: list[list[int]] = [[] for _ in range(n)]
    for j, i in edges:
        fwd[j].append(i)
        bwd[i].append(j)
    return _reachable(n, fwd) == n and _reachable(n, bwd) == n


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]]
    family: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"graph needs at least one node, got n={self.n}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown graph family {self.family!r}")
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if j == i:
                raise ValueError(f"self-loop ({j}, {i}) not allowed; self-weights live in the matrix")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge ({j}, {i}) out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)
        if not is_strongly_connected(self.n, edges):
            raise ValueError("graph is not strongly connected")

    def in_neighbors(self, i: int) -> list[int]:
        """N_i = {j : (j, i) in E}, sorted."""
        return sorted(j for j, k in self.edges if k == i)

    def in_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for _, i in self.edges:
            deg[i] += 1
        return deg

    @property
    def is_symmetric(self) -> bool:
        return all((i, j) in self.edges for j, i in self.edges)

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in sorted(self.edges)], "family": self.family}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Graph":
        return cls(int(doc["n"]), frozenset(tuple(e) for e in doc["edges"]), doc.get("family", "custom"))

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_dict(json.loads(text))


def _undirected(n: int, pairs: Iterable[tuple[int, int]], family: str) -> Graph:
    edges = set()
    for a, b in pairs:
        edges.add((a, b))
        edges.add((b, a))
    return Graph(n, frozenset(edges), family)


def build_complete(n: int) -> Graph:
    return Graph(n, frozenset((j, i) for j in range(n) for i in range(n) if i != j), "complete")


def build_path(n: int) -> Graph:
    if n < 2:
        raise ValueError(f"path graph needs n >= 2, got {n}")
    return _undirected(n, ((k, k + 1) for k in range(n - 1)), "path")


def build_cycle(n: int) -> Graph:
    if n < 2:
        raise ValueError(f"cycle graph needs n >= 2, got {n}")
    return _undirected(n, ((k, (k + 1) % n) for k in range(n)), "cycle")


def build_random_geometric(n: int, radius: float, seed: int, max_attempts: int = MAX_ATTEMPTS) -> Graph:
    """Nodes uniform in the unit square, linked when within ``radius``.

    Resamples positions with sub-seed ``(seed, attempt)`` until the graph is
    connected.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        pos = rng.random((n, 2))
        dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if dist[a, b] <= radius]
        edges = {(a, b) for a, b in pairs} | {(b, a) for a, b in pairs}
        if is_strongly_connected(n, edges):
            return Graph(n, frozenset(edges), "random_geometric")
    raise GraphConstructionError(
        f"no connected geometric graph with n={n}, radius={radius} in {max_attempts} attempts")


def _pairing(n: int, k: int, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    stubs = np.repeat(np.arange(n), k)
    rng.shuffle(stubs)
    pairs = set()
    for a, b in zip(stubs[0::2], stubs[1::2]):
        a, b = int(min(a, b)), int(max(a, b))
        if a == b or (a, b) in pairs:
            return None
        pairs.add((a, b))
    return pairs


def build_random_regular(n: int, k: int, seed: int, max_attempts: int = MAX_ATTEMPTS) -> Graph:
    """Uniform random simple k-regular graph (pairing model with rejection)."""
    if k < 1 or k >= n:
        raise ValueError(f"need 1 <= k < n, got n={n}, k={k}")
    if (n * k) % 2:
        raise ValueError(f"n*k must be even, got n={n}, k={k}")
    for attempt in range(max_attempts):
        pairs = _pairing(n, k, np.random.default_rng([seed, attempt]))
        if pairs is None:
            continue
        edges = pairs | {(b, a) for a, b in pairs}
        if is_strongly_connected(n, edges):
            return Graph(n, frozenset(edges), "random_regular")
    raise GraphConstructionError(
        f"no connected {k}-regular graph on {n} nodes in {max_attempts} attempts")


def build_graph(family: str, n: int, seed: int = 0, **params) -> Graph:
    if family == "complete":
        return build_complete(n)
    if family == "path":
        return build_path(n)
    if family == "cycle":
        return build_cycle(n)
    if family == "random_geometric":
        return build_random_geometric(n, params["radius"], seed)
    if family == "random_regular":
        return build_random_regular(n, params["k"], seed)
    raise ValueError(f"cannot build graph family {family!r}")


def second_singular_value(w: np.ndarray, method: str = "auto", tol: float = 1e-10,
                          max_iter: int = 10_000) -> float:
    """Largest singular value of ``w - 11^T/n``.

    For a doubly stochastic ``w`` this is its second-largest singular value.
    ``method`` is ``"dense"`` (full SVD), ``"power"`` (power iteration on
    ``A^T A``) or ``"auto"`` (dense up to n = 64).
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if n == 1:
        return 0.0
    a = w - np.full((n, n), 1.0 / n)
    if method == "auto":
        method = "dense" if n <= DENSE_SVD_MAX_N else "power"
    if method == "dense":
        return float(np.linalg.svd(a, compute_uv=False)[0])
    if method != "power":
        raise ValueError(f"unknown method {method!r}")

    ata = a.T @ a
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        u = ata @ v
        lam = float(v @ u)
        norm_u = np.linalg.norm(u)
        if norm_u <= 1e-300:
            return 0.0
        # eigenvalue error is O(residual^2 / gap), so a 1e-10 residual is ample
        if np.linalg.norm(u - lam * v) <= tol * max(lam, 1e-300):
            return float(np.sqrt(max(lam, 0.0)))
        v = u / norm_u
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


@dataclass(frozen=True)
class MixingMatrix:
    """Nonnegative doubly stochastic weights aligned with a graph."""

    w: np.ndarray
    sigma2: float = field(default=float("nan"))

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"mixing matrix must be square, got shape {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if np.isnan(self.sigma2):
            object.__setattr__(self, "sigma2", second_singular_value(w))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def check(self, graph: Graph | None = None, tol: float = 1e-12) -> list[str]:
        """Return the list of violated mixing-matrix invariants (empty if valid)."""
        problems = []
        w = self.w
        if (w < 0).any():
            problems.append("negative entry")
        if np.abs(w.sum(axis=1) - 1).max() > tol:
            problems.append("row sums differ from 1")
        if np.abs(w.sum(axis=0) - 1).max() > tol:
            problems.append("column sums differ from 1")
        if not self.sigma2 < 1:
            problems.append(f"sigma2 = {self.sigma2} is not < 1")
        if graph is not None:
            pattern = np.eye(self.n, dtype=bool)
            for j, i in graph.edges:
                pattern[i, j] = True
            if not np.array_equal(w > 0, pattern):
                problems.append("zero pattern does not match the graph")
        return problems


def max_degree_weights(g: Graph) -> MixingMatrix:
    """w_ij = 1/(1+d_max) on edges, w_ii = 1 - d_i/(1+d_max)."""
    deg = g.in_degrees()
    d_max = int(deg.max()) if g.n > 1 else 0
    w = np.zeros((g.n, g.n))
    for j, i in g.edges:
        w[i, j] = 1.0 / (1 + d_max)
    w[np.diag_indices(g.n)] = 1.0 - deg / (1 + d_max)
    if g.n > 1 and d_max == g.n - 1 and (deg == d_max).all():
        # complete graph: every entry is exactly 1/n
        w[:] = 1.0 / g.n
    return MixingMatrix(w)


def mix(w: MixingMatrix | np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """One averaging round: ``out[i] = sum_j w[i, j] * vectors[j]``."""
    wm = w.w if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] != wm.shape[1]:
        raise ValueError(f"expected {wm.shape[1]} row vectors, got array of shape {vectors.shape}")
    return wm @ vectors
