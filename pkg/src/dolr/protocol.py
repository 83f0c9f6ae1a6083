"""The six distributed online regression variants and the round-synchronous runner.

Every node holds a predictor ``x_i`` (and, for constrained variants, a dual
vector ``mu_i``).  One round is: local step -> mix with neighbours ->
variant-specific projection -> dual update.  Local steps broadcast over a
leading node axis, so the same functions serve a single node or the whole
network.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any

import numpy as np

from dolr.adversary import DataTensor
from dolr.graphs import MixingMatrix, mix
from dolr.loss import grad, predict, two_point_estimate, unit_from_gaussian
from dolr.projection import Ball, Polytope, hinge, hinge_subgrad, project_ball

MIN_ELR_NORM = 1e-12


class Variant(str, Enum):
    FIF = "FIF"
    BF = "BF"
    BF_AA = "BF_AA"
    FIFC = "FIFC"
    BFC = "BFC"
    ELR = "ELR"

    @property
    def bandit(self) -> bool:
        return self in (Variant.BF, Variant.BF_AA, Variant.BFC)

    @property
    def constrained(self) -> bool:
        return self in (Variant.FIFC, Variant.BFC)


def bf_kappa_threshold(n: int, m: int, alpha_h: float) -> float:
    """Lower bound 2 n m^2 alpha_h / (n - alpha_h) on kappa for bandit feedback."""
    if alpha_h >= n:
        return math.inf
    return 2 * n * m * m * alpha_h / (n - alpha_h)


@dataclass
class Issue:
    level: str  # "error" or "warning"
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


@dataclass
class AlgoParams:
    """Variant tag plus every tuning scalar, with step sizes fixed by the horizon T.

    Use :meth:`derive` to fill in the horizon-dependent constants.
    """

    variant: Variant
    T: int
    beta: float | None = None
    gamma: float | None = None
    kappa: float | None = None
    c: float | None = None
    alpha_h: float | None = None
    eps: float | None = None
    xi: float | None = None
    eta: float | None = None
    pi: float | None = None
    R: float | None = None
    r: float | None = None
    decision_set: Any = None
    constraints: Polytope | None = None

    @classmethod
    def derive(cls, variant: Variant | str, T: int, *, n: int | None = None, m: int | None = None,
               **given) -> "AlgoParams":
        """Fill defaults and derived constants for ``variant`` at horizon ``T``.

        Explicitly given values win over defaults; ``eta``, ``eps``, ``xi``
        and ``pi`` are derived only when not given.
        """
        variant = Variant(variant)
        p = cls(variant, int(T), **given)
        if variant is Variant.FIF:
            p.beta = 0.75 if p.beta is None else p.beta
            _need(p, "alpha_h")
            p.eta = _default(p.eta, 1.0 / (p.alpha_h * T ** p.beta))
        elif variant is Variant.BF:
            p.beta = 0.75 if p.beta is None else p.beta
            _need(p, "alpha_h")
            if p.kappa is None:
                if n is None or m is None:
                    raise ValueError("kappa default needs n and m")
                p.kappa = 1.1 * bf_kappa_threshold(n, m, p.alpha_h)
                if not math.isfinite(p.kappa):
                    raise ValueError("alpha_h >= n: give kappa explicitly")
            p.eps = _default(p.eps, 1.0 / math.sqrt(T))
            p.eta = _default(p.eta, 1.0 / (p.kappa * T ** p.beta))
        elif variant is Variant.BF_AA:
            p.beta = 0.5 if p.beta is None else p.beta
            p.kappa = 1.0 if p.kappa is None else p.kappa
            _need(p, "r")
            p.R = p.r if p.R is None else p.R
            p.eps = _default(p.eps, 1.0 / math.sqrt(T))
            p.xi = p.xi if p.xi is not None else p.eps / p.r
            p.eta = _default(p.eta, 1.0 / (p.kappa * T ** p.beta))
            if p.decision_set is None:
                p.decision_set = Ball(p.R)
        elif variant in (Variant.FIFC, Variant.BFC):
            p.beta = 0.5 if p.beta is None else p.beta
            _need(p, "c", "R", "constraints")
            k_i = p.constraints.bound
            p.eta = _default(p.eta, 1.0 / (p.c * p.constraints.s * k_i * k_i * T ** p.beta))
            p.pi = _default(p.pi, 1.0 / T ** p.beta)
            if variant is Variant.BFC:
                p.gamma = p.beta if p.gamma is None else p.gamma
                p.eps = _default(p.eps, 1.0 / T ** p.gamma)
                p.xi = p.xi if p.xi is not None else 1.0 / (p.R * T ** p.gamma)
        return p

    def check(self, n: int, m: int) -> list[Issue]:
        """Violations of the variant's parameter hypotheses; never raises."""
        issues: list[Issue] = []

        def err(msg):
            issues.append(Issue("error", msg))

        v = self.variant
        if self.T < 1:
            err(f"horizon T must be >= 1, got {self.T}")
        if v is not Variant.ELR:
            if self.eta is None or not self.eta > 0:
                err(f"step size eta must be positive, got {self.eta}")
            if self.beta is not None and not 0 < self.beta <= 1:
                err(f"beta must lie in (0, 1], got {self.beta}")
        if v is Variant.FIF and (self.alpha_h is None or self.alpha_h <= 0):
            err("FIF needs alpha_h > 0")
        if v is Variant.BF:
            if self.alpha_h is not None and self.alpha_h >= n:
                issues.append(Issue("warning", f"alpha_h = {self.alpha_h} >= n = {n}: the bandit regret "
                                               "bound assumes alpha_h < n; the algorithm still runs"))
            elif self.alpha_h is not None and self.kappa is not None:
                bound = bf_kappa_threshold(n, m, self.alpha_h)
                if not self.kappa > bound:
                    err(f"kappa = {self.kappa} must exceed 2 n m^2 alpha_h / (n - alpha_h) = {bound:.6g}")
        if v.bandit and (self.eps is None or not self.eps > 0):
            err(f"exploration radius eps must be positive, got {self.eps}")
        if v is Variant.BF_AA:
            if self.r is None or self.R is None or not 0 < self.r <= self.R:
                err(f"need 0 < r <= R, got r={self.r}, R={self.R}")
            else:
                if self.T < math.ceil(1 / self.r ** 2):
                    err(f"T = {self.T} must be >= ceil(1/r^2) = {math.ceil(1 / self.r ** 2)}")
            if self.xi is None or not 0 <= self.xi < 1:
                err(f"shrinkage xi must lie in [0, 1), got {self.xi}")
        if v.constrained:
            if self.c is None or not self.c > 1:
                err(f"c must be > 1, got {self.c}")
            if self.constraints is None:
                err("constrained variant needs constraints")
            elif self.constraints.m != m:
                err(f"constraints have dimension {self.constraints.m}, data has {m}")
            if self.pi is None or not self.pi > 0:
                err(f"pi must be positive, got {self.pi}")
            if self.R is None or not self.R > 0:
                err(f"R must be positive, got {self.R}")
        if v is Variant.BFC:
            if self.gamma is None or self.beta is None or self.gamma < self.beta:
                err(f"gamma must be >= beta, got gamma={self.gamma}, beta={self.beta}")
            if self.xi is None or not 0 <= self.xi < 1:
                err(f"shrinkage xi must lie in [0, 1), got {self.xi}")
            elif self.eps is not None and self.R is not None and self.eps > self.xi * self.R * (1 + 1e-12):
                issues.append(Issue("warning", "eps > xi R: bandit query points may leave B_R"))
        return issues

    def snapshot(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, Variant):
                val = val.value
            elif isinstance(val, Polytope):
                val = val.constraints.tolist()
            elif isinstance(val, Ball):
                val = {"ball": val.radius}
            elif val is not None and not isinstance(val, (int, float, str)):
                val = repr(val)
            out[f.name] = val
        return out


def _default(value, fallback):
    return fallback if value is None else value


def _need(p: AlgoParams, *names: str) -> None:
    missing = [k for k in names if getattr(p, k) is None]
    if missing:
        raise ValueError(f"{p.variant.value} needs {', '.join(missing)}")


@dataclass
class NodeState:
    x: np.ndarray
    mu: np.ndarray | None = None
    rng: np.random.Generator | None = None


@dataclass
class NetworkState:
    """Stacked node states: ``x`` is (n, m), ``mu`` is (n, s) or None."""

    x: np.ndarray
    mu: np.ndarray | None = None
    rngs: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def node(self, i: int) -> NodeState:
        return NodeState(self.x[i], None if self.mu is None else self.mu[i],
                         self.rngs[i] if self.rngs else None)

    @classmethod
    def initial(cls, params: AlgoParams, n: int, m: int, x_init=None, seed: int = 0) -> "NetworkState":
        x = np.zeros((n, m)) if x_init is None else np.array(np.broadcast_to(x_init, (n, m)), dtype=float)
        mu = np.zeros((n, params.constraints.s)) if params.variant.constrained else None
        return cls(x, mu, node_streams(seed, n))


def node_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Private stream per node, keyed by (seed, node_id)."""
    return [np.random.default_rng([seed, i]) for i in range(n)]


# local steps ----------------------------------------------------------------

def local_step_fif(x, h, z, eta: float) -> np.ndarray:
    """x - eta * h (h^T x - z)."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    return np.asarray(x, dtype=float) - eta * grad(h, z, x)


def local_step_bf(x, h, z, u, eta: float, eps: float) -> np.ndarray:
    """x - eta * g where g is the two-point estimate along the unit direction ``u``."""
    return np.asarray(x, dtype=float) - eta * two_point_estimate(h, z, x, u, eps)


def constraint_term(x, mu, constraints: Polytope) -> np.ndarray:
    """sum_q mu_q * subgrad [k_q^T x]_+."""
    sub = hinge_subgrad(constraints.constraints, x)  # (..., s, m)
    return (np.asarray(mu, dtype=float)[..., None] * sub).sum(axis=-2)


def local_step_constrained(x, h, z, mu, eta: float, constraints: Polytope,
                           u=None, eps: float | None = None) -> np.ndarray:
    """Gradient step on the augmented Lagrangian in the primal variable.

    Full-information when ``u`` is None, otherwise the data gradient is
    replaced by the two-point estimate along ``u``.
    """
    if mu is None or constraints is None:
        raise ValueError("constrained step needs dual vector and constraints")
    data_grad = grad(h, z, x) if u is None else two_point_estimate(h, z, x, u, eps)
    return np.asarray(x, dtype=float) - eta * (data_grad + constraint_term(x, mu, constraints))


def dual_update(x_next, constraints: Polytope, pi: float) -> np.ndarray:
    """mu_q = [k_q^T x_next]_+ / pi."""
    if not pi > 0:
        raise ValueError(f"pi must be positive, got {pi}")
    return hinge(constraints.values(x_next)) / pi


def local_step_elr(x, h, z) -> np.ndarray:
    """Kaczmarz step: project x onto the hyperplane {y : h^T y = z}.

    Nodes whose covariate norm is below 1e-12 keep x unchanged.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    sq = (h * h).sum(-1)
    ok = sq >= MIN_ELR_NORM ** 2
    scale = np.where(ok, residual_safe(h, z, x) / np.where(ok, sq, 1.0), 0.0)
    return x - h * np.asarray(scale)[..., None]


def residual_safe(h, z, x):
    return predict(h, x) - np.asarray(z, dtype=float)


# one round ------------------------------------------------------------------

def draw_directions(state: NetworkState, m: int) -> np.ndarray:
    """One uniform unit vector per node from that node's private stream."""
    return unit_from_gaussian(np.stack([rng.standard_normal(m) for rng in state.rngs]))


def local_steps(params: AlgoParams, state: NetworkState, h, z, u=None) -> np.ndarray:
    """Every node's intermediate vector for one round, shape (n, m)."""
    v = params.variant
    x = state.x
    if v is Variant.FIF:
        return local_step_fif(x, h, z, params.eta)
    if v in (Variant.BF, Variant.BF_AA):
        return local_step_bf(x, h, z, u, params.eta, params.eps)
    if v is Variant.FIFC:
        return local_step_constrained(x, h, z, state.mu, params.eta, params.constraints)
    if v is Variant.BFC:
        return local_step_constrained(x, h, z, state.mu, params.eta, params.constraints, u, params.eps)
    if v is Variant.ELR:
        return local_step_elr(x, h, z)
    raise ValueError(f"unknown variant {v}")


def project_step(params: AlgoParams, x: np.ndarray) -> np.ndarray:
    v = params.variant
    if v is Variant.BF_AA:
        return params.decision_set.shrink(params.xi).project(x)
    if v is Variant.FIFC:
        return project_ball(x, params.R)
    if v is Variant.BFC:
        return project_ball(x, (1 - params.xi) * params.R)
    return x


def advance(params: AlgoParams, state: NetworkState, w: MixingMatrix, h, z, u=None) -> NetworkState:
    """Local step, mix, project, dual update; returns the state for the next round."""
    ell = local_steps(params, state, h, z, u)
    x_next = project_step(params, mix(w, ell))
    mu_next = dual_update(x_next, params.constraints, params.pi) if params.variant.constrained else None
    return NetworkState(x_next, mu_next, state.rngs)


def run_round(params: AlgoParams, state: NetworkState, w: MixingMatrix, h, z) -> NetworkState:
    """Execute one round on the round's samples ``h`` (n, m), ``z`` (n,).

    Bandit variants draw one unit vector per node from the node streams and
    query both points against this same round's samples.
    """
    u = draw_directions(state, state.x.shape[1]) if params.variant.bandit else None
    return advance(params, state, w, h, z, u)


# full runs --------------------------------------------------------------------

@dataclass
class RunTrace:
    """Per-round, per-node record of a run.

    ``predictors[t, i]`` is x_i(t), the predictor node i uses in round t
    (before that round's update).  ``network_loss[t, i]`` is
    sum_j theta_{j,t}(x_i(t)) against every node's sample of the round.
    """

    params: dict
    network_loss: np.ndarray
    disagreement_by_node: np.ndarray
    cv_by_node: np.ndarray
    data: DataTensor
    predictors: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.network_loss.shape[0]

    @property
    def n(self) -> int:
        return self.network_loss.shape[1]

    @property
    def disagreement(self) -> np.ndarray:
        """sum_i ||x_i(t) - x_avg(t)|| per round."""
        return self.disagreement_by_node.sum(axis=1)

    @property
    def cv_increment(self) -> np.ndarray:
        """sum_i sum_q [k_q^T x_i(t)]_+ per round."""
        return self.cv_by_node.sum(axis=1)

    def to_csv(self) -> str:
        """Rows (t, i, x_1..x_m, network_loss, disagreement, cv_increment); t is 1-based.

        The last two columns are node i's share of the round totals.
        """
        from dolr.export import trace_to_csv
        return trace_to_csv(self)


def network_losses(data: DataTensor, predictors: np.ndarray) -> np.ndarray:
    """sum_j theta_{j,t}(x_i(t)) for every (t, i); ``predictors`` is (T, n, m)."""
    # residuals r[t, i, j] = h_j(t)^T x_i(t) - z_j(t)
    r = predict(data.h[:, None, :, :], predictors[:, :, None, :]) - data.z[:, None, :]
    return 0.5 * (r * r).sum(axis=-1)


def disagreement_by_node(predictors: np.ndarray) -> np.ndarray:
    avg = predictors.mean(axis=1, keepdims=True)
    return np.linalg.norm(predictors - avg, axis=-1)


def run(params: AlgoParams, w: MixingMatrix, source, x_init=None, seed: int = 0,
        keep_predictors: bool = True) -> RunTrace:
    """Run ``params.T`` rounds over mixing matrix ``w``.

    ``source`` is a :class:`DataTensor` (oblivious or exact data) or an
    adaptive adversary exposing ``next_round(t, n, x_prev)``.  The realized
    samples are stored on the trace either way.
    """
    T = params.T
    n = w.n
    adaptive = not isinstance(source, DataTensor)
    if adaptive:
        m = source.m
    else:
        if source.n != n:
            raise ValueError(f"data has {source.n} nodes, mixing matrix has {n}")
        if source.T < T:
            raise ValueError(f"data has {source.T} rounds, horizon is {T}")
        m = source.m
    if params.variant is Variant.BF and params.alpha_h is not None and params.alpha_h >= n:
        warnings.warn(f"alpha_h = {params.alpha_h} >= n = {n}; bandit regret bound hypothesis fails",
                      stacklevel=2)

    state = NetworkState.initial(params, n, m, x_init, seed)
    xs = np.empty((T, n, m))
    hs = np.empty((T, n, m))
    zs = np.empty((T, n))
    gauss = None
    if params.variant.bandit:
        # a node's stream yields the same values drawn in one block or round by round
        gauss = np.stack([rng.standard_normal((T, m)) for rng in state.rngs], axis=1)

    x_prev = None
    for t in range(T):
        xs[t] = state.x
        if adaptive:
            h, z = source.next_round(t, n, x_prev)
        else:
            h, z = source.h[t], source.z[t]
        hs[t], zs[t] = h, z
        u = unit_from_gaussian(gauss[t]) if gauss is not None else None
        x_prev = state.x
        state = advance(params, state, w, h, z, u)

    if adaptive:
        data = DataTensor(hs, zs, "adaptive", getattr(source, "seed", None),
                          getattr(source, "alpha_h", None), getattr(source, "alpha_z", None))
    else:
        data = source.truncate(T)

    cons = params.constraints
    cv = cons.violation(xs) if cons is not None else np.zeros((T, n))
    return RunTrace(
        params=params.snapshot(),
        network_loss=network_losses(data, xs),
        disagreement_by_node=disagreement_by_node(xs),
        cv_by_node=cv,
        data=data,
        predictors=xs if keep_predictors else None,
    )
