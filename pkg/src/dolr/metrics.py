"""Offline comparators, regret and violation functionals, trial averaging, exponent fits.

The metric pipeline evaluates each node's predictor against every node's
sample of a round; the protocol itself never sees that global data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from dolr.adversary import DataTensor
from dolr.graphs import ConvergenceError
from dolr.loss import loss, predict
from dolr.projection import PINV_RCOND, DecisionSet
from dolr.protocol import RunTrace

MIN_FIT_POINTS = 4
FIT_MIN_HORIZON = 64


def normal_equations(data: DataTensor) -> tuple[np.ndarray, np.ndarray]:
    """(sum h h^T, sum h z) over all nodes and rounds."""
    h = data.h.reshape(-1, data.m)
    z = data.z.reshape(-1)
    return h.T @ h, h.T @ z


def total_loss(data: DataTensor, y: np.ndarray) -> float:
    return float(loss(data.h, data.z, np.asarray(y, dtype=float)).sum())


def round_losses(data: DataTensor, y: np.ndarray) -> np.ndarray:
    """sum_j theta_{j,t}(y) for each round t."""
    return loss(data.h, data.z, np.asarray(y, dtype=float)).sum(axis=1)


def offline_ls_unconstrained(data: DataTensor) -> np.ndarray:
    """Minimizer of the total square loss; minimum-norm solution when singular."""
    a, b = normal_equations(data)
    try:
        y = np.linalg.solve(a, b)
        if np.isfinite(y).all() and np.linalg.cond(a) < 1 / PINV_RCOND:
            return y
    except np.linalg.LinAlgError:
        pass
    return np.linalg.pinv(a, rcond=PINV_RCOND, hermitian=True) @ b


def offline_ls_constrained(data: DataTensor, decision_set: DecisionSet, tol: float = 1e-10,
                           max_iter: int = 1_000_000) -> np.ndarray:
    """Projected gradient descent on the total loss, step 1 / lambda_max(sum h h^T)."""
    a, b = normal_equations(data)
    lam_max = float(np.linalg.eigvalsh(a)[-1])
    if lam_max <= 0:
        return decision_set.project(np.zeros(data.m))
    step = 1.0 / lam_max
    y = decision_set.project(offline_ls_unconstrained(data))
    for _ in range(max_iter):
        y_next = decision_set.project(y - step * (a @ y - b))
        if np.linalg.norm(y_next - y) < tol:
            return y_next
        y = y_next
    raise ConvergenceError(f"projected gradient did not converge in {max_iter} iterations")


def _trace_data(trace: RunTrace, data: DataTensor | None) -> DataTensor:
    data = trace.data if data is None else data
    if data.T < trace.T:
        raise ValueError(f"data covers {data.T} rounds, trace has {trace.T}")
    return data.truncate(trace.T)


def regret_ls(trace: RunTrace, y_star: np.ndarray, data: DataTensor | None = None) -> np.ndarray:
    """Cumulative regret per node, shape (T, n); the last row is the final regret."""
    data = _trace_data(trace, data)
    y_star = np.asarray(y_star, dtype=float)
    if y_star.shape != (data.m,):
        raise ValueError(f"comparator has shape {y_star.shape}, expected ({data.m},)")
    per_round = trace.network_loss - round_losses(data, y_star)[:, None]
    return np.cumsum(per_round, axis=0)


def regret_l1(trace: RunTrace, data: DataTensor | None = None) -> np.ndarray:
    """Cumulative sum_j |h_j^T x_i - z_j| / ||h_j|| per node, shape (T, n)."""
    data = _trace_data(trace, data)
    if trace.predictors is None:
        raise ValueError("l1 regret needs the predictor history")
    norms = np.linalg.norm(data.h, axis=-1)
    if (norms == 0).any():
        raise ValueError("zero-norm covariate in l1 regret")
    x = trace.predictors
    r = predict(data.h[:, None, :, :], x[:, :, None, :]) - data.z[:, None, :]
    per_round = (np.abs(r) / norms[:, None, :]).sum(axis=-1)
    return np.cumsum(per_round, axis=0)


def cumulative_violation(trace: RunTrace) -> np.ndarray:
    """Running sum over rounds of sum_i sum_q [k_q^T x_i(t)]_+."""
    return np.cumsum(trace.cv_increment)


def cumulative_disagreement(trace: RunTrace) -> np.ndarray:
    return np.cumsum(trace.disagreement)


def trial_seed(master_seed: int, k: int) -> int:
    """Independent seed for trial ``k``, derived from (master_seed, k)."""
    return int(np.random.SeedSequence([master_seed, k]).generate_state(1, np.uint64)[0])


@dataclass
class TrialStats:
    mean: np.ndarray
    stderr: np.ndarray
    num_trials: int


def expected_over_trials(experiment: Callable[[int], np.ndarray], num_trials: int,
                         master_seed: int) -> TrialStats:
    """Mean and standard error of ``experiment(seed)`` over seeded trials."""
    if num_trials < 2:
        raise ValueError("need at least two trials for a standard error")
    results = np.stack([np.asarray(experiment(trial_seed(master_seed, k)), dtype=float)
                        for k in range(num_trials)])
    return summarize_trials(results)


def summarize_trials(results: np.ndarray) -> TrialStats:
    results = np.asarray(results, dtype=float)
    k = results.shape[0]
    stderr = results.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.zeros(results.shape[1:])
    return TrialStats(results.mean(axis=0), stderr, k)


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    horizons: list[int]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
                "horizons": list(self.horizons)}


def fit_exponent(horizons: Sequence[float], finals: Sequence[float],
                 min_horizon: float = FIT_MIN_HORIZON) -> ExponentFit:
    """Least-squares slope of log(final) against log(T).

    Horizons below ``min_horizon`` are dropped; finals are clamped below at
    1e-12 before taking logs.
    """
    t = np.asarray(horizons, dtype=float)
    f = np.asarray(finals, dtype=float)
    if t.shape != f.shape:
        raise ValueError("horizons and finals differ in length")
    keep = t >= min_horizon
    t, f = t[keep], f[keep]
    if len(t) < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} horizons >= {min_horizon}, got {len(t)}")
    lx = np.log(t)
    ly = np.log(np.maximum(f, 1e-12))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), [int(v) for v in t])
