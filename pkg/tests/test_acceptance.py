"""Acceptance suite: one check per criterion, each printed as a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` or directly as a script.
Scaling criteria run the checked-in configs under ``configs/`` through the
experiment harness, so they exercise exactly what ships.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest

from dolr.adversary import DataTensor, gen_exact, gen_oblivious
from dolr.experiment import ExperimentConfig, cmd_run
from dolr.graphs import (build_complete, build_cycle, build_path, build_random_geometric, build_random_regular,
                         max_degree_weights, mix)
from dolr.loss import grad, loss, predict, random_ball_vector, smoothed_loss_mc, two_point_estimate
from dolr.metrics import offline_ls_constrained, offline_ls_unconstrained
from dolr.projection import Ball, Polytope, PolytopeBall, hinge
from dolr.protocol import AlgoParams, NetworkState, local_step_elr, run_round

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS: dict[str, tuple[bool, str]] = {}


def record(name: str, passed: bool, detail: str) -> tuple[bool, str]:
    RESULTS[name] = (passed, detail)
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return passed, detail


def run_config(name, out_dir):
    cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
    cfg.write_traces = False
    cfg.write_series = False
    start = time.perf_counter()
    summary = cmd_run(cfg, Path(out_dir) / name)
    return summary["metrics"], time.perf_counter() - start


def fmt_fit(entry):
    return f"slope={entry['slope']:.3f} r2={entry['r_squared']:.3f}"


# scaling criteria ------------------------------------------------------------------------------

_fif_cache: dict = {}


def fif_metrics(out_dir):
    if "m" not in _fif_cache:
        _fif_cache["m"] = run_config("fif_sublinear", out_dir)
    return _fif_cache["m"]


def check_fif_sublinear(out_dir):
    metrics, secs = fif_metrics(out_dir)
    reg = metrics["regret"]
    ok = reg["slope"] <= 0.85 and reg["r_squared"] >= 0.9 and secs < 60
    return record("1 FIF sublinearity", ok, f"{fmt_fit(reg)} (<= 0.85, r2 >= 0.9), {secs:.1f}s (< 60s)")


def check_bf_sublinear(out_dir):
    metrics, secs = run_config("bf_sublinear", out_dir)
    reg = metrics["regret"]
    ok = reg["slope"] <= 0.85 and secs < 600
    return record("2 BF sublinearity", ok, f"{fmt_fit(reg)} (<= 0.85) over 30 trials, {secs:.1f}s (< 600s)")


def check_bf_aa_tracking(out_dir):
    metrics, secs = run_config("bf_aa_tracking", out_dir)
    reg = metrics["regret"]
    finals = ", ".join(f"{v:.3g}" for v in reg["final"])
    ok = reg["slope"] <= 0.65 and secs < 600
    return record("3 BF-AA sqrt(T) rate", ok,
                  f"{fmt_fit(reg)} (<= 0.65), trial-mean finals [{finals}], {secs:.1f}s (< 600s)")


def check_constrained(out_dir):
    fifc, s1 = run_config("fifc_tradeoff", out_dir)
    bfc, s2 = run_config("bfc_tradeoff", out_dir)
    ok = all(m["regret"]["slope"] <= 0.65 and m["cv"]["slope"] <= 0.85 for m in (fifc, bfc))
    ok = ok and s1 + s2 < 900
    detail = (f"FIFC regret {fmt_fit(fifc['regret'])}, CV {fmt_fit(fifc['cv'])}; "
              f"BFC regret {fmt_fit(bfc['regret'])}, CV {fmt_fit(bfc['cv'])} "
              f"(<= 0.65 / <= 0.85), {s1 + s2:.1f}s (< 900s)")
    return record("4 constrained trade-off", ok, detail)


def check_exact(out_dir):
    fif, s1 = run_config("fif_exact", out_dir)
    elr, s2 = run_config("elr_exact", out_dir)
    ok = fif["regret"]["slope"] <= 0.65 and elr["l1_regret"]["slope"] <= 0.65 and s1 + s2 < 120
    detail = (f"FIF l2 regret {fmt_fit(fif['regret'])}, ELR l1 regret {fmt_fit(elr['l1_regret'])} "
              f"(<= 0.65), {s1 + s2:.1f}s (< 120s)")
    return record("5 exact-regression rates", ok, detail)


def check_disagreement(out_dir):
    metrics, _ = fif_metrics(out_dir)
    dis = metrics["disagreement"]
    return record("8 disagreement sublinearity", dis["slope"] <= 0.35, f"{fmt_fit(dis)} (<= 0.35)")


# estimator identities ----------------------------------------------------------------------------

def random_point(rng, m):
    h = random_ball_vector(m, rng)
    return h, rng.normal(size=m), float(rng.normal())


def check_estimator_identities(_out_dir=None):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    m, eps, draws = 3, 0.1, 100_000

    # (a) mean of the estimator against the finite-difference gradient of the smoothed loss
    worst_a = 0.0
    for k in range(20):
        h, y, z = random_point(rng, m)
        g = rng.standard_normal((draws, m))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
        est = two_point_estimate(h, z, y, u, eps)
        se = est.std(0, ddof=1) / np.sqrt(draws)
        d = 1e-4
        fd = np.array([(smoothed_loss_mc(h, z, y + d * e, eps, draws, k)
                        - smoothed_loss_mc(h, z, y - d * e, eps, draws, k)) / (2 * d) for e in np.eye(m)])
        worst_a = max(worst_a, np.linalg.norm(est.mean(0) - fd) / (3 * np.linalg.norm(se)))
    ok_a = worst_a <= 1.0

    # (b) norm bound on 10^3 random draws
    violations = 0
    for _ in range(1000):
        h, y, z = random_point(rng, m)
        h *= rng.uniform(0.1, 3)
        u = rng.standard_normal(m)
        u /= np.linalg.norm(u)
        e = rng.uniform(1e-3, 1.0)
        g = two_point_estimate(h, z, y, u, e)
        bound = m * np.linalg.norm(grad(h, z, y)) + m * (h @ h) * e
        violations += np.linalg.norm(g) > bound * (1 + 1e-12)
    ok_b = violations == 0

    # (c) smoothing gap |theta_hat - theta| within the bound plus MC error
    worst_c = 0.0
    for k in range(20):
        h, y, z = random_point(rng, m)
        v = random_ball_vector(m, np.random.default_rng(k), draws)
        vals = loss(h, z, y + eps * v)
        est = smoothed_loss_mc(h, z, y, eps, draws, k)
        assert est == pytest.approx(vals.mean(), rel=1e-12)
        gap = abs(est - loss(h, z, y))
        bound = np.linalg.norm(grad(h, z, y)) * eps + (h @ h) * eps ** 2
        worst_c = max(worst_c, gap / (bound + 3 * vals.std(ddof=1) / np.sqrt(draws)))
    ok_c = worst_c <= 1.0

    secs = time.perf_counter() - start
    ok = ok_a and ok_b and ok_c and secs < 30
    detail = (f"(a) worst |mean - grad| / 3 SE = {worst_a:.3f}; (b) {violations} norm-bound violations in 1000; "
              f"(c) worst gap / (bound + 3 SE) = {worst_c:.3f}; {secs:.1f}s (< 30s)")
    return record("6 estimator identities", ok, detail)


# structural invariants -----------------------------------------------------------------------------

def check_structural(_out_dir=None):
    start = time.perf_counter()
    failures = []
    rng = np.random.default_rng(7)

    for n in (2, 3, 5, 8, 12, 20):
        graphs = [build_complete(n), build_path(n), build_cycle(n), build_random_geometric(n, 0.7, n)]
        if n >= 4:
            graphs.append(build_random_regular(n, 3 if n % 2 == 0 else 2, n))
        for g in graphs:
            w = max_degree_weights(g)
            if w.check(g, tol=1e-12):
                failures.append(f"mixing {g.family} n={n}")
            if g.family == "complete" and w.sigma2 != 0.0:
                failures.append(f"sigma2(complete n={n}) = {w.sigma2}")
            v = rng.normal(size=(n, 3)) * 5
            if np.abs(mix(w, v).mean(0) - v.mean(0)).max() > 1e-12:
                failures.append(f"mean preservation {g.family} n={n}")

    poly = Polytope.random(3, 3, 1.0, rng)
    for name, proj in (("ball", Ball(1.0).project), ("polytope-ball", PolytopeBall(poly, 2.0).project)):
        for _ in range(1000):
            x, y = rng.normal(size=(2, 3)) * 3
            px, py = proj(x), proj(y)
            if np.linalg.norm(px - py) > np.linalg.norm(x - y) + 1e-9 or np.abs(proj(px) - px).max() > 1e-9:
                failures.append(f"projection {name}")
                break

    y_star = np.array([0.8, -0.4, 1.1])
    data = gen_exact(5, 3, 300, 1.0, y_star, seed=3)
    w = max_degree_weights(build_path(5))
    params = AlgoParams.derive("ELR", 300)
    state = NetworkState.initial(params, 5, 3, rng.normal(size=(5, 3)) * 2)
    lyap = ((state.x - y_star) ** 2).sum()
    for t in range(300):
        ell = local_step_elr(state.x, data.h[t], data.z[t])
        if np.abs(predict(data.h[t], ell) - data.z[t]).max() > 1e-10:
            failures.append(f"ELR residual round {t}")
            break
        state = run_round(params, state, w, data.h[t], data.z[t])
        nxt = ((state.x - y_star) ** 2).sum()
        if nxt > lyap + 1e-10:
            failures.append(f"ELR Lyapunov round {t}")
            break
        lyap = nxt

    data = gen_oblivious(5, 3, 300, 1.0, 5.0, 0.1, seed=4, y0=np.array([3.0, -2.0, 1.0]))
    params = AlgoParams.derive("FIFC", 300, c=2.0, R=2.0, constraints=poly)
    state = NetworkState.initial(params, 5, 3)
    for t in range(300):
        state = run_round(params, state, w, data.h[t], data.z[t])
        if (np.linalg.norm(state.x, axis=1) > params.R + 1e-12).any():
            failures.append(f"FIFC feasibility round {t}")
            break
        if not np.array_equal(state.mu, hinge(poly.values(state.x)) / params.pi):
            failures.append(f"dual identity round {t}")
            break

    secs = time.perf_counter() - start
    ok = not failures and secs < 30
    detail = "all invariants hold" if not failures else "; ".join(failures)
    return record("7 structural invariants", ok, f"{detail}, {secs:.1f}s (< 30s)")


# offline oracles ------------------------------------------------------------------------------------

def gradient_descent_oracle(data: DataTensor, tol=1e-12, max_iter=5_000_000):
    h = data.h.reshape(-1, data.m)
    z = data.z.reshape(-1)
    a, b = h.T @ h, h.T @ z
    step = 1.0 / np.linalg.eigvalsh(a)[-1]
    y = np.zeros(data.m)
    for _ in range(max_iter):
        y_next = y - step * (a @ y - b)
        if np.linalg.norm(y_next - y) < tol:
            return y_next
        y = y_next
    raise RuntimeError("oracle did not converge")


def grid_oracle(data: DataTensor, radius: float, res=1e-3):
    h = data.h.reshape(-1, 2)
    z = data.z.reshape(-1)
    a, b = h.T @ h, h.T @ z
    axis = np.arange(-radius, radius + res / 2, res)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    inside = g1 ** 2 + g2 ** 2 <= radius ** 2
    # lattice points rarely sit on the circle, so sample the boundary at the same spacing
    angles = np.arange(0.0, 2 * np.pi, res / radius)
    p1 = np.concatenate([g1[inside], radius * np.cos(angles)])
    p2 = np.concatenate([g2[inside], radius * np.sin(angles)])
    vals = 0.5 * (a[0, 0] * p1 ** 2 + 2 * a[0, 1] * p1 * p2 + a[1, 1] * p2 ** 2) - b[0] * p1 - b[1] * p2
    k = np.argmin(vals)
    return np.array([p1[k], p2[k]])


def check_offline_oracles(_out_dir=None):
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    worst_u = 0.0
    for k in range(50):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m, 5))
        T = int(rng.integers(1, 9))
        data = gen_oblivious(n, m, T, 1.0, 5.0, 0.5, seed=k)
        worst_u = max(worst_u, np.abs(offline_ls_unconstrained(data) - gradient_descent_oracle(data)).max())
    worst_c = 0.0
    for k in range(10):
        y0 = rng.normal(size=2) * (0.5 if k < 3 else 3.0)
        data = gen_oblivious(3, 2, 8, 1.0, 10.0, 0.2, seed=100 + k, y0=y0)
        y = offline_ls_constrained(data, Ball(1.0))
        worst_c = max(worst_c, np.abs(y - grid_oracle(data, 1.0)).max())
    secs = time.perf_counter() - start
    ok = worst_u <= 1e-6 and worst_c <= 2e-3 and secs < 60
    detail = (f"unconstrained max err {worst_u:.2e} (<= 1e-6), ball-constrained max err {worst_c:.2e} "
              f"(<= 2e-3), {secs:.1f}s (< 60s)")
    return record("9 offline oracles", ok, detail)


CHECKS = [check_fif_sublinear, check_bf_sublinear, check_bf_aa_tracking, check_constrained, check_exact,
          check_estimator_identities, check_structural, check_disagreement, check_offline_oracles]


@pytest.fixture(scope="module")
def out_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.slow
@pytest.mark.parametrize("check", CHECKS, ids=lambda f: f.__name__.removeprefix("check_"))
def test_criterion(check, out_dir):
    passed, detail = check(out_dir)
    assert passed, detail


if __name__ == "__main__":
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        for check in CHECKS:
            check(tmp)
    print()
    for name, (passed, detail) in RESULTS.items():
        print(f"[{'PASS' if passed else 'FAIL'}] {name}")
