import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dolr.loss import (grad, loss, predict, random_ball_vector, random_unit_vector, residual,
                       smoothed_loss_mc, two_point_estimate)

# rounded so that squared residuals never underflow
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 6))


def vec(m):
    return arrays(np.float64, m, elements=finite)


@pytest.mark.parametrize("h, z, y, expected", [
    ((1, 0), 0, (2, 3), 2.0),
    ((1, 1), 1, (1, 1), 0.5),
    ((1, 2), 7, (1, 3), 0.0),
])
def test_loss_values(h, z, y, expected):
    assert loss(np.array(h, float), z, np.array(y, float)) == expected


def test_grad_value():
    np.testing.assert_array_equal(grad(np.array([1.0, 0]), 0.0, np.array([2.0, 3])), [2.0, 0.0])


def test_grad_zero_on_solution_hyperplane():
    h = np.array([0.3, -1.2, 2.0])
    y = np.array([1.0, 0.5, -0.25])
    assert np.all(grad(h, predict(h, y), y) == 0)


def test_predict_dimension_mismatch():
    with pytest.raises(ValueError):
        predict(np.ones(3), np.ones(2))


def test_broadcasting():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(4, 5, 3))
    z = rng.normal(size=(4, 5))
    y = rng.normal(size=3)
    out = loss(h, z, y)
    assert out.shape == (4, 5)
    assert out[2, 1] == pytest.approx(0.5 * (h[2, 1] @ y - z[2, 1]) ** 2)
    assert grad(h, z, y).shape == (4, 5, 3)


def test_grad_matches_central_differences(rng):
    for _ in range(100):
        m = rng.integers(1, 6)
        h, y = rng.normal(size=m), rng.normal(size=m)
        z = rng.normal()
        step = 1e-5
        fd = np.array([(loss(h, z, y + step * e) - loss(h, z, y - step * e)) / (2 * step)
                       for e in np.eye(m)])
        g = grad(h, z, y)
        assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(vec(m), finite, vec(m))))
def test_loss_nonnegative_and_zero_iff_solved(args):
    h, z, y = args
    val = loss(h, z, y)
    assert val >= 0
    assert (val == 0) == (residual(h, z, y) == 0)


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(vec(m), finite, vec(m))))
def test_self_boundedness(args):
    h, z, y = args
    g = grad(h, z, y)
    assert g @ g <= 2 * (h @ h) * loss(h, z, y) * (1 + 1e-12) + 1e-300


# random directions ---------------------------------------------------------------

def test_unit_vector_one_dim(rng):
    draws = {float(random_unit_vector(1, rng)[0]) for _ in range(50)}
    assert draws == {1.0, -1.0}


@pytest.mark.parametrize("m", [1, 2, 3, 7, 20])
def test_unit_vector_norm(rng, m):
    for _ in range(20):
        assert abs(np.linalg.norm(random_unit_vector(m, rng)) - 1) < 1e-12


@pytest.mark.parametrize("m", [1, 3, 6])
def test_unit_vector_mean_is_zero(m):
    rng = np.random.default_rng(m)
    draws = np.stack([random_unit_vector(m, rng) for _ in range(100_000)])
    assert np.all(np.abs(draws.mean(0)) < 3 / np.sqrt(100_000))


@pytest.mark.parametrize("m", [1, 2, 5])
def test_ball_vectors_inside_and_mean_zero(m):
    v = random_ball_vector(m, np.random.default_rng(1), 100_000)
    assert v.shape == (100_000, m)
    assert (np.linalg.norm(v, axis=1) <= 1 + 1e-12).all()
    assert np.all(np.abs(v.mean(0)) < 3 / np.sqrt(100_000))
    # radial law: P(|v| <= 1/2) = 2^-m
    frac = (np.linalg.norm(v, axis=1) <= 0.5).mean()
    assert abs(frac - 0.5 ** m) < 4 * np.sqrt(0.5 ** m / 100_000)


# two-point estimator -----------------------------------------------------------------

def test_two_point_quadratic_1d():
    g = two_point_estimate(np.array([1.0]), 0.0, np.array([1.0]), np.array([1.0]), 0.1, m=1)
    assert g[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_two_point_is_directional_derivative(rng, m):
    # odd terms cancel for quadratics: g = m (u^T grad) u
    for _ in range(20):
        h, y, u = rng.normal(size=m), rng.normal(size=m), random_unit_vector(m, rng)
        z = rng.normal()
        g = two_point_estimate(h, z, y, u, 0.3)
        np.testing.assert_allclose(g, m * (u @ grad(h, z, y)) * u, rtol=1e-9, atol=1e-12)


def test_two_point_at_minimum_is_small(rng):
    m, eps = 3, 0.05
    for _ in range(100):
        h, y, u = rng.normal(size=m), rng.normal(size=m), random_unit_vector(m, rng)
        g = two_point_estimate(h, predict(h, y), y, u, eps)
        assert np.linalg.norm(g) <= m * (h @ h) * eps + 1e-12


def test_two_point_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        two_point_estimate(np.ones(2), 0.0, np.ones(2), np.array([1.0, 0.0]), 0.0)


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(vec(m), finite, vec(m), vec(m))),
       st.floats(1e-4, 1.0))
def test_two_point_norm_bound(args, eps):
    h, z, y, g_dir = args
    if np.linalg.norm(g_dir) < 1e-6:
        return
    m = h.size
    u = g_dir / np.linalg.norm(g_dir)
    g = two_point_estimate(h, z, y, u, eps)
    bound = m * np.linalg.norm(grad(h, z, y)) + m * (h @ h) * eps
    assert np.linalg.norm(g) <= bound * (1 + 1e-9) + 1e-9


# smoothed loss oracle --------------------------------------------------------------------

def test_smoothed_loss_eps_zero_is_exact():
    h, y = np.array([0.5, -1.0]), np.array([2.0, 1.0])
    assert smoothed_loss_mc(h, 0.3, y, 0.0, 10, 0) == loss(h, 0.3, y)


def test_smoothed_loss_closed_form(rng):
    # for the square loss E_v[theta(y + eps v)] = theta(y) + eps^2 |h|^2 / (2 (m + 2))
    m, eps = 3, 0.4
    h, y = rng.normal(size=m), rng.normal(size=m)
    z = rng.normal()
    est = smoothed_loss_mc(h, z, y, eps, 200_000, 5)
    exact = loss(h, z, y) + eps ** 2 * (h @ h) / (2 * (m + 2))
    assert est == pytest.approx(exact, rel=2e-3)


def test_smoothed_loss_is_seeded():
    h, y = np.ones(2), np.zeros(2)
    assert smoothed_loss_mc(h, 1.0, y, 0.5, 100, 3) == smoothed_loss_mc(h, 1.0, y, 0.5, 100, 3)
