import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from lrcomplexity.core import EmpiricalInputDistribution, empirical_distribution, BinaryDesign
from lrcomplexity.likelihood import FitConfig, fisher_information, fit_mle, gradient, log2cosh, loglik


def random_problem(rng, T=200, n=3):
    X = rng.choice([-1.0, 1.0], size=(T, n))
    y = rng.choice([-1.0, 1.0], size=T)
    return X, y


def test_log2cosh_stable():
    z = np.array([-800.0, -1.0, 0.0, 2.5, 800.0])
    np.testing.assert_allclose(log2cosh(z[1:4]), np.log(2 * np.cosh(z[1:4])))
    assert log2cosh(np.array([800.0]))[0] == pytest.approx(800.0)


def test_loglik_at_zero_is_minus_log2():
    rng = np.random.default_rng(0)
    X, y = random_problem(rng)
    assert loglik(np.zeros(3), X, y) == pytest.approx(-math.log(2.0), abs=1e-15)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(20):
        X, y = random_problem(rng, T=50, n=4)
        th = rng.normal(size=4)
        g = gradient(th, X, y)
        h = 1e-6
        fd = np.array([(loglik(th + h * e, X, y) - loglik(th - h * e, X, y)) / (2 * h) for e in np.eye(4)])
        np.testing.assert_allclose(g, fd, atol=1e-8)


def test_fisher_is_minus_hessian_and_output_free():
    rng = np.random.default_rng(2)
    X, y = random_problem(rng, T=80, n=3)
    dist = empirical_distribution(BinaryDesign(X))
    th = rng.normal(size=3)
    F = fisher_information(th, dist)
    h = 1e-5
    H = np.array([(gradient(th + h * e, X, y) - gradient(th - h * e, X, y)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(-H, F, atol=1e-8)
    y2 = -y
    H2 = np.array([(gradient(th + h * e, X, y2) - gradient(th - h * e, X, y2)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(H, H2, atol=1e-8)


def test_fit_one_dimensional_matches_root_of_score():
    rng = np.random.default_rng(3)
    x = rng.choice([-1.0, 1.0], size=(300, 1))
    y = np.where(rng.random(300) < 0.5 * (1 + np.tanh(0.7 * x[:, 0])), 1.0, -1.0)
    res = fit_mle(x, y)
    root = brentq(lambda t: gradient(np.array([t]), x, y)[0], -10, 10, xtol=1e-14)
    assert res.converged and not res.separated
    assert res.theta_star[0] == pytest.approx(root, abs=1e-7)


def test_fit_closed_form_single_input():
    # one input: theta* = atanh(mean(y x))
    x = np.array([[1.0], [1.0], [1.0], [-1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    res = fit_mle(x, y)
    assert res.theta_star[0] == pytest.approx(math.atanh(0.5), abs=1e-9)


def test_separation_is_flagged():
    x = np.array([[1.0], [1.0], [-1.0], [-1.0]])
    y = x[:, 0].copy()
    res = fit_mle(x, y, FitConfig(cap=20.0))
    assert res.separated
    assert res.loglik > -1e-12
    assert abs(res.theta_star[0]) == pytest.approx(20.0)


def test_null_model():
    res = fit_mle(np.zeros((5, 0)), np.ones(5))
    assert res.loglik == pytest.approx(-math.log(2.0))
    assert res.n == 0


def test_dimension_errors():
    with pytest.raises(ValueError):
        loglik(np.zeros(2), np.ones((3, 3)), np.ones(3))
    with pytest.raises(ValueError):
        loglik(np.zeros(3), np.ones((3, 3)), np.ones(4))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_loglik_concave_along_segments(seed, lam):
    rng = np.random.default_rng(seed)
    X, y = random_problem(rng, T=30, n=3)
    a, b = rng.normal(size=3) * 2, rng.normal(size=3) * 2
    mid = loglik(lam * a + (1 - lam) * b, X, y)
    assert mid >= lam * loglik(a, X, y) + (1 - lam) * loglik(b, X, y) - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_fit_is_stationary_or_separated(seed):
    rng = np.random.default_rng(seed)
    X, y = random_problem(rng, T=40, n=3)
    res = fit_mle(X, y)
    if not res.separated:
        assert np.max(np.abs(gradient(res.theta_star, X, y))) < 1e-6
    assert res.loglik >= -math.log(2.0) - 1e-12


def test_fisher_uniform_at_zero_is_identity():
    F = fisher_information(np.zeros(3), EmpiricalInputDistribution.uniform(3))
    np.testing.assert_allclose(F, np.eye(3), atol=1e-15)
