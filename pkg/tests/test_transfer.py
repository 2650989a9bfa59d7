import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import orthonormal
from sharedrep import (
    ConfigurationError,
    DimensionError,
    SubspaceEstimate,
    fit_new_client,
    gaussian_noise_scale,
    independent_baseline,
    private_fit_new_client,
)


def test_noiseless_exact_recovery(rng):
    B = orthonormal(rng, 12, 3)
    alpha = rng.standard_normal(3)
    X = rng.standard_normal((20, 12))
    fit = fit_new_client(SubspaceEstimate(B, "truth"), X, X @ B @ alpha)
    assert np.allclose(fit.alpha_hat, alpha, atol=1e-10)
    assert np.allclose(fit.theta_hat, B @ fit.alpha_hat, atol=1e-12)
    assert not fit.underdetermined and fit.privacy is None


def test_zero_response_gives_zero_head(rng):
    B = orthonormal(rng, 6, 2)
    fit = fit_new_client(B, rng.standard_normal((5, 6)), np.zeros(5))
    assert np.all(fit.alpha_hat == 0)


def test_underdetermined_flag_and_min_norm(rng):
    B = orthonormal(rng, 8, 4)
    X = rng.standard_normal((2, 8))
    y = rng.standard_normal(2)
    fit = fit_new_client(B, X, y)
    assert fit.underdetermined
    assert np.allclose(X @ fit.theta_hat, y, atol=1e-10)
    assert np.allclose(fit.alpha_hat, np.linalg.pinv(X @ B) @ y, atol=1e-10)


def test_input_validation(rng):
    B = orthonormal(rng, 5, 2)
    with pytest.raises(DimensionError):
        fit_new_client(B, rng.standard_normal((4, 6)), np.zeros(4))
    with pytest.raises(DimensionError):
        fit_new_client(B, rng.standard_normal((4, 5)), np.zeros(3))
    with pytest.raises(DimensionError):
        independent_baseline(np.zeros((0, 5)), np.zeros(0))


def test_independent_baseline_exact_and_interpolating(rng):
    theta = rng.standard_normal(10)
    X = rng.standard_normal((30, 10))
    assert np.allclose(independent_baseline(X, X @ theta), theta, atol=1e-10)
    Xs = rng.standard_normal((4, 10))
    ys = rng.standard_normal(4)
    th = independent_baseline(Xs, ys)
    assert np.linalg.norm(Xs @ th - ys) <= 1e-8
    # minimum norm: lies in the row space
    assert np.allclose(th, Xs.T @ np.linalg.solve(Xs @ Xs.T, ys), atol=1e-10)


def test_independent_worse_than_transfer_when_basis_is_good(rng):
    d, k, n = 40, 3, 20
    wins = 0
    for _ in range(20):
        B = orthonormal(rng, d, k)
        theta = B @ (rng.standard_normal(k) / math.sqrt(k))
        X = rng.standard_normal((n, d))
        y = X @ theta + rng.standard_normal(n)
        t_err = np.linalg.norm(fit_new_client(B, X, y).theta_hat - theta)
        i_err = np.linalg.norm(independent_baseline(X, y) - theta)
        wins += t_err < i_err
    assert wins >= 18


def test_noise_scale_closed_form():
    expected = math.sqrt(2 * math.log(1.25e5)) / 100
    assert gaussian_noise_scale(1 / 100, 1.0, 1e-5) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.04844805, abs=1e-8)


def test_private_scale_uses_clip_over_n(rng):
    B = orthonormal(rng, 5, 2)
    X = rng.standard_normal((100, 5))
    fit = private_fit_new_client(B, X, X[:, 0], 1.0, 1e-5, 1.0, seed=3)
    assert fit.privacy.noise_scale == pytest.approx(math.sqrt(2 * math.log(1.25e5)) / 100, rel=1e-14)
    assert fit.method == "private_transfer"


@pytest.mark.parametrize("eps, delta, clip", [(0.0, 1e-5, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 1.0), (1.0, 1e-5, 0.0), (-1, 0.5, 1)])
def test_private_rejects_bad_parameters(rng, eps, delta, clip):
    B = orthonormal(rng, 4, 1)
    with pytest.raises(ConfigurationError):
        private_fit_new_client(B, rng.standard_normal((5, 4)), np.ones(5), eps, delta, clip)


def test_private_large_epsilon_matches_least_squares(rng):
    B = orthonormal(rng, 10, 3)
    X = rng.standard_normal((200, 10))
    y = X @ B @ np.array([0.5, -0.3, 0.2]) + 0.1 * rng.standard_normal(200)
    plain = fit_new_client(B, X, y)
    priv = private_fit_new_client(B, X, y, 1e6, 1e-5, 100.0, seed=0)
    assert np.max(np.abs(priv.alpha_hat - plain.alpha_hat)) < 1e-3


def test_private_is_deterministic_under_seed(rng):
    B = orthonormal(rng, 10, 3)
    X = rng.standard_normal((50, 10))
    y = rng.standard_normal(50)
    a = private_fit_new_client(B, X, y, 1.0, 1e-5, 2.0, seed=42)
    b = private_fit_new_client(B, X, y, 1.0, 1e-5, 2.0, seed=42)
    c = private_fit_new_client(B, X, y, 1.0, 1e-5, 2.0, seed=43)
    assert np.array_equal(a.alpha_hat, b.alpha_hat)
    assert not np.array_equal(a.alpha_hat, c.alpha_hat)


def test_error_grows_with_basis_misalignment():
    # geodesic B(t) = B cos t + U sin t keeps orthonormality and has distance sin t
    d, k, n = 30, 3, 200
    ts = [0.0, 0.2, 0.5, 1.0]
    errs = {t: [] for t in ts}
    for seed in range(30):
        r = np.random.default_rng(seed)
        Q = np.linalg.qr(r.standard_normal((d, 2 * k)))[0]
        B, U = Q[:, :k], Q[:, k:]
        alpha = r.standard_normal(k) / math.sqrt(k)
        X = r.standard_normal((n, d))
        y = X @ B @ alpha + r.standard_normal(n)
        for t in ts:
            Bt = B * math.cos(t) + U * math.sin(t)
            errs[t].append(np.linalg.norm(fit_new_client(Bt, X, y).theta_hat - B @ alpha))
    med = [np.median(errs[t]) for t in ts]
    assert all(a <= b for a, b in zip(med, med[1:]))


@given(st.integers(1, 4), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_theta_is_basis_times_head(k, n, seed):
    r = np.random.default_rng(seed)
    B = orthonormal(r, k + 3, k)
    X = r.standard_normal((n, k + 3))
    y = r.standard_normal(n)
    for fit in (fit_new_client(B, X, y), private_fit_new_client(B, X, y, 1.0, 1e-3, 1.0, seed)):
        assert np.allclose(fit.theta_hat, B @ fit.alpha_hat, atol=1e-12)
        assert fit.underdetermined == (n < k)
