import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from gpcellseg.fast_gp import (
    AxisEigen,
    DegenerateDataWarning,
    GpHyperParams,
    fit_mle,
    predict,
    predict_direct,
    profile_loglik_direct,
    profile_loglik_fast,
    simulate,
)
from gpcellseg.kernels import KernelSpec, correlation_matrix
from gpcellseg.synthetic import branin_field


def params(g1, g2, eta, family="matern52"):
    return GpHyperParams(KernelSpec(family, g1), KernelSpec(family, g2), eta)


def rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b)) / (1 + np.abs(np.asarray(b))))


def test_axis_eigen_reconstructs():
    x = np.arange(1, 13.0)
    e = AxisEigen.from_kernel(KernelSpec("matern52", 2.5), x)
    R = correlation_matrix(KernelSpec("matern52", 2.5), x)
    np.testing.assert_allclose(e.vectors.T @ e.vectors, np.eye(12), atol=1e-8)
    np.testing.assert_allclose(e.vectors @ np.diag(e.values) @ e.vectors.T, R, atol=1e-8)


def test_identity_regime_closed_form(rng):
    # R1 = R2 = I: log|R~| = N log(1 + eta), S^2 = sum (y - ybar)^2 / (1 + eta)
    Y = rng.random((7, 5))
    eta, N = 0.3, 35
    ll, mu, s2 = profile_loglik_fast(Y, 1e-3, 1e-3, eta)
    S2 = np.sum((Y - Y.mean()) ** 2) / (1 + eta)
    C = -N / 2 * np.log(2 * np.pi) - N / 2 + N / 2 * np.log(N)
    assert mu == pytest.approx(Y.mean(), rel=1e-12)
    assert s2 == pytest.approx(S2 / N, rel=1e-12)
    assert ll == pytest.approx(C - N / 2 * np.log(1 + eta) - N / 2 * np.log(S2), rel=1e-12)
    assert profile_loglik_direct(Y, 1e-3, 1e-3, eta).loglik == pytest.approx(ll, rel=1e-12)


def test_constant_image_degenerate():
    Y = np.full((6, 5), 0.37)
    with pytest.warns(DegenerateDataWarning):
        ll, mu, s2 = profile_loglik_fast(Y, 2.0, 2.0, 0.1)
    assert mu == pytest.approx(0.37, rel=1e-12)
    assert s2 <= 1e-300


def test_small_instance_matches_direct(rng):
    Y = rng.random((6, 5))
    fast = profile_loglik_fast(Y, 3.0, 2.0, 0.1)
    direct = profile_loglik_direct(Y, 3.0, 2.0, 0.1)
    for a, b in zip(fast, direct):
        assert abs(a - b) / abs(b) < 1e-8


def test_one_by_two_hand_algebra():
    # R~ = [[1+eta, rho], [rho, 1+eta]], rho = exp(-1/gamma); 1 is an eigenvector
    y1, y2, gamma, eta = 0.2, 0.8, 1.0, 0.5
    rho = np.exp(-1.0 / gamma)
    mu = (y1 + y2) / 2
    S2 = (y1 - y2) ** 2 / (2 * (1 + eta - rho))
    det = (1 + eta) ** 2 - rho**2
    C = -np.log(2 * np.pi) - 1 + np.log(2)
    expected = C - 0.5 * np.log(det) - np.log(S2)
    for fn in (profile_loglik_fast, profile_loglik_direct):
        ll, m, s2 = fn(np.array([[y1, y2]]), 1.0, gamma, eta, "exp")
        assert ll == pytest.approx(expected, rel=1e-12)
        assert m == pytest.approx(mu, rel=1e-12)
        assert s2 == pytest.approx(S2 / 2, rel=1e-12)


def test_constant_is_exact_log_density(rng):
    Y = rng.random((5, 4))
    ll, mu, s2 = profile_loglik_fast(Y, 2.0, 1.5, 0.3)
    R = np.kron(correlation_matrix(KernelSpec("matern52", 1.5), np.arange(1, 5.0)),
                correlation_matrix(KernelSpec("matern52", 2.0), np.arange(1, 6.0)))
    ref = multivariate_normal(mu * np.ones(20), s2 * (R + 0.3 * np.eye(20))).logpdf(Y.ravel(order="F"))
    assert ll == pytest.approx(ref, rel=1e-10)


def test_direct_guard():
    with pytest.raises(ValueError):
        profile_loglik_direct(np.zeros((101, 100)), 1.0, 1.0, 0.1)


def test_nonfinite_rejected():
    Y = np.ones((4, 4))
    Y[1, 1] = np.nan
    with pytest.raises(ValueError):
        profile_loglik_fast(Y, 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        predict(np.full((4, 4), np.inf), params(1.0, 1.0, 0.1))
    with pytest.raises(ValueError):
        GpHyperParams(KernelSpec("matern52", 1.0), KernelSpec("matern52", 1.0), np.nan)


def test_predict_interpolates_at_tiny_nugget(rng):
    Y = rng.random((8, 6))
    f = predict(Y, params(1.0, 1.0, 1e-12, "exp"))
    np.testing.assert_allclose(f.mean, Y, atol=1e-6)
    assert np.all(f.variance <= 1e-6 * f.sigma2)


def test_predict_constant_image():
    f = predict(np.full((7, 9), 0.4), params(2.0, 3.0, 0.1))
    np.testing.assert_allclose(f.mean, 0.4, rtol=1e-12)
    assert f.degenerate


def test_predict_matches_direct(rng):
    Y = rng.random((8, 6))
    p = params(2.2, 1.7, 0.05)
    fast, direct = predict(Y, p), predict_direct(Y, p)
    assert rel(fast.mean, direct.mean) < 1e-8
    assert rel(fast.variance, direct.variance) < 1e-8
    assert fast.mu == pytest.approx(direct.mu, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(n1=st.integers(4, 20), n2=st.integers(4, 20), u1=st.floats(0.05, 1.0), u2=st.floats(0.05, 1.0),
       log_eta=st.floats(np.log(1e-3), np.log(10)), family=st.sampled_from(["matern52", "exp"]),
       seed=st.integers(0, 2**32 - 1))
def test_fast_direct_equivalence(n1, n2, u1, u2, log_eta, family, seed):
    Y = np.random.default_rng(seed).random((n1, n2))
    g1, g2, eta = u1 * n1, u2 * n2, float(np.exp(log_eta))
    for a, b in zip(profile_loglik_fast(Y, g1, g2, eta, family), profile_loglik_direct(Y, g1, g2, eta, family)):
        assert abs(a - b) / (1 + abs(b)) < 1e-8
    p = params(g1, g2, eta, family)
    fast, direct = predict(Y, p), predict_direct(Y, p)
    assert rel(fast.mean, direct.mean) < 1e-8
    assert rel(fast.variance, direct.variance) < 1e-8
    assert np.all(fast.variance >= 0)
    assert np.all(fast.variance <= fast.sigma2 * (1 + 1e-8))


@settings(max_examples=25, deadline=None)
@given(n1=st.integers(2, 25), n2=st.integers(2, 25), g1=st.floats(0.3, 30), g2=st.floats(0.3, 30),
       eta=st.floats(1e-3, 10), seed=st.integers(0, 2**32 - 1))
def test_transpose_invariance(n1, n2, g1, g2, eta, seed):
    Y = np.random.default_rng(seed).random((n1, n2))
    a = profile_loglik_fast(Y, g1, g2, eta)
    b = profile_loglik_fast(Y.T, g2, g1, eta)
    assert a.loglik == pytest.approx(b.loglik, rel=1e-9, abs=1e-9)
    assert a.mu == pytest.approx(b.mu, rel=1e-9, abs=1e-12)


def _grid_logliks(Y):
    n1, n2 = Y.shape
    return [profile_loglik_fast(Y, a, b, e).loglik
            for a in (n1 / 20, n1 / 5, n1 / 2) for b in (n2 / 20, n2 / 5, n2 / 2) for e in (0.01, 0.1, 1.0)]


def test_fit_not_worse_than_any_start(rng):
    Y = rng.random((12, 10)) + np.linspace(0, 1, 10)[None, :]
    fit = fit_mle(Y)
    assert fit.loglik >= max(_grid_logliks(Y)) - 1e-9
    assert fit.loglik == pytest.approx(profile_loglik_fast(Y, *fit.gammas, fit.eta).loglik)


@pytest.mark.slow
def test_fit_recovers_simulated_truth():
    truth = params(5.0, 5.0, 0.25)
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(10):
        fit = fit_mle(simulate((80, 80), truth, rng))
        ratios = [fit.kernel1.range / 5.0, fit.kernel2.range / 5.0, fit.eta / 0.25]
        hits += all(0.5 <= r <= 1.5 for r in ratios)
    assert hits >= 8


def test_fit_white_noise_has_large_nugget():
    Y = np.random.default_rng(7).standard_normal((40, 40))
    assert fit_mle(Y).eta > 10


def test_fit_smooth_branin_has_small_nugget():
    assert fit_mle(branin_field(n1=60, n2=60)).eta < 1e-2
