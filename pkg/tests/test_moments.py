import numpy as np
import pytest

from quantfolio.exceptions import TooFewSamples
from quantfolio.moments import (
    MomentEstimate,
    bayes_stein,
    denoise_rmt,
    ew_moments,
    gerber,
    ledoit_wolf,
    sample_moments,
)

from conftest import make_returns


def _corr(sigma):
    d = np.sqrt(np.diag(sigma))
    return sigma / np.outer(d, d)


def test_sample_moments_fixture():
    # [DERIVED] columns (1,-1,0) and (0,0,0): zero means, var 1 and 0, no covariance
    est = sample_moments(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]]))
    np.testing.assert_allclose(est.mu, [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(est.sigma, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)
    assert est.sample_size == 3


def test_sample_moments_accepts_returns_matrix(rng):
    values = rng.normal(0, 0.01, (40, 3))
    a = sample_moments(values)
    b = sample_moments(make_returns(values))
    np.testing.assert_array_equal(a.sigma, b.sigma)


def test_sample_moments_needs_two_rows():
    with pytest.raises(TooFewSamples):
        sample_moments(np.zeros((1, 3)))


def test_ew_moments_large_halflife_matches_sample(rng):
    R = rng.normal(0, 0.01, (60, 4))
    ew = ew_moments(R, halflife=1e8)
    sm = sample_moments(R)
    np.testing.assert_allclose(ew.mu, sm.mu, atol=1e-9)
    np.testing.assert_allclose(ew.sigma, sm.sigma, atol=1e-9)


def test_ew_moments_small_halflife_tracks_recent(rng):
    # last row dominates when the halflife is tiny
    R = np.vstack([rng.normal(0, 0.001, (30, 2)), [[0.5, -0.5]]])
    ew = ew_moments(R, halflife=0.1)
    assert ew.mu[0] > 0.4 and ew.mu[1] < -0.4


def test_bayes_stein_hand_case():
    # [DERIVED] N=3, sigma=I, mu=(0.1,0.2,0.3), T=60:
    # mu0=0.2, quad=0.02, phi=5/(5+1.2)=5/6.2
    est = MomentEstimate(mu=np.array([0.1, 0.2, 0.3]), sigma=np.eye(3), sample_size=60)
    shrunk = bayes_stein(est)
    phi = 5.0 / 6.2
    expected = np.array([0.1 + 0.1 * phi, 0.2, 0.3 - 0.1 * phi])
    np.testing.assert_allclose(shrunk.mu, expected, atol=1e-12)
    np.testing.assert_array_equal(shrunk.sigma, est.sigma)


def test_bayes_stein_equal_means_unchanged():
    est = MomentEstimate(mu=np.full(4, 0.07), sigma=np.eye(4), sample_size=50)
    np.testing.assert_allclose(bayes_stein(est).mu, est.mu, atol=1e-14)


def test_bayes_stein_moves_toward_gmv_mean(rng):
    sigma = np.diag(rng.uniform(0.5, 2.0, 5))
    mu = rng.normal(0.1, 0.05, 5)
    est = MomentEstimate(mu=mu, sigma=sigma, sample_size=80)
    shrunk = bayes_stein(est)
    ones = np.ones(5)
    w_gmv = np.linalg.solve(sigma, ones)
    mu0 = (w_gmv / w_gmv.sum()) @ mu
    # every coordinate moves toward mu0, never past it
    before = mu - mu0
    after = shrunk.mu - mu0
    assert np.all(np.abs(after) <= np.abs(before) + 1e-14)
    assert np.all(after * before >= -1e-14)


def test_ledoit_wolf_delta_bounds_and_trace(rng):
    for _ in range(5):
        R = rng.normal(0, 0.01, (40, 6))
        est, delta = ledoit_wolf(R)
        assert 0.0 <= delta <= 1.0
        sample = sample_moments(R)
        assert abs(np.trace(est.sigma) - np.trace(sample.sigma)) < 1e-9
        np.testing.assert_allclose(est.sigma, est.sigma.T, atol=1e-15)


def test_ledoit_wolf_intensity_vanishes_with_data(rng):
    # anisotropic truth: intensity should be small and shrink as T grows
    scales = np.array([0.5, 1.0, 2.0, 4.0, 8.0])
    _, d_small = ledoit_wolf(rng.normal(0, 1, (60, 5)) * scales)
    _, d_big = ledoit_wolf(rng.normal(0, 1, (5000, 5)) * scales)
    assert d_big < d_small
    assert d_big < 0.05


def test_gerber_fixture():
    # [DERIVED] 3 concordant and 1 discordant joint exceedance: g = (3-1)/(3+1)
    small = np.tile([0.01, -0.01], (6, 1))
    big = np.array([[2.0, 2.0], [2.0, 2.0], [2.0, 2.0], [2.0, -2.0]])
    R = np.vstack([small, big])
    est = gerber(R, c=0.5)
    s = np.sqrt(np.diag(sample_moments(R).sigma))
    assert est.sigma[0, 1] / (s[0] * s[1]) == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(np.diag(est.sigma), s**2, atol=1e-12)


def test_gerber_psd(rng):
    R = rng.normal(0, 0.02, (100, 6))
    est = gerber(R)
    assert np.linalg.eigvalsh(est.sigma).min() >= -1e-10


def test_denoise_rmt_trace_preserved(rng):
    R = rng.normal(0, 0.01, (120, 8))
    est = sample_moments(R)
    den = denoise_rmt(est)
    assert abs(np.trace(den.sigma) - np.trace(est.sigma)) < 1e-9
    np.testing.assert_array_equal(den.mu, est.mu)


def test_denoise_rmt_flattens_pure_noise(rng):
    # iid noise: every correlation eigenvalue sits under the MP edge and is
    # replaced by a common average
    R = rng.normal(0, 1, (100, 20))
    den = denoise_rmt(sample_moments(R))
    ev = np.linalg.eigvalsh(_corr(den.sigma))
    assert ev.max() - ev.min() < 1e-6


def test_denoise_rmt_keeps_planted_factor(rng):
    f = rng.normal(0, 1, (500, 1))
    R = f @ np.ones((1, 12)) + rng.normal(0, 0.5, (500, 12))
    est = sample_moments(R)
    top_before = np.linalg.eigvalsh(_corr(est.sigma))[-1]
    top_after = np.linalg.eigvalsh(_corr(denoise_rmt(est).sigma))[-1]
    assert abs(top_after - top_before) / top_before < 0.05


def test_estimators_produce_symmetric_psd(rng):
    R = rng.normal(0, 0.02, (80, 5))
    candidates = [
        sample_moments(R).sigma,
        ew_moments(R, halflife=20).sigma,
        ledoit_wolf(R)[0].sigma,
        gerber(R).sigma,
        denoise_rmt(sample_moments(R)).sigma,
    ]
    for sigma in candidates:
        np.testing.assert_allclose(sigma, sigma.T, atol=1e-12)
        assert np.linalg.eigvalsh(sigma).min() >= -1e-10
