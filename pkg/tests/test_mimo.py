"""Tests for the sparse MIMO applications.

Verifies that:
- Channels follow the sparse fading model and replay deterministically
- The equality test statistic and both null-variance estimators match hand values
- Predicted power equals alpha under the null, grows with the fading gap and
  agrees with its population-moment form at the replay settings
- Mutual information matches its eigenvalue form and rank-one closed form
- Deterministic capacity identities and the small-retention mean limit hold
- The outage curve is centred where the Gaussian approximation says it is
"""
from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from scipy import stats

from specgram.spectral.detequiv import solve_scalar_mi_system
from specgram.spectral.errors import DegenerateVarianceError, ModelValidationError
from specgram.spectral.mimo import (
    EqualityReplayConfig,
    empirical_outage_curve,
    equality_test,
    estimate_retention,
    fading_pair,
    mi_clt_params,
    mi_replicates,
    mutual_information,
    outage_probability,
    predicted_power,
    replicate_equality_test,
    sample_channel,
    sigma2_to_snr_db,
    snr_db_to_sigma2,
    t_log_statistic,
)
from specgram.spectral.models import EntryModel
from specgram.spectral.profile import uniform_diagonals


# ============================================================================
# Fixtures
# ============================================================================

@pytest.fixture
def hand_channels() -> tuple[np.ndarray, np.ndarray]:
    return np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([[1.0, 1.0], [0.0, 0.0]])


@pytest.fixture
def fading() -> np.ndarray:
    return np.random.default_rng(4).uniform(2.0, 4.0, size=(40, 50))


@pytest.fixture
def diagonals() -> tuple[np.ndarray, np.ndarray]:
    return uniform_diagonals(32, 64, seed=12)


def _population_power(n_r: int, q: float, theta: float, s: float, nu4: float, alpha: float) -> float:
    """Predicted power with U(2, 4) fading sums replaced by their expectations."""
    def moment(k: int) -> float:
        return (4.0 ** (k + 1) - 2.0 ** (k + 1)) / (2.0 * (k + 1))

    m1, m2, m3, m4 = (moment(k) for k in range(1, 5))
    shifted4 = m4 - 4 * theta * m3 + 6 * theta**2 * m2 - 4 * theta**3 * m1 + theta**4
    sigma_h0 = math.sqrt((nu4 - s) * m4)
    sigma_h1 = math.sqrt((nu4 - s) * (m4 + shifted4))
    shift = q * math.sqrt(n_r) * (2 * theta * m1 - theta**2)
    z = stats.norm.ppf(1 - alpha)
    return float(stats.norm.sf((math.sqrt(2.0) * z * sigma_h0 - shift) / sigma_h1))


# ============================================================================
# Channels
# ============================================================================

class TestChannels:
    def test_zero_fading(self, complex_gaussian):
        H = sample_channel(np.zeros((3, 4)), 0.5, complex_gaussian, seed=0)
        assert np.all(H == 0)

    def test_reproducible(self, fading, complex_gaussian):
        first = sample_channel(fading, 0.3, complex_gaussian, seed=1, replication=4)
        second = sample_channel(fading, 0.3, complex_gaussian, seed=1, replication=4)
        assert np.array_equal(first, second)

    def test_entry_variance(self, complex_gaussian):
        L = np.ones((200, 400))
        H = sample_channel(L, 1.0, complex_gaussian, seed=2)
        assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0 / 400, rel=0.02)

    def test_retention_estimate(self, fading, complex_gaussian):
        H = sample_channel(fading, 0.3, complex_gaussian, seed=3)
        assert estimate_retention(H) == pytest.approx(0.3, abs=0.03)

    def test_expected_power(self, fading, complex_gaussian):
        powers = np.array([
            np.sum(np.abs(sample_channel(fading, 0.5, complex_gaussian, seed=5, replication=rep)) ** 2)
            for rep in range(500)
        ])
        expected = float(np.sum(fading**2)) / fading.shape[1]
        se = powers.std(ddof=1) / math.sqrt(powers.size)
        assert abs(powers.mean() - expected) < 4 * se

    def test_rejects_negative_fading(self, complex_gaussian):
        with pytest.raises(ModelValidationError):
            sample_channel(np.array([[1.0, -1.0]]), 0.5, complex_gaussian, seed=0)

    def test_snr_conversion(self):
        assert snr_db_to_sigma2(10.0) == pytest.approx(0.1)
        assert sigma2_to_snr_db(0.1) == pytest.approx(10.0)
        with pytest.raises(ModelValidationError):
            sigma2_to_snr_db(0.0)


# ============================================================================
# Equality test
# ============================================================================

class TestEqualityTest:
    def test_identical_channels_do_not_reject(self, fading, complex_gaussian):
        H = sample_channel(fading, 0.5, complex_gaussian, seed=0)
        result = equality_test(H, H, alpha=0.05, nu4=2.0)
        assert result.D_x == 0.0
        assert not result.reject

    def test_hand_values(self, hand_channels):
        H1, H2 = hand_channels
        result = equality_test(H1, H2, alpha=0.05, nu4=2.0)
        assert result.s_hat == pytest.approx(0.5)
        assert result.q_hat == pytest.approx(1.0)
        assert result.D_x == pytest.approx(3.0 / math.sqrt(2.0))
        assert result.sigma2_H0_hat == pytest.approx(6.375)
        assert result.T_x == pytest.approx(result.D_x / math.sqrt(2.0 * 6.375))
        assert not result.reject

    def test_plug_in_estimator(self, hand_channels):
        H1, H2 = hand_channels
        result = equality_test(H1, H2, alpha=0.05, nu4=2.0, variance_estimator="plug_in")
        assert result.sigma2_H0_hat == pytest.approx(4.25)

    def test_known_retention(self, hand_channels):
        H1, H2 = hand_channels
        result = equality_test(H1, H2, alpha=0.05, nu4=2.0, s=1.0)
        assert result.s_hat == 1.0
        assert result.q_hat == pytest.approx(math.sqrt(2.0))

    def test_large_gap_rejects(self):
        result = equality_test(np.ones((20, 20)), np.zeros((20, 20)), alpha=0.05, nu4=2.0)
        assert result.reject

    def test_shape_mismatch(self):
        with pytest.raises(ModelValidationError):
            equality_test(np.ones((2, 2)), np.ones((2, 3)), alpha=0.05, nu4=2.0)

    @pytest.mark.parametrize("alpha", [0.0, 1.0])
    def test_alpha_range(self, hand_channels, alpha):
        with pytest.raises(ModelValidationError):
            equality_test(*hand_channels, alpha=alpha, nu4=2.0)

    def test_empty_first_channel(self):
        with pytest.raises(DegenerateVarianceError):
            equality_test(np.zeros((2, 2)), np.ones((2, 2)), alpha=0.05, nu4=2.0)


class TestPredictedPower:
    def test_equals_alpha_under_null(self, fading, complex_gaussian):
        assert predicted_power(fading, fading, 0.25, complex_gaussian, 0.05) == pytest.approx(0.05, rel=1e-9)

    def test_grows_with_gap(self, fading, complex_gaussian):
        powers = [predicted_power(fading, fading - theta, 0.25, complex_gaussian, 0.05) for theta in (0.0, 0.02, 0.05, 0.1)]
        assert all(a < b for a, b in zip(powers, powers[1:]))

    @pytest.mark.parametrize("n_r, c_n, q_exponent, theta, expected", [
        (200, 0.8, None, 0.05, 0.557),
        (200, 0.25, 1.0 / 3.0, 0.02, 0.201),
    ])
    def test_replay_settings_match_population_moments(self, complex_gaussian, n_r, c_n, q_exponent, theta, expected):
        n_t = round(n_r / c_n)
        q = 0.5 * math.sqrt(n_t) if q_exponent is None else n_t**q_exponent
        config = EqualityReplayConfig(q=q, n_r=n_r, c_n=c_n, theta=theta, seed=5)
        L1, L2 = fading_pair(config)
        power = predicted_power(L1, L2, config.s, complex_gaussian, 0.05)
        population = _population_power(n_r, q, theta, config.s, complex_gaussian.nu4, 0.05)
        assert power == pytest.approx(population, abs=5e-3)
        assert power == pytest.approx(expected, abs=1e-2)

    def test_shape_mismatch(self, complex_gaussian):
        with pytest.raises(ModelValidationError):
            predicted_power(np.ones((2, 2)), np.ones((3, 2)), 0.5, complex_gaussian, 0.05)


class TestReplayConfig:
    def test_dimensions(self):
        config = EqualityReplayConfig(q=0.5 * math.sqrt(250), n_r=200, c_n=0.8)
        assert config.n_t == 250
        assert config.s == pytest.approx(0.25)

    def test_fading_pair(self):
        config = EqualityReplayConfig(q=5.0, n_r=20, c_n=0.8, theta=0.1)
        L1, L2 = fading_pair(config)
        assert L1.shape == (20, 25)
        assert np.allclose(L1 - L2, 0.1)
        assert np.all((L1 >= 2.0) & (L1 < 4.0))

    def test_theta_too_large(self):
        with pytest.raises(ModelValidationError):
            fading_pair(EqualityReplayConfig(q=5.0, n_r=20, c_n=0.8, theta=2.5))

    def test_q_above_sqrt_n(self):
        with pytest.raises(ModelValidationError):
            EqualityReplayConfig(q=100.0, n_r=20, c_n=0.8)

    def test_replay_is_deterministic(self):
        config = EqualityReplayConfig(q=3.0, n_r=20, c_n=0.8, replications=50, seed=3)
        first = replicate_equality_test(config)[1]
        second = replicate_equality_test(EqualityReplayConfig(q=3.0, n_r=20, c_n=0.8, replications=50, seed=3, threads=4))[1]
        assert np.array_equal(first, second)


@pytest.mark.slow
class TestReplayStatistics:
    def test_size_under_null(self):
        config = EqualityReplayConfig(q=0.5 * math.sqrt(250), n_r=200, c_n=0.8, replications=2000, seed=1)
        summary, values, power = replicate_equality_test(config)
        assert 0.035 <= summary.rejection_rate <= 0.065
        assert abs(summary.empirical_mean) < 4 * summary.mean_se
        assert summary.empirical_var == pytest.approx(1.0, abs=0.15)
        assert power == pytest.approx(0.05)

    def test_power_tracks_prediction(self):
        config = EqualityReplayConfig(q=0.5 * math.sqrt(250), n_r=200, c_n=0.8, theta=0.05, replications=2000, seed=2)
        summary, _, power = replicate_equality_test(config)
        assert summary.rejection_rate == pytest.approx(power, abs=0.04)


# ============================================================================
# Mutual information and outage
# ============================================================================

class TestMutualInformation:
    def test_zero_channel(self):
        assert mutual_information(np.zeros((3, 5)), 1.0) == 0.0

    def test_rank_one(self):
        u = np.array([1.0, 2.0, 0.5])
        v = np.array([1.0j, 1.0, 0.0, 2.0, -1.0])
        H = np.outer(u, v.conj())
        expected = math.log1p(np.vdot(u, u).real * np.vdot(v, v).real / 0.5)
        assert mutual_information(H, 0.5) == pytest.approx(expected, rel=1e-10)

    def test_matches_eigenvalue_form(self):
        rng = np.random.default_rng(8)
        H = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        eigs = np.linalg.eigvalsh(H @ H.conj().T)
        assert mutual_information(H, 2.0) == pytest.approx(float(np.sum(np.log1p(eigs / 2.0))), rel=1e-10)

    def test_rejects_bad_noise(self):
        with pytest.raises(ModelValidationError):
            mutual_information(np.ones((2, 2)), 0.0)


class TestMiCltParams:
    def test_capacity_identity(self, diagonals):
        d, d_tilde = diagonals
        sigma2 = 0.5
        eq = solve_scalar_mi_system(d, d_tilde, -sigma2)
        lhs = -float(np.sum(np.log(sigma2 * eq.t_diag.real)))
        rhs = float(np.sum(np.log1p(eq.delta_tilde.real * d)))
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_parameters_are_admissible(self, diagonals, complex_gaussian):
        d, d_tilde = diagonals
        params = mi_clt_params(d, d_tilde, 1.0, 4.0, complex_gaussian)
        assert 0.0 < params.log_argument < 1.0
        assert params.sigma2_log > 0
        assert params.mu_log < 0
        assert params.V > 0

    def test_small_retention_mean_limit(self, diagonals, complex_gaussian):
        d, d_tilde = diagonals
        sigma2, q = 1.0, 4.0
        params = mi_clt_params(d, d_tilde, sigma2, q, complex_gaussian, s=1e-9)
        eq = solve_scalar_mi_system(d, d_tilde, -sigma2)
        traces = float(np.sum(d**2 * eq.t_diag.real**2)) * float(np.sum(d_tilde**2 * eq.t_tilde_diag.real**2))
        limit = -sigma2**2 * traces / (q * math.sqrt(d.size) * d_tilde.size)
        assert params.mu_log == pytest.approx(limit, rel=1e-6)

    def test_real_entries_warn(self, diagonals, real_gaussian, caplog):
        d, d_tilde = diagonals
        with caplog.at_level(logging.WARNING, logger="specgram.spectral.mimo"):
            mi_clt_params(d, d_tilde, 1.0, 4.0, real_gaussian)
        assert "complex-entry" in caplog.text

    def test_capacity_matches_simulation(self, diagonals, complex_gaussian):
        d, d_tilde = diagonals
        params = mi_clt_params(d, d_tilde, 1.0, 8.0, complex_gaussian)
        caps = mi_replicates(d, d_tilde, 1.0, 8.0, complex_gaussian, replications=100, seed=4)
        assert float(np.mean(caps)) == pytest.approx(params.V, rel=1e-2)


class TestOutage:
    def test_median_rate(self, diagonals, complex_gaussian):
        d, d_tilde = diagonals
        q = 4.0
        params = mi_clt_params(d, d_tilde, 1.0, q, complex_gaussian)
        rate = params.V + math.sqrt(d.size) / q * params.mu_log
        assert outage_probability(rate, params, q, d.size) == pytest.approx(0.5)

    def test_monotone_in_rate(self, diagonals, complex_gaussian):
        d, d_tilde = diagonals
        params = mi_clt_params(d, d_tilde, 1.0, 4.0, complex_gaussian)
        rates = np.linspace(params.V - 20, params.V + 20, 41)
        curve = outage_probability(rates, params, 4.0, d.size)
        assert np.all(np.diff(curve) >= 0)
        assert curve[0] < 1e-3 and curve[-1] > 1 - 1e-3

    def test_empirical_curve(self):
        curve = empirical_outage_curve(np.array([3.0, 1.0, 2.0]), np.array([0.0, 1.5, 3.0, 4.0]))
        assert np.allclose(curve, [0.0, 1 / 3, 2 / 3, 1.0])

    @pytest.mark.slow
    def test_log_statistic_is_gaussian(self, complex_gaussian):
        d, d_tilde = uniform_diagonals(128, 256, seed=2)
        q = 0.5 * math.sqrt(256)
        params = mi_clt_params(d, d_tilde, 1.0, q, complex_gaussian)
        caps = mi_replicates(d, d_tilde, 1.0, q, complex_gaussian, replications=2000, seed=6)
        scaled = q / math.sqrt(128) * caps
        assert float(np.var(scaled, ddof=1)) == pytest.approx(params.sigma2_log, rel=0.1)
        t_values = t_log_statistic(caps, params, q, 128)
        assert stats.kstest(t_values, "norm").statistic < 0.05
        rates = np.linspace(np.min(caps), np.max(caps), 50)
        gap = np.abs(empirical_outage_curve(caps, rates) - outage_probability(rates, params, q, 128))
        assert float(np.max(gap)) < 0.05
