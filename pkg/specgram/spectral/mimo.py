"""Sparse MIMO applications: equality test of large-scale fading and mutual-information outage."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky
from scipy.stats import norm

from ..domain.types import VarianceEstimator
from .detequiv import solve_scalar_mi_system
from .errors import DegenerateVarianceError, ModelValidationError, StabilityError
from .models import EntryModel, EqualityTestResult, McSummary, MiCltParams
from .profile import standardized_fourth_moment
from .simulate import replication_generator
from .workers import map_ordered

logger = logging.getLogger(__name__)


def snr_db_to_sigma2(snr_db: float) -> float:
    return 10.0 ** (-float(snr_db) / 10.0)


def sigma2_to_snr_db(sigma2: float) -> float:
    if not sigma2 > 0:
        raise ModelValidationError(f"noise variance must be positive, got {sigma2}")
    return 10.0 * math.log10(1.0 / sigma2)


def _check_retention(s: float) -> float:
    if not 0 < s <= 1:
        raise ModelValidationError(f"retention s must lie in (0, 1], got {s}")
    return float(s)


# ============================================================================
# Equality test of large-scale fading matrices
# ============================================================================

def sample_channel(
    L: np.ndarray,
    s: float,
    model: EntryModel,
    seed: int,
    replication: int | None = None,
) -> np.ndarray:
    """H = (1/√(N_t s))(𝔹∘L)∘G."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or np.any(L < 0) or not np.all(np.isfinite(L)):
        raise ModelValidationError("L must be a finite nonnegative 2-D array")
    s = _check_retention(s)
    n_t = L.shape[1]
    rng = replication_generator(seed, replication)
    mask = np.ones(L.shape, dtype=bool) if s >= 1.0 else rng.random(L.shape) < s
    g = model.sample(rng, L.shape)
    return np.where(mask, L * g, 0.0) / math.sqrt(n_t * s)


def estimate_retention(H: np.ndarray) -> float:
    """ŝ: fraction of nonzero channel entries."""
    H = np.asarray(H)
    return float(np.count_nonzero(H) / H.size)


def _null_variance(
    fourth_sum: float, s: float, n_r: int, n_t: int, nu4: float, estimator: VarianceEstimator
) -> float:
    first = s * n_t / n_r * fourth_sum
    if estimator == "plug_in":
        return first - s * n_t / (n_r * nu4) * fourth_sum
    return first - s * s * n_t / (n_r * nu4) * fourth_sum


def equality_test(
    H1: np.ndarray,
    H2: np.ndarray,
    alpha: float,
    nu4: float,
    s: float | None = None,
    variance_estimator: VarianceEstimator = "consistent",
) -> EqualityTestResult:
    """Test L1 = L2 from one channel realization per environment."""
    H1 = np.asarray(H1)
    H2 = np.asarray(H2)
    if H1.shape != H2.shape or H1.ndim != 2:
        raise ModelValidationError(f"channel shapes differ: {H1.shape} vs {H2.shape}")
    if not (np.all(np.isfinite(H1)) and np.all(np.isfinite(H2))):
        raise ModelValidationError("channel matrices contain non-finite entries")
    if not 0 < alpha < 1:
        raise ModelValidationError(f"alpha must lie in (0, 1), got {alpha}")
    if not nu4 > 0:
        raise ModelValidationError(f"nu4 must be positive, got {nu4}")
    n_r, n_t = H1.shape
    s_hat = estimate_retention(H1) if s is None else _check_retention(s)
    if s_hat <= 0:
        raise DegenerateVarianceError("first channel has no nonzero entries")
    q_hat = math.sqrt(s_hat * n_t)

    power1 = float(np.sum(np.abs(H1) ** 2))
    power2 = power1 if H2 is H1 else float(np.sum(np.abs(H2) ** 2))
    d_x = q_hat / math.sqrt(n_r) * (power1 - power2)
    sigma2_h0 = _null_variance(
        float(np.sum(np.abs(H1) ** 4)), s_hat, n_r, n_t, nu4, variance_estimator
    )
    if not sigma2_h0 > 0:
        raise DegenerateVarianceError(f"estimated null variance {sigma2_h0:.4g} is not positive")
    sigma_h0 = math.sqrt(sigma2_h0)
    critical = math.sqrt(2.0) * sigma_h0 * float(norm.ppf(1.0 - alpha))
    return EqualityTestResult(
        D_x=d_x,
        T_x=d_x / (math.sqrt(2.0) * sigma_h0),
        sigma2_H0_hat=sigma2_h0,
        reject=bool(d_x > critical),
        alpha=alpha,
        s_hat=s_hat,
        q_hat=q_hat,
    )


def predicted_power(
    L1: np.ndarray, L2: np.ndarray, s: float, model: EntryModel, alpha: float
) -> float:
    """Asymptotic rejection probability of the equality test."""
    L1 = np.asarray(L1, dtype=float)
    L2 = np.asarray(L2, dtype=float)
    if L1.shape != L2.shape or L1.ndim != 2:
        raise ModelValidationError(f"fading shapes differ: {L1.shape} vs {L2.shape}")
    s = _check_retention(s)
    n_r, n_t = L1.shape
    nu4 = standardized_fourth_moment(model)
    q = math.sqrt(s * n_t)
    scale = (nu4 - s) / (n_r * n_t)
    sigma2_h0 = scale * float(np.sum(L1**4))
    sigma2_h1 = scale * float(np.sum(L1**4 + L2**4))
    if not (sigma2_h0 > 0 and sigma2_h1 > 0):
        raise DegenerateVarianceError("predicted null or alternative variance is not positive")
    shift = q / (math.sqrt(n_r) * n_t) * float(np.sum(L1**2 - L2**2))
    z = float(norm.ppf(1.0 - alpha))
    return float(norm.sf((math.sqrt(2.0) * z * math.sqrt(sigma2_h0) - shift) / math.sqrt(sigma2_h1)))


@dataclass(frozen=True)
class EqualityReplayConfig:
    """Monte Carlo size/power replay of the equality test."""

    q: float
    n_r: int = 200
    c_n: float = 0.8
    theta: float = 0.0
    l_low: float = 2.0
    l_high: float = 4.0
    alpha: float = 0.05
    replications: int = 2000
    seed: int = 0
    model: EntryModel = field(default_factory=EntryModel.complex_gaussian)
    known_retention: bool = False
    variance_estimator: VarianceEstimator = "consistent"
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.n_r < 2 or self.c_n <= 0:
            raise ModelValidationError(f"need n_r >= 2 and c_n > 0, got ({self.n_r}, {self.c_n})")
        if not 0 < self.l_low < self.l_high:
            raise ModelValidationError(f"need 0 < l_low < l_high, got ({self.l_low}, {self.l_high})")
        if not 0 < self.alpha < 1:
            raise ModelValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.replications < 1:
            raise ModelValidationError("need at least one replication")
        _check_retention(self.q * self.q / self.n_t)

    @property
    def n_t(self) -> int:
        return max(1, round(self.n_r / self.c_n))

    @property
    def s(self) -> float:
        return _check_retention(self.q * self.q / self.n_t)


def fading_pair(config: EqualityReplayConfig) -> tuple[np.ndarray, np.ndarray]:
    """L1 ~ U(l_low, l_high) and L2 = L1 − θ."""
    rng = replication_generator(config.seed)
    L1 = rng.uniform(config.l_low, config.l_high, size=(config.n_r, config.n_t))
    L2 = L1 - config.theta
    if np.any(L2 < 0):
        raise ModelValidationError(f"theta={config.theta} drives fading entries negative")
    return L1, L2


def replicate_equality_test(config: EqualityReplayConfig) -> tuple[McSummary, np.ndarray, float]:
    """Rejection rate of T_x over independent channel pairs, with the predicted power."""
    L1, L2 = fading_pair(config)
    s = config.s
    nu4 = standardized_fourth_moment(config.model)
    known = s if config.known_retention else None

    def _replicate(rep: int) -> tuple[float, bool]:
        H1 = sample_channel(L1, s, config.model, config.seed, replication=2 * rep + 1)
        H2 = sample_channel(L2, s, config.model, config.seed, replication=2 * rep + 2)
        result = equality_test(H1, H2, config.alpha, nu4, s=known, variance_estimator=config.variance_estimator)
        return result.T_x, result.reject

    outcomes = map_ordered(_replicate, range(config.replications), config.threads)
    values = np.array([t for t, _ in outcomes], dtype=float)
    rejections = np.array([r for _, r in outcomes], dtype=bool)
    reps = values.size
    mean = float(np.mean(values))
    var = float(np.var(values, ddof=1)) if reps > 1 else 0.0
    squares = (values - mean) ** 2
    summary = McSummary(
        replications=reps,
        statistic_name="T_x",
        empirical_mean=mean,
        mean_se=math.sqrt(var / reps),
        empirical_var=var,
        var_se=float(np.std(squares, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        reference_mean=0.0,
        reference_variance=1.0,
        rejection_rate=float(np.mean(rejections)),
        seed=config.seed,
    )
    power = predicted_power(L1, L2, s, config.model, config.alpha)
    logger.info(
        "equality replay theta=%.3g: rejection %.4f, predicted %.4f", config.theta, summary.rejection_rate, power
    )
    return summary, values, power


# ============================================================================
# Mutual information and outage
# ============================================================================

def mutual_information(H: np.ndarray, sigma2: float) -> float:
    """log det(I + HH*/σ²) in nats, factored on the smaller side."""
    H = np.asarray(H)
    if not sigma2 > 0:
        raise ModelValidationError(f"noise variance must be positive, got {sigma2}")
    if not np.all(np.isfinite(H)):
        raise ModelValidationError("channel matrix contains non-finite entries")
    gram = H.conj().T @ H if H.shape[1] < H.shape[0] else H @ H.conj().T
    gram = 0.5 * (gram + gram.conj().T)
    factor = cholesky(np.eye(gram.shape[0]) + gram / sigma2, lower=True)
    return float(2.0 * np.sum(np.log(np.real(np.diag(factor)))))


def mi_clt_params(
    d: np.ndarray,
    d_tilde: np.ndarray,
    sigma2: float,
    q: float,
    model: EntryModel,
    s: float | None = None,
    nu4: float | None = None,
) -> MiCltParams:
    """Deterministic capacity V(σ²) and the Gaussian parameters of (q/√N_r)(C − V)."""
    if not sigma2 > 0:
        raise ModelValidationError(f"noise variance must be positive, got {sigma2}")
    d = np.asarray(d, dtype=float).reshape(-1)
    d_tilde = np.asarray(d_tilde, dtype=float).reshape(-1)
    n_r, n_t = d.size, d_tilde.size
    s = _check_retention(q * q / n_t if s is None else s)
    nu4 = standardized_fourth_moment(model) if nu4 is None else float(nu4)
    if model.kappa:
        logger.warning("MI CLT parameters use the complex-entry variance term; real entries double it")

    z = -float(sigma2)
    eq = solve_scalar_mi_system(d, d_tilde, z)
    delta, delta_tilde = eq.delta.real, eq.delta_tilde.real
    t = eq.t_diag.real
    tt = eq.t_tilde_diag.real
    V = float(np.sum(np.log1p(delta_tilde * d)) + np.sum(np.log1p(delta * d_tilde)) - n_t * sigma2 * delta * delta_tilde)

    traces = float(np.sum(d**2 * t**2)) * float(np.sum(d_tilde**2 * tt**2))
    log_argument = 1.0 - z * z * traces / (n_t * n_t)
    if not 0.0 < log_argument < 1.0:
        raise StabilityError(f"log argument {log_argument:.6g} left (0, 1) at sigma2={sigma2}")
    coefficient = (nu4 - (model.kappa + 2) * s) * sigma2**2
    mu = -coefficient / (2.0 * q * math.sqrt(n_r) * n_t) * traces
    variance = coefficient / (n_r * n_t) * traces - q * q / n_r * math.log(log_argument)
    if not variance > 0:
        raise DegenerateVarianceError(f"MI variance {variance:.4g} is not positive")
    return MiCltParams(
        V=V,
        mu_log=mu,
        sigma2_log=variance,
        delta=delta,
        delta_tilde=delta_tilde,
        sigma2=float(sigma2),
        log_argument=log_argument,
    )


def t_log_statistic(C: float | np.ndarray, params: MiCltParams, q: float, n_r: int) -> float | np.ndarray:
    return (q / math.sqrt(n_r) * (np.asarray(C) - params.V) - params.mu_log) / params.sigma_log


def outage_probability(R: float | np.ndarray, params: MiCltParams, q: float, n_r: int) -> float | np.ndarray:
    """Gaussian approximation of P(C < R)."""
    value = norm.cdf(t_log_statistic(R, params, q, n_r))
    return float(value) if np.ndim(value) == 0 else value


def mi_replicates(
    d: np.ndarray,
    d_tilde: np.ndarray,
    sigma2: float,
    q: float,
    model: EntryModel,
    replications: int,
    seed: int,
    threads: int | None = None,
) -> np.ndarray:
    """Mutual information of independent channels H = (1/√(N_t s))𝔹∘(D^½ X D̃^½)."""
    d = np.asarray(d, dtype=float).reshape(-1)
    d_tilde = np.asarray(d_tilde, dtype=float).reshape(-1)
    s = _check_retention(q * q / d_tilde.size)
    L = np.sqrt(np.outer(d, d_tilde))

    def _replicate(rep: int) -> float:
        return mutual_information(sample_channel(L, s, model, seed, replication=rep), sigma2)

    return np.asarray(map_ordered(_replicate, range(replications), threads), dtype=float)


def empirical_outage_curve(capacities: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Fraction of capacities strictly below each rate."""
    caps = np.sort(np.asarray(capacities, dtype=float))
    return np.searchsorted(caps, np.asarray(rates, dtype=float), side="left") / caps.size
