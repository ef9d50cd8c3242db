"""Sampling of the sparse heteroscedastic Gram model and Monte Carlo batteries."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import eigh
from sklearn.linear_model import LinearRegression

from ..domain.types import Regime
from .contour import Contour, TestFunction
from .detequiv import lsd_density, solve_canonical_system, spectral_support_bound
from .errors import DomainError, ModelValidationError, SamplingError
from .fluct import clt_cov, clt_mean, corrected_centering, lsd_integral, mean_integral
from .models import (
    EntryModel,
    GramSample,
    McSummary,
    OracleResult,
    SparsityConfig,
    VarianceProfile,
)
from .profile import standardized_fourth_moment
from .workers import map_ordered

logger = logging.getLogger(__name__)

HERMITIAN_ATOL = 1e-8
ORACLE_CHUNK = 100_000
MIN_REPLICATIONS = 100

Centering = Literal["auto", "fourth_moment", "full", "none"]


# ============================================================================
# Sampling
# ============================================================================

def replication_generator(seed: int, replication: int | None = None) -> np.random.Generator:
    """Counter-based stream for one replication of a master seed."""
    spawn_key = () if replication is None else (int(replication),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=spawn_key)))


def _check_mask_density(density: float, s: float, count: int) -> None:
    if s >= 1.0 or count == 0:
        return
    sd = math.sqrt(s * (1.0 - s) / count)
    if abs(density - s) > 5.0 * sd:
        logger.warning("mask density %.5f is more than 5 s.d. from s=%.5f", density, s)


def sample_gram(
    profile: VarianceProfile,
    sparsity: SparsityConfig,
    model: EntryModel,
    seed: int,
    replication: int | None = None,
    compute_eigenvalues: bool = True,
) -> GramSample:
    """Draw S = YY* with y_ij = b_ij·σ_ij·w_ij/√(ns)."""
    if sparsity.n != profile.n:
        raise ModelValidationError(f"sparsity n={sparsity.n} does not match profile n={profile.n}")
    p, n, s = profile.p, profile.n, sparsity.s
    rng = replication_generator(seed, replication)
    if s >= 1.0:
        mask = np.ones((p, n), dtype=bool)
    else:
        mask = rng.random((p, n)) < s
    w = model.sample(rng, (p, n))
    if not np.all(np.isfinite(w)):
        raise SamplingError(f"{model.kind} sampler returned non-finite values")
    y = np.where(mask, w * np.sqrt(profile.sigma2), 0.0) / math.sqrt(n * s)
    S = y @ y.conj().T
    S = 0.5 * (S + S.conj().T)
    density = float(mask.mean())
    _check_mask_density(density, s, mask.size)
    eigs = np.maximum(eigenvalues(S), 0.0) if compute_eigenvalues else None
    return GramSample(S=S, eigenvalues=eigs, seed=int(seed), mask_density=density, replication=replication)


def _require_hermitian(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ModelValidationError(f"expected a square matrix, got shape {S.shape}")
    if np.max(np.abs(S - S.conj().T), initial=0.0) > HERMITIAN_ATOL:
        raise ModelValidationError("matrix is not Hermitian")
    return S


def _real_embedding(S: np.ndarray) -> np.ndarray:
    re, im = S.real, S.imag
    return np.block([[re, -im], [im, re]])


def eigenvalues(S: np.ndarray) -> np.ndarray:
    """Ascending spectrum of a Hermitian matrix."""
    S = _require_hermitian(S)
    if not np.iscomplexobj(S) or not np.any(S.imag):
        return eigh(np.ascontiguousarray(S.real), eigvals_only=True)
    doubled = eigh(_real_embedding(S), eigvals_only=True)
    return doubled.reshape(-1, 2).mean(axis=1)


def largest_eigenvalue(S: np.ndarray) -> float:
    S = _require_hermitian(S)
    if not np.iscomplexobj(S) or not np.any(S.imag):
        size = S.shape[0]
        return float(eigh(np.ascontiguousarray(S.real), eigvals_only=True, subset_by_index=[size - 1, size - 1])[0])
    size = 2 * S.shape[0]
    return float(eigh(_real_embedding(S), eigvals_only=True, subset_by_index=[size - 1, size - 1])[0])


# ============================================================================
# Statistics
# ============================================================================

def empirical_average(sample: GramSample, f: TestFunction) -> float:
    """(1/p)Σ f(λ_i), read off the trace when f is linear."""
    p = sample.S.shape[0]
    if f.name == "zero":
        return 0.0
    if f.name == "x":
        return sample.trace / p
    eigs = sample.eigenvalues if sample.eigenvalues is not None else np.maximum(eigenvalues(sample.S), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.asarray(f.value(np.asarray(eigs, dtype=float)))
    if not np.all(np.isfinite(values)):
        raise DomainError(f"eigenvalues fall outside the real domain of {f.label}")
    return float(np.mean(values.real))


def centered_lss(
    sample: GramSample,
    profile: VarianceProfile,
    sparsity: SparsityConfig,
    f: TestFunction,
    pi_integral: float | None = None,
    correction: float | None = None,
    contour: Contour | None = None,
) -> float:
    """√p·q·[(1/p)Σ f(λ_i) − ∫ f dπ_n], plus the high-regime correction when given."""
    if pi_integral is None:
        pi_integral = 0.0 if f.name == "zero" else lsd_integral(profile, f, contour)
    value = math.sqrt(profile.p) * sparsity.q * (empirical_average(sample, f) - pi_integral)
    if correction is not None:
        value += correction
    return value


def stieltjes_discrepancy(sample: GramSample, profile: VarianceProfile, z: complex) -> float:
    """|(1/p)Tr(S − z)⁻¹ − m⁰_n(z)|."""
    eigs = sample.eigenvalues if sample.eigenvalues is not None else eigenvalues(sample.S)
    empirical = complex(np.mean(1.0 / (eigs - z)))
    return abs(empirical - solve_canonical_system(profile, z).m0)


def esd_kolmogorov_distance(
    eigs: np.ndarray,
    profile: VarianceProfile,
    eta: float = 5e-3,
    grid_size: int = 2000,
    threads: int | None = None,
) -> float:
    """Kolmogorov distance between the empirical ESD and π_n from its smoothed density."""
    bound = spectral_support_bound(profile)
    grid = np.linspace(-0.05 * bound, 1.05 * bound, grid_size)
    density = lsd_density(profile, grid, eta, threads=threads)
    cdf = cumulative_trapezoid(density, grid, initial=0.0)
    cdf = cdf / cdf[-1]
    lam = np.sort(np.asarray(eigs, dtype=float))
    model_cdf = np.interp(lam, grid, cdf)
    ranks = np.arange(1, lam.size + 1) / lam.size
    return float(max(np.max(np.abs(ranks - model_cdf)), np.max(np.abs(ranks - 1.0 / lam.size - model_cdf))))


def convergence_slope(ns: list[int] | np.ndarray, errors: list[float] | np.ndarray) -> float:
    """Least-squares slope of log(error) against log(n)."""
    x = np.log(np.asarray(ns, dtype=float)).reshape(-1, 1)
    y = np.log(np.asarray(errors, dtype=float))
    if x.shape[0] < 2 or not np.all(np.isfinite(y)):
        raise DomainError("need at least two positive errors to fit a slope")
    return float(LinearRegression().fit(x, y).coef_[0])


def spectral_norm_check(
    profile: VarianceProfile,
    sparsity: SparsityConfig,
    model: EntryModel,
    draws: int,
    seed: int,
    slack: float = 0.05,
    threads: int | None = None,
) -> float:
    """Fraction of draws whose top eigenvalue stays below the support bound times (1 + slack)."""
    limit = spectral_support_bound(profile) * (1.0 + slack)

    def _draw(rep: int) -> bool:
        sample = sample_gram(profile, sparsity, model, seed, replication=rep, compute_eigenvalues=False)
        return largest_eigenvalue(sample.S) <= limit

    return float(np.mean(map_ordered(_draw, range(draws), threads)))


# ============================================================================
# Quadratic-form oracle
# ============================================================================

def quadratic_form_oracle(
    model: EntryModel,
    profile_column: np.ndarray,
    s: float,
    A: np.ndarray,
    B: np.ndarray,
    reps: int,
    seed: int,
) -> OracleResult:
    """Monte Carlo E[(x*Ax − TrAΣ)(x*Bx − TrBΣ)] for x = 𝔹∘w/√s against its closed form."""
    column = np.asarray(profile_column, dtype=float).reshape(-1)
    A = _require_hermitian(A)
    B = _require_hermitian(B)
    if A.shape != (column.size, column.size) or B.shape != A.shape:
        raise ModelValidationError("A and B must be p×p with p the profile column length")
    if not 0 < s <= 1:
        raise ModelValidationError(f"retention s must lie in (0, 1], got {s}")
    if reps < 2:
        raise SamplingError("need at least two replications")
    nu4 = standardized_fourth_moment(model)
    sigma = np.diag(column)
    trace_a = float(np.real(np.trace(A @ sigma)))
    trace_b = float(np.real(np.trace(B @ sigma)))
    formula = (model.kappa + 1) * float(np.real(np.trace(A @ sigma @ B @ sigma))) + (
        nu4 / s - model.kappa - 2
    ) * float(np.real(np.sum(np.diag(A) * np.diag(B) * column**2)))

    rng = replication_generator(seed)
    scale = np.sqrt(column / s)
    products = np.empty(reps)
    for start in range(0, reps, ORACLE_CHUNK):
        size = min(ORACLE_CHUNK, reps - start)
        mask = rng.random((size, column.size)) < s
        x = np.where(mask, model.sample(rng, (size, column.size)), 0.0) * scale
        qa = np.einsum("ki,ij,kj->k", x.conj(), A, x).real - trace_a
        qb = np.einsum("ki,ij,kj->k", x.conj(), B, x).real - trace_b
        products[start : start + size] = qa * qb
    return OracleResult(
        mc_estimate=float(np.mean(products)),
        standard_error=float(np.std(products, ddof=1) / math.sqrt(reps)),
        formula_value=float(formula),
        replications=reps,
    )


# ============================================================================
# Monte Carlo battery
# ============================================================================

@dataclass(frozen=True)
class BatteryConfig:
    """One Monte Carlo run of a centred linear spectral statistic."""

    profile: VarianceProfile
    sparsity: SparsityConfig
    model: EntryModel
    f: TestFunction
    replications: int = 2000
    seed: int = 0
    regime: Regime | None = None
    centering: Centering = "auto"
    with_reference: bool = True
    contour: Contour | None = None
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.replications < MIN_REPLICATIONS:
            raise ModelValidationError(f"need at least {MIN_REPLICATIONS} replications, got {self.replications}")
        if self.sparsity.n != self.profile.n:
            raise ModelValidationError(
                f"sparsity n={self.sparsity.n} does not match profile n={self.profile.n}"
            )
        if self.centering not in ("auto", "fourth_moment", "full", "none"):
            raise ModelValidationError(f"unknown centering {self.centering!r}")

    @property
    def effective_sparsity(self) -> SparsityConfig:
        if self.regime is None or self.regime == self.sparsity.regime:
            return self.sparsity
        return self.sparsity.with_regime(self.regime)

    @property
    def effective_centering(self) -> Centering:
        if self.centering != "auto":
            return self.centering
        return "fourth_moment" if self.effective_sparsity.regime == "high" else "none"


def _centering_shift(config: BatteryConfig, sparsity: SparsityConfig) -> float | None:
    mode = config.effective_centering
    if mode == "none" or config.f.name == "zero":
        return None
    if mode == "fourth_moment":
        return corrected_centering(config.profile, config.f, config.contour, sparsity, config.model)
    estimate = mean_integral(
        config.profile, config.f, sparsity.with_regime("moderate"), config.model,
        contour=config.contour, theta_regime="moderate",
    )
    return -estimate.value


def _references(config: BatteryConfig, sparsity: SparsityConfig, shifted: bool) -> tuple[float, float]:
    if config.f.name == "zero":
        return 0.0, 0.0
    if shifted or sparsity.regime == "high":
        mean = 0.0
    else:
        mean = clt_mean(config.profile, config.f, config.contour, sparsity, config.model).value
    variance = clt_cov(config.profile, config.f, config.f, config.contour, None, sparsity, config.model).value
    return mean, variance


def _moment_summary(values: np.ndarray) -> tuple[float, float, float, float]:
    reps = values.size
    mean = float(np.sum(values) / reps)
    deviations = values - mean
    squares = deviations * deviations
    var = float(np.sum(squares) / (reps - 1))
    mean_se = math.sqrt(var / reps)
    var_se = float(np.std(squares, ddof=1) / math.sqrt(reps))
    return mean, mean_se, var, var_se


def mc_battery(config: BatteryConfig) -> tuple[McSummary, np.ndarray]:
    """Replicate sample → spectrum → centred statistic; summary plus per-replication values."""
    sparsity = config.effective_sparsity
    f = config.f
    pi_integral = 0.0 if f.name == "zero" else lsd_integral(config.profile, f, config.contour)
    shift = _centering_shift(config, sparsity)
    logger.info(
        "mc_battery: %d replications of %s at p=%d, n=%d, q=%.4g (%s regime)",
        config.replications, f.label, config.profile.p, config.profile.n, sparsity.q, sparsity.regime,
    )

    def _replicate(rep: int) -> float:
        sample = sample_gram(
            config.profile, sparsity, config.model, config.seed, replication=rep,
            compute_eigenvalues=not f.is_linear_trace,
        )
        return centered_lss(sample, config.profile, sparsity, f, pi_integral=pi_integral, correction=shift)

    values = np.asarray(map_ordered(_replicate, range(config.replications), config.threads), dtype=float)
    mean, mean_se, var, var_se = _moment_summary(values)

    ref_mean = ref_var = None
    ks = third = None
    if config.with_reference:
        ref_mean, ref_var = _references(config, sparsity, shift is not None)
    if ref_var is not None and ref_var > 0:
        standardized = (values - ref_mean) / math.sqrt(ref_var)
    elif var > 0:
        standardized = (values - mean) / math.sqrt(var)
    else:
        standardized = None
    if standardized is not None:
        ks = float(stats.kstest(standardized, "norm").statistic)
        third = float(np.mean(np.abs(standardized) ** 3))

    summary = McSummary(
        replications=config.replications,
        statistic_name=f"L[{f.label}]",
        empirical_mean=mean,
        mean_se=mean_se,
        empirical_var=var,
        var_se=var_se,
        ks_to_gaussian=ks,
        third_abs_moment=third,
        reference_mean=ref_mean,
        reference_variance=ref_var,
        seed=config.seed,
    )
    return summary, values
