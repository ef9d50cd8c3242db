"""Variance profiles, sparsity settings and entry-law moments."""
from __future__ import annotations

import logging
import math

import numpy as np

from .errors import ProfileValidationError, SamplingError
from .models import EntryModel, MomentEstimate, ProfileDiagnostics, VarianceProfile

logger = logging.getLogger(__name__)

_MOMENT_CHUNK = 1_000_000


def _positive_vector(values: object, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ProfileValidationError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ProfileValidationError(f"{name} must contain strictly positive finite entries")
    return arr


def make_separable_profile(d: object, d_tilde: object) -> VarianceProfile:
    """Profile σ²_ij = d_i·d̃_j of a Kronecker-structured channel."""
    rows = _positive_vector(d, "d")
    cols = _positive_vector(d_tilde, "d_tilde")
    return VarianceProfile(np.outer(rows, cols))


def make_constant_profile(p: int, n: int, value: float = 1.0) -> VarianceProfile:
    if p < 1 or n < 1:
        raise ProfileValidationError(f"profile dimensions must be positive, got {p}x{n}")
    if not value > 0:
        raise ProfileValidationError(f"constant variance must be positive, got {value}")
    return VarianceProfile(np.full((p, n), float(value)))


def uniform_diagonals(
    p: int, n: int, low: float = 1.0, high: float = 2.0, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Draw d ~ U(low, high)^p and d̃ ~ U(low, high)^n from one seeded stream."""
    if not 0 < low < high:
        raise ProfileValidationError(f"need 0 < low < high, got ({low}, {high})")
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, size=p), rng.uniform(low, high, size=n)


def make_uniform_separable_profile(
    p: int, n: int, low: float = 1.0, high: float = 2.0, seed: int = 0
) -> VarianceProfile:
    d, d_tilde = uniform_diagonals(p, n, low, high, seed)
    return make_separable_profile(d, d_tilde)


def validate_profile(profile: VarianceProfile) -> ProfileDiagnostics:
    sigma2_max = profile.sigma2_max
    sigma2_min = profile.sigma2_min_colmean
    ok = bool(math.isfinite(sigma2_max) and sigma2_min > 0 and profile.c > 0)
    if not ok:
        logger.warning(
            "Variance profile %dx%d fails the column-mean bound (min column mean %.3g)",
            profile.p,
            profile.n,
            sigma2_min,
        )
    return ProfileDiagnostics(sigma2_max=sigma2_max, sigma2_min_colmean=sigma2_min, ok=ok)


def require_valid(profile: VarianceProfile) -> VarianceProfile:
    diagnostics = validate_profile(profile)
    if not diagnostics.ok:
        raise ProfileValidationError(
            f"profile column means must be positive (min {diagnostics.sigma2_min_colmean:.3g})"
        )
    return profile


def estimate_fourth_moment(
    model: EntryModel, samples: int = 10_000_000, seed: int = 0
) -> MomentEstimate:
    """Monte Carlo estimate of E|w|⁴ for a standardized sampler."""
    if samples < 2:
        raise SamplingError("need at least two samples")
    rng = np.random.default_rng(seed)
    chunks: list[np.ndarray] = []
    remaining = samples
    while remaining > 0:
        size = min(_MOMENT_CHUNK, remaining)
        draws = np.asarray(model.sample(rng, (size,)))
        if not np.all(np.isfinite(draws)):
            raise SamplingError(f"{model.kind} sampler returned non-finite values")
        chunks.append(np.abs(draws) ** 4)
        remaining -= size
    fourth = np.concatenate(chunks)
    return MomentEstimate(
        value=float(np.mean(fourth)),
        standard_error=float(np.std(fourth, ddof=1) / math.sqrt(samples)),
        samples=samples,
    )


def standardized_fourth_moment(model: EntryModel, samples: int = 10_000_000, seed: int = 0) -> float:
    if model.nu4 is not None:
        return float(model.nu4)
    estimate = estimate_fourth_moment(model, samples=samples, seed=seed)
    logger.info(
        "Estimated nu4 for custom entries: %.6f +/- %.2g", estimate.value, estimate.standard_error
    )
    return estimate.value
