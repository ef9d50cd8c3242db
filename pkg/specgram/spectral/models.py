from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, Field, field_validator

from ..domain.types import EntryKind, Regime
from .errors import ModelValidationError, ProfileValidationError

Sampler = Callable[[np.random.Generator, tuple[int, ...]], np.ndarray]


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Dense p×n array of entry variances.

    Structural invariants (shape, finiteness, nonnegativity) are enforced on
    construction. The column-mean lower bound is reported by
    ``validate_profile`` so degenerate profiles can still be studied.
    """

    sigma2: np.ndarray

    def __post_init__(self) -> None:
        try:
            arr = np.array(self.sigma2, dtype=float, copy=True)
        except (TypeError, ValueError) as exc:
            raise ProfileValidationError(f"variance profile is not numeric: {exc}") from exc
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ProfileValidationError(
                f"variance profile must be a non-empty 2-D array, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ProfileValidationError("variance profile contains non-finite entries")
        if np.any(arr < 0):
            raise ProfileValidationError("variance profile contains negative entries")
        arr.setflags(write=False)
        object.__setattr__(self, "sigma2", arr)

    @property
    def p(self) -> int:
        return int(self.sigma2.shape[0])

    @property
    def n(self) -> int:
        return int(self.sigma2.shape[1])

    @property
    def c(self) -> float:
        return self.p / self.n

    @property
    def sigma2_max(self) -> float:
        return float(self.sigma2.max())

    @property
    def sigma2_min_colmean(self) -> float:
        return float((self.sigma2.sum(axis=0) / self.n).min())

    @property
    def sigma4(self) -> np.ndarray:
        return self.sigma2 * self.sigma2


@dataclass(frozen=True)
class ProfileDiagnostics:
    sigma2_max: float
    sigma2_min_colmean: float
    ok: bool


@dataclass(frozen=True)
class SparsityConfig:
    """Bernoulli mask parameters: q, the retention s = q²/n and the regime."""

    n: int
    q: float
    regime: Regime = "moderate"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ModelValidationError(f"n must be positive, got {self.n}")
        if not (self.q > 0 and math.isfinite(self.q)):
            raise ModelValidationError(f"q must be a positive finite real, got {self.q}")
        if self.q * self.q / self.n > 1.0 + 1e-12:
            raise ModelValidationError(
                f"q={self.q:.6g} exceeds sqrt(n)={math.sqrt(self.n):.6g}; retention must lie in (0, 1]"
            )
        if self.regime not in ("moderate", "high"):
            raise ModelValidationError(f"unknown regime {self.regime!r}")
        if self.regime == "high" and self.q >= math.sqrt(self.n):
            raise ModelValidationError("high regime requires q < sqrt(n)")

    @classmethod
    def from_exponent(cls, n: int, phi: float, regime: Regime = "high", scale: float = 1.0) -> SparsityConfig:
        return cls(n=n, q=scale * float(n) ** phi, regime=regime)

    @classmethod
    def from_retention(cls, n: int, s: float, regime: Regime = "moderate") -> SparsityConfig:
        if not 0 < s <= 1:
            raise ModelValidationError(f"retention s must lie in (0, 1], got {s}")
        return cls(n=n, q=math.sqrt(s * n), regime=regime)

    @property
    def s(self) -> float:
        return min(1.0, self.q * self.q / self.n)

    @property
    def phi(self) -> float:
        if self.n == 1:
            return 0.5
        return math.log(self.q) / math.log(self.n)

    def with_regime(self, regime: Regime) -> SparsityConfig:
        return SparsityConfig(n=self.n, q=self.q, regime=regime)


_GAUSSIAN_NU4 = {"real_gaussian": 3.0, "complex_gaussian": 2.0}


@dataclass(frozen=True)
class EntryModel:
    """Law of the standardized entries w_ij/σ_ij."""

    kind: EntryKind
    kappa: int
    nu4: float | None = None
    shape: float = 2.0
    scale: float = 1.0
    sampler: Sampler | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kappa not in (0, 1):
            raise ModelValidationError(f"kappa must be 0 or 1, got {self.kappa}")
        if self.kind in _GAUSSIAN_NU4:
            expected_kappa = 1 if self.kind == "real_gaussian" else 0
            if self.kappa != expected_kappa:
                raise ModelValidationError(f"{self.kind} requires kappa={expected_kappa}")
            object.__setattr__(self, "nu4", _GAUSSIAN_NU4[self.kind])
        elif self.kind in ("shifted_gamma", "complex_shifted_gamma"):
            if self.shape <= 0 or self.scale <= 0:
                raise ModelValidationError("gamma shape and scale must be positive")
            if (self.kind == "complex_shifted_gamma") != (self.kappa == 0):
                raise ModelValidationError(f"{self.kind} has the wrong kappa")
            real_nu4 = 3.0 + 6.0 / self.shape
            nu4 = real_nu4 if self.kappa == 1 else (real_nu4 + 1.0) / 2.0
            object.__setattr__(self, "nu4", nu4)
        elif self.kind == "custom":
            if self.sampler is None:
                raise ModelValidationError("custom entry models need a sampler")
        else:
            raise ModelValidationError(f"unknown entry kind {self.kind!r}")
        if self.nu4 is not None and self.nu4 < 1.0:
            raise ModelValidationError(f"nu4 must be >= 1, got {self.nu4}")

    @classmethod
    def real_gaussian(cls) -> EntryModel:
        return cls(kind="real_gaussian", kappa=1)

    @classmethod
    def complex_gaussian(cls) -> EntryModel:
        return cls(kind="complex_gaussian", kappa=0)

    @classmethod
    def shifted_gamma(cls, shape: float = 2.0, scale: float = 1.0) -> EntryModel:
        return cls(kind="shifted_gamma", kappa=1, shape=shape, scale=scale)

    @classmethod
    def complex_shifted_gamma(cls, shape: float = 2.0, scale: float = 1.0) -> EntryModel:
        return cls(kind="complex_shifted_gamma", kappa=0, shape=shape, scale=scale)

    @classmethod
    def custom(cls, sampler: Sampler, kappa: int, nu4: float | None = None) -> EntryModel:
        return cls(kind="custom", kappa=kappa, nu4=nu4, sampler=sampler)

    @property
    def is_complex(self) -> bool:
        return self.kappa == 0

    def _real_gamma(self, rng: np.random.Generator, size: tuple[int, ...]) -> np.ndarray:
        draws = rng.gamma(self.shape, self.scale, size=size)
        return (draws - self.shape * self.scale) / (self.scale * math.sqrt(self.shape))

    def sample(self, rng: np.random.Generator, size: tuple[int, ...]) -> np.ndarray:
        """Draw standardized entries (mean 0, E|w|² = 1)."""
        if self.kind == "real_gaussian":
            return rng.standard_normal(size)
        if self.kind == "complex_gaussian":
            re = rng.standard_normal(size)
            im = rng.standard_normal(size)
            return (re + 1j * im) / math.sqrt(2.0)
        if self.kind == "shifted_gamma":
            return self._real_gamma(rng, size)
        if self.kind == "complex_shifted_gamma":
            re = self._real_gamma(rng, size)
            im = self._real_gamma(rng, size)
            return (re + 1j * im) / math.sqrt(2.0)
        assert self.sampler is not None
        return np.asarray(self.sampler(rng, size))


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    standard_error: float
    samples: int


@dataclass(frozen=True, eq=False)
class DetEquivalent:
    """Solution (t, t̃) of the canonical system at z."""

    z: complex
    t: np.ndarray
    t_tilde: np.ndarray
    residual: float
    iterations: int

    @property
    def m0(self) -> complex:
        return complex(np.mean(self.t))

    @property
    def m0_under(self) -> complex:
        return complex(np.mean(self.t_tilde))

    def conjugate(self) -> DetEquivalent:
        return DetEquivalent(
            z=self.z.conjugate(),
            t=np.conj(self.t),
            t_tilde=np.conj(self.t_tilde),
            residual=self.residual,
            iterations=self.iterations,
        )


@dataclass(frozen=True, eq=False)
class ScalarMiEquivalent:
    z: complex
    delta: complex
    delta_tilde: complex
    t_diag: np.ndarray
    t_tilde_diag: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True, eq=False)
class USystems:
    """Solutions of the excluded-column systems at one z."""

    u: np.ndarray
    u_tilde: np.ndarray
    y_breve: np.ndarray
    y_tilde: np.ndarray
    a: np.ndarray
    a_tilde: np.ndarray


@dataclass(frozen=True, eq=False)
class FluctKernelCache:
    """Task-local quantities of the mean kernel at one z."""

    z: complex
    det: DetEquivalent
    a: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    u: USystems | None = None

    @property
    def mean(self) -> complex:
        return complex(np.mean(self.psi))


@dataclass(frozen=True)
class ContourEstimate:
    """A contour-integral value with its node-doubling diagnostics."""

    value: float
    nodes: int
    refined_value: float | None = None
    rel_change: float | None = None
    accuracy_warning: bool = False

    def diagnostics(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "nodes": self.nodes,
            "refined_value": self.refined_value,
            "rel_change": self.rel_change,
            "accuracy_warning": self.accuracy_warning,
        }


@dataclass(frozen=True, eq=False)
class GramSample:
    S: np.ndarray
    eigenvalues: np.ndarray | None
    seed: int
    mask_density: float
    replication: int | None = None

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.S)))


@dataclass(frozen=True)
class OracleResult:
    mc_estimate: float
    standard_error: float
    formula_value: float
    replications: int


class McSummary(BaseModel):
    """Aggregated Monte Carlo statistics of one fluctuation statistic."""
    replications: int
    statistic_name: str
    empirical_mean: float
    mean_se: float
    empirical_var: float
    var_se: float
    ks_to_gaussian: float | None = None
    third_abs_moment: float | None = None
    reference_mean: float | None = None
    reference_variance: float | None = None
    rejection_rate: float | None = Field(default=None, ge=0.0, le=1.0)
    seed: int


class EqualityTestResult(BaseModel):
    """Outcome of the large-scale fading equality test."""
    D_x: float
    T_x: float
    sigma2_H0_hat: float
    reject: bool
    alpha: float
    s_hat: float
    q_hat: float
    predicted_power: float | None = None

    @field_validator("predicted_power")
    @classmethod
    def _power_in_unit_interval(cls, value: float | None) -> float | None:
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValueError(f"predicted_power must lie in [0, 1], got {value}")
        return value


@dataclass(frozen=True)
class MiCltParams:
    V: float
    mu_log: float
    sigma2_log: float
    delta: float
    delta_tilde: float
    sigma2: float
    log_argument: float

    @property
    def sigma_log(self) -> float:
        return math.sqrt(self.sigma2_log)
