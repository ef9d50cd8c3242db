"""CLT mean and covariance kernels of linear spectral statistics and their contour integrals."""
from __future__ import annotations

import logging
import math
from typing import Literal

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ..config import get_settings
from ..domain.types import Regime
from .contour import (
    Contour,
    TestFunction,
    check_nested,
    closed_integral,
    default_contour,
    dilate_contour,
    validate_contour,
)
from .detequiv import solve_canonical_system
from .errors import ContourError, SingularKernelError
from .models import (
    ContourEstimate,
    DetEquivalent,
    EntryModel,
    FluctKernelCache,
    SparsityConfig,
    USystems,
    VarianceProfile,
)
from .profile import standardized_fourth_moment
from .workers import map_ordered

logger = logging.getLogger(__name__)

ARead = Literal["printed", "symmetric"]
PAIR_CHUNK_BYTES = 64 * 1024 * 1024


# ============================================================================
# Coefficient matrices
# ============================================================================

def _checked_denominator(values: np.ndarray, label: str) -> np.ndarray:
    limit = get_settings().singular_denominator
    small = np.abs(values) < limit
    if np.any(small):
        index = int(np.flatnonzero(small.reshape(-1))[0] % values.shape[-1])
        raise SingularKernelError(
            f"kernel denominator vanishes at {label}={index}", index=index, label=label
        )
    return values


def _column_denominators(profile: VarianceProfile, t: np.ndarray) -> np.ndarray:
    """1 + (1/n)Σ_i σ²_il t_i for every column l (t may carry a leading batch axis)."""
    return _checked_denominator(1.0 + (t @ profile.sigma2) / profile.n, "l")


def a_matrix(
    profile: VarianceProfile,
    det1: DetEquivalent,
    det2: DetEquivalent,
    reading: ARead | None = None,
) -> np.ndarray:
    """a_lm(z1, z2) with both denominator factors indexed by l unless ``reading='symmetric'``."""
    reading = reading or get_settings().a_matrix_reading
    sigma2, n = profile.sigma2, profile.n
    numerator = (sigma2.T * (det1.t * det2.t)) @ sigma2 / n
    den1 = _column_denominators(profile, det1.t)
    den2 = _column_denominators(profile, det2.t)
    if reading == "symmetric":
        return numerator / (n * np.outer(den1, den2))
    return numerator / (n * (den1 * den2)[:, None])


def a_tilde_matrix(profile: VarianceProfile, det: DetEquivalent) -> np.ndarray:
    """á_im = (1/n²)Σ_j σ²_ij σ²_mj t̃_j² / (1 + (1/n)Σ_j σ²_ij t̃_j)²."""
    sigma2, n = profile.sigma2, profile.n
    den = _checked_denominator(1.0 + sigma2 @ det.t_tilde / n, "i")
    numerator = (sigma2 * det.t_tilde**2) @ sigma2.T
    return numerator / (n * n * (den * den)[:, None])


def t1_diagonal(profile: VarianceProfile, det: DetEquivalent) -> np.ndarray:
    """Diagonal of T^(1)(z) = (I + (1/n)Σ_k t̃_k Σ_k)⁻¹."""
    return 1.0 / (1.0 + profile.sigma2 @ det.t_tilde / profile.n)


# ============================================================================
# Linear systems
# ============================================================================

def _factor(matrix: np.ndarray, label: str, index: int | None = None):
    lu, piv = lu_factor(matrix, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() < get_settings().singular_pivot:
        where = int(np.argmin(pivots)) if index is None else index
        raise SingularKernelError(f"singular system at {label}={where}", index=where, label=label)
    return lu, piv


def solve_excluded_column_systems(
    a: np.ndarray, method: Literal["rank_one", "direct"] | None = None, label: str = "j"
) -> np.ndarray:
    """Column j of the result solves y_l = Σ_{i≠j} a_li y_i + n·a_lj."""
    method = method or get_settings().u_system_method
    a = np.asarray(a, dtype=complex)
    size = a.shape[0]
    eye = np.eye(size, dtype=complex)
    if method == "direct":
        y = np.empty_like(a)
        for j in range(size):
            system = eye - a
            system[:, j] = eye[:, j]
            y[:, j] = lu_solve(_factor(system, label, j), size * a[:, j])
        return y
    resolvent = lu_solve(_factor(eye - a, label), eye)
    diag = np.diag(resolvent)
    small = np.abs(diag) < get_settings().singular_pivot
    if np.any(small):
        j = int(np.flatnonzero(small)[0])
        raise SingularKernelError(f"singular excluded-column system at {label}={j}", index=j, label=label)
    return size * (resolvent - eye) / diag[None, :]


def excluded_column_defect(a: np.ndarray, y: np.ndarray) -> float:
    size = a.shape[0]
    worst = 0.0
    for j in range(size):
        coupling = a.copy()
        coupling[:, j] = 0.0
        residual = y[:, j] - coupling @ y[:, j] - size * a[:, j]
        worst = max(worst, float(np.max(np.abs(residual))))
    return worst


def solve_u_systems(
    profile: VarianceProfile,
    det: DetEquivalent,
    method: Literal["rank_one", "direct"] | None = None,
) -> USystems:
    z = det.z
    a = a_matrix(profile, det, det)
    a_tilde = a_tilde_matrix(profile, det)
    y_breve = solve_excluded_column_systems(a, method, label="j")
    y_tilde = solve_excluded_column_systems(a_tilde, method, label="m")
    # the p-dimensional system carries n, not p, as its source factor
    y_tilde = y_tilde * (profile.n / profile.p)
    return USystems(
        u=np.diag(y_breve) / (z * z * det.t_tilde**2),
        u_tilde=np.diag(y_tilde) / (z * z * det.t**2),
        y_breve=y_breve,
        y_tilde=y_tilde,
        a=a,
        a_tilde=a_tilde,
    )


def h_diagonal(a: np.ndarray) -> np.ndarray:
    """H_jj of the triangular system from the pivots of (I − A) eliminated without pivoting."""
    return _h_diagonal_batch(np.asarray(a, dtype=complex)[None])[0]


def h_diagonal_direct(a: np.ndarray) -> np.ndarray:
    """Reference path: solve each leading block (I − A_{<j})H = n·a_{<j,j} explicitly."""
    a = np.asarray(a, dtype=complex)
    size = a.shape[0]
    out = np.empty(size, dtype=complex)
    for j in range(size):
        if j == 0:
            out[0] = size * a[0, 0]
            continue
        block = np.eye(j, dtype=complex) - a[:j, :j]
        h = lu_solve(_factor(block, "j", j), size * a[:j, j])
        out[j] = a[j, :j] @ h + size * a[j, j]
    return out


def _h_diagonal_batch(a: np.ndarray) -> np.ndarray:
    size = a.shape[-1]
    work = np.eye(size, dtype=complex)[None] - a
    pivots = np.empty(a.shape[:-1], dtype=complex)
    limit = get_settings().singular_pivot
    for k in range(size):
        pivot = work[:, k, k]
        if np.any(np.abs(pivot) < limit):
            raise SingularKernelError(f"singular leading block at j={k}", index=k, label="j")
        pivots[:, k] = pivot
        if k + 1 < size:
            work[:, k + 1 :, k + 1 :] -= (
                work[:, k + 1 :, k, None] * work[:, None, k, k + 1 :] / pivot[:, None, None]
            )
    return size * (1.0 - pivots)


# ============================================================================
# Mean kernel
# ============================================================================

def _nu4(model: EntryModel, nu4: float | None) -> float:
    return standardized_fourth_moment(model) if nu4 is None else float(nu4)


def theta_sources(
    profile: VarianceProfile,
    det: DetEquivalent,
    sparsity: SparsityConfig,
    model: EntryModel,
    u: USystems | None = None,
    regime: Regime | None = None,
    nu4: float | None = None,
) -> np.ndarray:
    regime = regime or sparsity.regime
    nu4 = _nu4(model, nu4)
    p, n, q = profile.p, profile.n, sparsity.q
    z, t, tt = det.z, det.t, det.t_tilde
    sigma2, sigma4 = profile.sigma2, profile.sigma4
    row_hadamard = sigma4 @ tt**2          # Σ_j t̃_j² σ⁴_ij, per row i
    col_hadamard = sigma4.T @ t**2         # Σ_i t_i² σ⁴_ij, per column j
    weighted = sigma2.T @ (t**3 * row_hadamard)
    fourth = (n * nu4 / (q * math.sqrt(p))) * (
        z**3 * tt**2 * weighted / (n * n) + z**2 * tt**3 * col_hadamard / n
    )
    if regime == "high":
        return fourth
    kappa = model.kappa
    if kappa and u is None:
        u = solve_u_systems(profile, det)
    u_vec = u.u if kappa else np.zeros(n, dtype=complex)
    u_tilde = u.u_tilde if kappa else np.zeros(p, dtype=complex)
    row_source = sigma2.T @ (t**3 * (kappa * u_tilde - (kappa + 2) * row_hadamard / n))
    col_source = kappa * u_vec - (kappa + 2) * col_hadamard / n
    scale = q / math.sqrt(p)
    return fourth + scale * z**3 * tt**2 * row_source / n + scale * z**2 * tt**3 * col_source


def mean_kernel_cache(
    profile: VarianceProfile,
    z: complex,
    sparsity: SparsityConfig,
    model: EntryModel,
    regime: Regime | None = None,
    det: DetEquivalent | None = None,
    theta: np.ndarray | None = None,
    nu4: float | None = None,
) -> FluctKernelCache:
    det = det if det is not None else solve_canonical_system(profile, z)
    a = a_matrix(profile, det, det)
    u = None
    if theta is None:
        if (regime or sparsity.regime) == "moderate" and model.kappa:
            u = solve_u_systems(profile, det)
        theta = theta_sources(profile, det, sparsity, model, u=u, regime=regime, nu4=nu4)
    system = np.eye(profile.n, dtype=complex) - a
    psi = lu_solve(_factor(system, "j"), np.asarray(theta, dtype=complex))
    return FluctKernelCache(z=det.z, det=det, a=a, theta=np.asarray(theta), psi=psi, u=u)


def mean_kernel(
    profile: VarianceProfile,
    z: complex,
    sparsity: SparsityConfig,
    model: EntryModel,
    regime: Regime | None = None,
    theta: np.ndarray | None = None,
) -> complex:
    """ℰ_n(z) = (1/n)Σ_j ψ_j with (I − A(z,z))ψ = θ."""
    return mean_kernel_cache(profile, z, sparsity, model, regime=regime, theta=theta).mean


# ============================================================================
# Covariance kernel
# ============================================================================

def _kernel_coefficients(
    profile: VarianceProfile, sparsity: SparsityConfig, model: EntryModel, regime: Regime, nu4: float
) -> tuple[float, float]:
    """Weights of Σ_j H_jj and of the fourth-moment Hadamard term."""
    p, n, s, kappa = profile.p, profile.n, sparsity.s, model.kappa
    if regime == "high":
        return 0.0, nu4 / (p * n)
    return s * (kappa + 1) / p, (nu4 - kappa * s - 2 * s) / (p * n)


def cov_kernel_G(
    profile: VarianceProfile,
    z1: complex,
    z2: complex,
    sparsity: SparsityConfig,
    model: EntryModel,
    regime: Regime | None = None,
    det1: DetEquivalent | None = None,
    det2: DetEquivalent | None = None,
) -> complex:
    regime = regime or sparsity.regime
    det1 = det1 if det1 is not None else solve_canonical_system(profile, z1)
    det2 = det2 if det2 is not None else solve_canonical_system(profile, z2)
    h_weight, hadamard_weight = _kernel_coefficients(profile, sparsity, model, regime, _nu4(model, None))
    value = 0.0j
    if h_weight:
        value += h_weight * complex(np.sum(h_diagonal(a_matrix(profile, det1, det2))))
    u1, u2 = t1_diagonal(profile, det1), t1_diagonal(profile, det2)
    value += hadamard_weight * complex((u1 * u2) @ profile.sigma4 @ (det1.t_tilde * det2.t_tilde))
    return value


def _a_batch(profile: VarianceProfile, t1: np.ndarray, t2s: np.ndarray, reading: str) -> np.ndarray:
    sigma2, n = profile.sigma2, profile.n
    numerator = (sigma2.T[None, :, :] * (t1[None, None, :] * t2s[:, None, :])) @ sigma2 / n
    den1 = _column_denominators(profile, t1)
    den2 = _column_denominators(profile, t2s)
    if reading == "symmetric":
        return numerator / (n * den1[None, :, None] * den2[:, None, :])
    return numerator / (n * (den1[None, :] * den2)[:, :, None])


def _h_sum_row(profile: VarianceProfile, t1: np.ndarray, t2s: np.ndarray) -> np.ndarray:
    """Σ_j H_jj(z1, z2) for one z1 against a batch of z2."""
    reading = get_settings().a_matrix_reading
    n = profile.n
    per_pair = 16 * n * max(n, profile.p) * 2
    chunk = max(1, PAIR_CHUNK_BYTES // per_pair)
    out = np.empty(t2s.shape[0], dtype=complex)
    for start in range(0, t2s.shape[0], chunk):
        block = t2s[start : start + chunk]
        out[start : start + chunk] = _h_diagonal_batch(_a_batch(profile, t1, block, reading)).sum(axis=1)
    return out


def cov_kernel_matrix(
    profile: VarianceProfile,
    dets1: list[DetEquivalent],
    dets2: list[DetEquivalent],
    sparsity: SparsityConfig,
    model: EntryModel,
    regime: Regime | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """G(z1_k, z2_l) for every pair of solved arguments."""
    regime = regime or sparsity.regime
    h_weight, hadamard_weight = _kernel_coefficients(profile, sparsity, model, regime, _nu4(model, None))
    u1 = np.array([t1_diagonal(profile, d) for d in dets1])
    u2 = np.array([t1_diagonal(profile, d) for d in dets2])
    v1 = np.array([d.t_tilde for d in dets1])
    v2 = np.array([d.t_tilde for d in dets2])
    kernel = hadamard_weight * np.einsum("ki,li,ij,kj,lj->kl", u1, u2, profile.sigma4, v1, v2, optimize=True)
    if h_weight:
        t2s = np.array([d.t for d in dets2])
        rows = map_ordered(lambda d: _h_sum_row(profile, d.t, t2s), dets1, threads)
        kernel = kernel + h_weight * np.array(rows)
    return kernel


# ============================================================================
# Contour integrals
# ============================================================================

def _solve_nodes(profile: VarianceProfile, nodes: np.ndarray, threads: int | None) -> list[DetEquivalent]:
    return map_ordered(lambda z: solve_canonical_system(profile, complex(z)), nodes.tolist(), threads)


def _refine(
    coarse: float, fine: float, nodes: int, label: str
) -> ContourEstimate:
    rtol = get_settings().quadrature_rtol
    rel_change = abs(fine - coarse) / max(abs(fine), 1e-300)
    warn = rel_change > rtol and abs(fine - coarse) > rtol
    if warn:
        logger.warning("%s quadrature moved by %.2e under node doubling", label, rel_change)
    return ContourEstimate(
        value=fine, nodes=nodes, refined_value=fine, rel_change=rel_change, accuracy_warning=warn
    )


def lsd_integral(
    profile: VarianceProfile,
    f: TestFunction,
    contour: Contour | None = None,
    threads: int | None = None,
) -> float:
    """∫ f dπ_n = −(1/2πi)∮ f(z) m⁰_n(z) dz."""
    contour = contour or default_contour(profile, [f])
    validate_contour(contour, profile, [f])
    nodes, weights = contour.upper_path()
    dets = _solve_nodes(profile, nodes, threads)
    m0 = np.array([d.m0 for d in dets])
    closed = closed_integral(f.value(nodes) * m0, weights)
    return float((-closed / (2j * math.pi)).real)


def _mean_integral_once(
    profile: VarianceProfile,
    f: TestFunction,
    contour: Contour,
    sparsity: SparsityConfig,
    model: EntryModel,
    regime: Regime,
    nu4: float | None,
    threads: int | None,
) -> float:
    nodes, weights = contour.upper_path()
    dets = _solve_nodes(profile, nodes, threads)

    def _kernel(det: DetEquivalent) -> complex:
        try:
            return mean_kernel_cache(profile, det.z, sparsity, model, regime=regime, det=det, nu4=nu4).mean
        except SingularKernelError as exc:
            raise ContourError(
                f"mean kernel singular at z={det.z:.4g} on the contour ({exc}); enlarge v0 or x_r"
            ) from exc

    kernel = np.array(map_ordered(_kernel, dets, threads))
    closed = closed_integral(f.value(nodes) * kernel, weights)
    return float((-closed / (2j * math.pi)).real)


def mean_integral(
    profile: VarianceProfile,
    f: TestFunction,
    sparsity: SparsityConfig,
    model: EntryModel,
    contour: Contour | None = None,
    theta_regime: Regime = "moderate",
    nu4: float | None = None,
    check_convergence: bool = True,
    threads: int | None = None,
) -> ContourEstimate:
    """−(1/2πi)∮ f ℰ_n dz with θ built for ``theta_regime``."""
    contour = contour or default_contour(profile, [f])
    validate_contour(contour, profile, [f])
    coarse = _mean_integral_once(profile, f, contour, sparsity, model, theta_regime, nu4, threads)
    nodes = contour.upper_path()[0].size
    if not check_convergence:
        return ContourEstimate(value=coarse, nodes=nodes)
    fine_contour = contour.doubled()
    fine = _mean_integral_once(profile, f, fine_contour, sparsity, model, theta_regime, nu4, threads)
    return _refine(coarse, fine, fine_contour.upper_path()[0].size, "mean")


def clt_mean(
    profile: VarianceProfile,
    f: TestFunction,
    contour: Contour | None,
    sparsity: SparsityConfig,
    model: EntryModel,
    check_convergence: bool = True,
    threads: int | None = None,
) -> ContourEstimate:
    """μ_n(X_f); zero in the high regime, where the corrected statistic is centred."""
    if sparsity.regime == "high":
        return ContourEstimate(value=0.0, nodes=0)
    return mean_integral(
        profile, f, sparsity, model, contour=contour, theta_regime="moderate",
        check_convergence=check_convergence, threads=threads,
    )


def corrected_centering(
    profile: VarianceProfile,
    f: TestFunction,
    contour: Contour | None,
    sparsity: SparsityConfig,
    model: EntryModel,
    nu4: float | None = None,
    check_convergence: bool = True,
    threads: int | None = None,
) -> float:
    """+(1/2πi)∮ f ℰ_n dz with the fourth-moment-only θ."""
    if sparsity.regime != "high":
        logger.warning("corrected centering requested outside the high regime (q=%.4g)", sparsity.q)
    if nu4 is not None and nu4 == 0.0:
        return 0.0
    estimate = mean_integral(
        profile, f, sparsity, model, contour=contour, theta_regime="high", nu4=nu4,
        check_convergence=check_convergence, threads=threads,
    )
    return -estimate.value


def _fourth_moment_factor(
    profile: VarianceProfile, dets: list[DetEquivalent], derivative: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """∮ f′(z) [T^(1)(z)]_ii t̃_j(z) dz for every (i, j)."""
    u = np.array([t1_diagonal(profile, d) for d in dets])
    v = np.array([d.t_tilde for d in dets])
    upper = (u * (weights * derivative)[:, None]).T @ v
    return upper - np.conj(upper)


def _cov_once(
    profile: VarianceProfile,
    f: TestFunction,
    g: TestFunction,
    first: Contour,
    second: Contour,
    sparsity: SparsityConfig,
    model: EntryModel,
    regime: Regime,
    threads: int | None,
) -> float:
    z1, w1 = first.upper_path()
    z2, w2 = second.upper_path()
    dets1 = _solve_nodes(profile, z1, threads)
    dets2 = _solve_nodes(profile, z2, threads)
    h_weight, hadamard_weight = _kernel_coefficients(profile, sparsity, model, regime, _nu4(model, None))

    f_factor = _fourth_moment_factor(profile, dets1, f.derivative(z1), w1)
    g_factor = _fourth_moment_factor(profile, dets2, g.derivative(z2), w2)
    double = hadamard_weight * complex(np.sum(profile.sigma4 * f_factor * g_factor))

    if h_weight:
        # z1 on the upper half against all of the second contour
        t2_full = np.concatenate([np.array([d.t for d in dets2]), np.conj(np.array([d.t for d in dets2]))])
        z2_full = np.concatenate([z2, np.conj(z2)])
        w2_full = np.concatenate([w2, -np.conj(w2)])
        rows = map_ordered(lambda d: _h_sum_row(profile, d.t, t2_full), dets1, threads)
        g_weights = w2_full * g.derivative(z2_full)
        upper = complex(np.sum((w1 * f.derivative(z1))[:, None] * np.array(rows) * g_weights[None, :]))
        double += h_weight * 2.0 * upper.real
    return float((-double / (4.0 * math.pi**2)).real)


def clt_cov(
    profile: VarianceProfile,
    f: TestFunction,
    g: TestFunction,
    contour1: Contour | None,
    contour2: Contour | None,
    sparsity: SparsityConfig,
    model: EntryModel,
    check_convergence: bool = True,
    threads: int | None = None,
) -> ContourEstimate:
    """ν_n(X_f, X_g) = −(1/4π²)∮∮ f′(z1) g′(z2) G(z1, z2) dz1 dz2."""
    regime = sparsity.regime
    contour1 = contour1 or default_contour(profile, [f, g])
    contour2 = contour2 or dilate_contour(contour1, [f, g])
    for c in (contour1, contour2):
        validate_contour(c, profile, [f, g])
    check_nested(contour1, contour2)
    coarse = _cov_once(profile, f, g, contour1, contour2, sparsity, model, regime, threads)
    nodes = contour1.upper_path()[0].size
    if not check_convergence:
        return ContourEstimate(value=coarse, nodes=nodes)
    fine = _cov_once(profile, f, g, contour1.doubled(), contour2.doubled(), sparsity, model, regime, threads)
    return _refine(coarse, fine, 2 * nodes, "covariance")


def clt_cov_by_differentiation(
    profile: VarianceProfile,
    f: TestFunction,
    g: TestFunction,
    contour1: Contour,
    contour2: Contour,
    sparsity: SparsityConfig,
    model: EntryModel,
    step: float = 1e-4,
    threads: int | None = None,
) -> float:
    """−(1/4π²)∮∮ f g ∂²G/∂z1∂z2 with a central-difference mixed derivative."""
    check_nested(contour1, contour2)
    z1, w1 = contour1.upper_path()
    z2, w2 = contour2.full_path()

    def _dets(nodes: np.ndarray, shift: float) -> list[DetEquivalent]:
        return _solve_nodes(profile, nodes + shift, threads)

    upper2 = z2[: z2.size // 2]
    shifted2 = {}
    for sign in (1.0, -1.0):
        dets = _dets(upper2, sign * step)
        shifted2[sign] = dets + [d.conjugate() for d in dets]
    mixed = np.zeros((z1.size, z2.size), dtype=complex)
    for s1 in (1.0, -1.0):
        dets1 = _dets(z1, s1 * step)
        for s2 in (1.0, -1.0):
            mixed += s1 * s2 * cov_kernel_matrix(profile, dets1, shifted2[s2], sparsity, model, threads=threads)
    mixed /= 4.0 * step * step
    upper = complex(np.sum((w1 * f.value(z1))[:, None] * mixed * (w2 * g.value(z2))[None, :]))
    return float(-2.0 * upper.real / (4.0 * math.pi**2))
