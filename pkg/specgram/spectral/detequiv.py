"""Deterministic equivalents: the canonical (t, t̃) system, LSD density and the scalar δ/δ̃ system."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..config import get_settings
from .errors import DomainError, FixedPointError, ProfileValidationError
from .models import DetEquivalent, ScalarMiEquivalent, VarianceProfile
from .workers import map_ordered

logger = logging.getLogger(__name__)

NEAR_AXIS = 1e-3
CONTINUATION_START = 0.1
CONTINUATION_RATIO = 0.5


@dataclass(frozen=True, eq=False)
class _ReducedSystem:
    """σ² with duplicate rows and columns merged; counts act as weights."""

    kernel: np.ndarray
    row_weights: np.ndarray
    col_weights: np.ndarray
    row_index: np.ndarray
    col_index: np.ndarray
    n: int


def _reduce(profile: VarianceProfile) -> _ReducedSystem:
    rows, row_index, row_counts = np.unique(
        profile.sigma2, axis=0, return_inverse=True, return_counts=True
    )
    kernel, col_index, col_counts = np.unique(
        rows, axis=1, return_inverse=True, return_counts=True
    )
    return _ReducedSystem(
        kernel=kernel,
        row_weights=row_counts.astype(float),
        col_weights=col_counts.astype(float),
        row_index=np.asarray(row_index).reshape(-1),
        col_index=np.asarray(col_index).reshape(-1),
        n=profile.n,
    )


def _check_domain(z: complex) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"spectral argument must be finite, got {z}")
    if z.imag == 0.0 and z.real >= 0.0:
        raise DomainError(f"spectral argument {z} lies on the nonnegative real axis")
    return z


def _relaxed_iteration(
    row_map,
    col_map,
    tt0: np.ndarray,
    tol: float,
    max_iter: int,
    damping: float,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    tt = tt0
    step = math.inf
    for it in range(1, max_iter + 1):
        t = row_map(tt)
        tt_next = col_map(t)
        scale = max(1.0, float(np.max(np.abs(tt_next))))
        step = float(np.max(np.abs(tt_next - tt))) / scale
        if not math.isfinite(step):
            raise FixedPointError("fixed-point iterate became non-finite", residual=step, iterations=it)
        if step <= tol:
            t = row_map(tt_next)
            residual = float(np.max(np.abs(col_map(t) - tt_next))) / scale
            if residual <= tol:
                return t, tt_next, residual, it
        tt = tt + damping * (tt_next - tt)
    raise FixedPointError(
        f"fixed point not reached in {max_iter} iterations (last residual {step:.3e})",
        residual=step,
        iterations=max_iter,
    )


def _solve_reduced(
    system: _ReducedSystem,
    z: complex,
    tt0: np.ndarray,
    tol: float,
    max_iter: int,
    damping: float,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    kernel, n = system.kernel, system.n
    kernel_cols = kernel * system.col_weights
    kernel_rows = kernel.T * system.row_weights

    def row_map(tt: np.ndarray) -> np.ndarray:
        return -1.0 / (z * (1.0 + kernel_cols @ tt / n))

    def col_map(t: np.ndarray) -> np.ndarray:
        return -1.0 / (z * (1.0 + kernel_rows @ t / n))

    return _relaxed_iteration(row_map, col_map, tt0, tol, max_iter, damping)


def _needs_continuation(profile: VarianceProfile, z: complex) -> bool:
    return 0.0 < abs(z.imag) < NEAR_AXIS and 0.0 <= z.real <= spectral_support_bound(profile)


def _continuation_heights(target: float) -> list[float]:
    heights = []
    eta = CONTINUATION_START
    while eta > target:
        heights.append(eta)
        eta *= CONTINUATION_RATIO
    heights.append(target)
    return heights


def solve_canonical_system(
    profile: VarianceProfile,
    z: complex,
    tol: float | None = None,
    max_iter: int | None = None,
    damping: float | None = None,
) -> DetEquivalent:
    """Solve t_i = −1/(z[1 + (1/n)Σ_j σ²_ij t̃_j]), t̃_j = −1/(z[1 + (1/n)Σ_i σ²_ij t_i]).

    Iterates on t̃ from t̃ = −1/z with a relaxed simultaneous update. Arguments
    within 1e-3 of the spectrum are reached by continuation from Im z = 0.1.
    """
    cfg = get_settings()
    z = _check_domain(z)
    tol = cfg.tol if tol is None else tol
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    max_iter = cfg.max_iter if max_iter is None else max_iter
    damping = cfg.damping if damping is None else damping

    system = _reduce(profile)
    cols = system.kernel.shape[1]
    total_iterations = 0
    if _needs_continuation(profile, z):
        sign = 1.0 if z.imag > 0 else -1.0
        tt = np.full(cols, -1.0 / complex(z.real, sign * CONTINUATION_START), dtype=complex)
        for eta in _continuation_heights(abs(z.imag)):
            zk = complex(z.real, sign * eta)
            t_red, tt, residual, iterations = _solve_reduced(system, zk, tt, tol, max_iter, damping)
            total_iterations += iterations
    else:
        tt0 = np.full(cols, -1.0 / z, dtype=complex)
        t_red, tt, residual, total_iterations = _solve_reduced(system, z, tt0, tol, max_iter, damping)

    t = t_red[system.row_index]
    t_tilde = tt[system.col_index]
    if z.imag > 0 and (np.any(t.imag < 0) or np.any(t_tilde.imag < 0)):
        raise FixedPointError(
            f"solution at z={z} left the upper half-plane", residual=residual, iterations=total_iterations
        )
    return DetEquivalent(z=z, t=t, t_tilde=t_tilde, residual=residual, iterations=total_iterations)


def canonical_defect(profile: VarianceProfile, det: DetEquivalent) -> float:
    """Sup-norm defect of (t, t̃) re-substituted into the canonical system."""
    sigma2, n, z = profile.sigma2, profile.n, det.z
    t_map = -1.0 / (z * (1.0 + sigma2 @ det.t_tilde / n))
    tt_map = -1.0 / (z * (1.0 + sigma2.T @ det.t / n))
    return float(max(np.max(np.abs(t_map - det.t)), np.max(np.abs(tt_map - det.t_tilde))))


def stieltjes_m0(det: DetEquivalent) -> dict[str, complex]:
    return {"m0": det.m0, "m0_under": det.m0_under}


def spectral_support_bound(profile: VarianceProfile) -> float:
    return profile.sigma2_max * (1.0 + math.sqrt(profile.c)) ** 2


def spectral_support_lower_bound(profile: VarianceProfile) -> float:
    """Lower edge bound of supp(π_n); 0 unless the profile is separable with p < n.

    For σ²_ij = d_i d̃_j the Gram matrix dominates d_min·d̃_min times the white
    one, whose spectrum starts at (1 − √c)².
    """
    sigma2 = profile.sigma2
    if profile.p >= profile.n or not np.all(sigma2 > 0):
        return 0.0
    d = sigma2[:, 0]
    d_tilde = sigma2[0, :] / sigma2[0, 0]
    if not np.allclose(np.outer(d, d_tilde), sigma2, rtol=1e-12, atol=0.0):
        return 0.0
    return float(d.min() * d_tilde.min() * (1.0 - math.sqrt(profile.c)) ** 2)


def lsd_density(
    profile: VarianceProfile,
    x_grid: np.ndarray,
    eta: float,
    tol: float | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Stieltjes inversion (1/π)·Im m⁰_n(x + iη) on a real grid."""
    if eta <= 0:
        raise DomainError(f"eta must be positive, got {eta}")
    grid = np.asarray(x_grid, dtype=float).reshape(-1)
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise DomainError("density grid must be strictly increasing")

    def _point(x: float) -> float:
        try:
            det = solve_canonical_system(profile, complex(x, eta), tol=tol)
        except FixedPointError as exc:
            raise FixedPointError(
                f"density solve failed at x={x:.6g}: {exc}", residual=exc.residual, iterations=exc.iterations
            ) from exc
        return max(det.m0.imag / math.pi, 0.0)

    return np.asarray(map_ordered(_point, grid.tolist(), threads), dtype=float)


def density_edge_mask(x_grid: np.ndarray, density: np.ndarray, eta: float, level: float = 1e-3) -> np.ndarray:
    """Flag grid points within 2η of an estimated support edge."""
    grid = np.asarray(x_grid, dtype=float)
    dens = np.asarray(density, dtype=float)
    inside = dens > level * max(float(dens.max()), 1e-300)
    edges = grid[np.flatnonzero(np.diff(inside.astype(int)) != 0)]
    flagged = np.zeros(grid.shape, dtype=bool)
    for edge in edges:
        flagged |= np.abs(grid - edge) <= 2 * eta + np.max(np.diff(grid), initial=0.0)
    return flagged


def solve_scalar_mi_system(
    d: np.ndarray,
    d_tilde: np.ndarray,
    z: complex,
    tol: float | None = None,
    max_iter: int | None = None,
    damping: float | None = None,
) -> ScalarMiEquivalent:
    """δ = (1/N_t)Tr D T, δ̃ = (1/N_t)Tr D̃ T̃ with T = [−z(I + δ̃D)]⁻¹, T̃ = [−z(I + δD̃)]⁻¹."""
    cfg = get_settings()
    z = _check_domain(z)
    tol = cfg.tol if tol is None else tol
    max_iter = cfg.max_iter if max_iter is None else max_iter
    damping = cfg.damping if damping is None else damping
    d = np.asarray(d, dtype=float).reshape(-1)
    d_tilde = np.asarray(d_tilde, dtype=float).reshape(-1)
    if d.size == 0 or d_tilde.size == 0 or np.any(d <= 0) or np.any(d_tilde <= 0):
        raise ProfileValidationError("d and d_tilde must be non-empty and strictly positive")
    n_t = d_tilde.size

    def row_map(dt: np.ndarray) -> np.ndarray:
        t = 1.0 / (-z * (1.0 + dt[0] * d))
        return np.array([np.dot(d, t) / n_t])

    def col_map(delta: np.ndarray) -> np.ndarray:
        tt = 1.0 / (-z * (1.0 + delta[0] * d_tilde))
        return np.array([np.dot(d_tilde, tt) / n_t])

    start = np.array([np.sum(d_tilde) * (-1.0 / z) / n_t], dtype=complex)
    delta, delta_tilde, residual, iterations = _relaxed_iteration(
        row_map, col_map, start, tol, max_iter, damping
    )
    dl, dtl = complex(delta[0]), complex(delta_tilde[0])
    return ScalarMiEquivalent(
        z=z,
        delta=dl,
        delta_tilde=dtl,
        t_diag=1.0 / (-z * (1.0 + dtl * d)),
        t_tilde_diag=1.0 / (-z * (1.0 + dl * d_tilde)),
        residual=residual,
        iterations=iterations,
    )
