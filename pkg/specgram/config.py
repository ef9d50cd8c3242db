from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Iterator
import os

try:
    from dotenv import load_dotenv
except ImportError:  # pragma: no cover - optional dependency
    load_dotenv = None

if load_dotenv:
    load_dotenv()


def _getenv_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def _getenv_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        return default


def _normalize_choice(raw: str | None, allowed: tuple[str, ...]) -> str:
    value = (raw or allowed[0]).strip().lower()
    return value if value in allowed else allowed[0]


A_MATRIX_READINGS = ("printed", "symmetric")
U_SYSTEM_METHODS = ("rank_one", "direct")


@dataclass(frozen=True)
class Settings:
    threads: int
    # Fixed-point solver
    tol: float
    max_iter: int
    damping: float
    # Contour quadrature
    nodes_per_edge: int
    v0: float
    contour_dilation: float
    quadrature_rtol: float
    # Kernel evaluation
    a_matrix_reading: str
    u_system_method: str
    singular_denominator: float
    singular_pivot: float


settings = Settings(
    threads=max(1, _getenv_int("SPECGRAM_THREADS", 1)),
    tol=_getenv_float("SPECGRAM_TOL", 1e-12),
    max_iter=_getenv_int("SPECGRAM_MAX_ITER", 10_000),
    damping=_getenv_float("SPECGRAM_DAMPING", 0.5),
    nodes_per_edge=_getenv_int("SPECGRAM_NODES_PER_EDGE", 48),
    v0=_getenv_float("SPECGRAM_V0", 1.0),
    contour_dilation=_getenv_float("SPECGRAM_DILATION", 1.15),
    quadrature_rtol=_getenv_float("SPECGRAM_QUAD_RTOL", 1e-6),
    a_matrix_reading=_normalize_choice(os.getenv("SPECGRAM_A_READING"), A_MATRIX_READINGS),
    u_system_method=_normalize_choice(os.getenv("SPECGRAM_U_METHOD"), U_SYSTEM_METHODS),
    singular_denominator=_getenv_float("SPECGRAM_SINGULAR_DENOM", 1e-8),
    singular_pivot=_getenv_float("SPECGRAM_SINGULAR_PIVOT", 1e-12),
)

_RUNTIME_OVERRIDES: dict[str, Any] = {}


def get_settings() -> Settings:
    if not _RUNTIME_OVERRIDES:
        return settings
    base = settings
    return Settings(
        threads=_RUNTIME_OVERRIDES.get("threads", base.threads),
        tol=_RUNTIME_OVERRIDES.get("tol", base.tol),
        max_iter=_RUNTIME_OVERRIDES.get("max_iter", base.max_iter),
        damping=_RUNTIME_OVERRIDES.get("damping", base.damping),
        nodes_per_edge=_RUNTIME_OVERRIDES.get("nodes_per_edge", base.nodes_per_edge),
        v0=_RUNTIME_OVERRIDES.get("v0", base.v0),
        contour_dilation=_RUNTIME_OVERRIDES.get(
            "contour_dilation", base.contour_dilation
        ),
        quadrature_rtol=_RUNTIME_OVERRIDES.get(
            "quadrature_rtol", base.quadrature_rtol
        ),
        a_matrix_reading=_RUNTIME_OVERRIDES.get(
            "a_matrix_reading", base.a_matrix_reading
        ),
        u_system_method=_RUNTIME_OVERRIDES.get(
            "u_system_method", base.u_system_method
        ),
        singular_denominator=_RUNTIME_OVERRIDES.get(
            "singular_denominator", base.singular_denominator
        ),
        singular_pivot=_RUNTIME_OVERRIDES.get("singular_pivot", base.singular_pivot),
    )


def update_settings(overrides: dict[str, Any]) -> Settings:
    normalized: dict[str, Any] = {}
    int_keys = {"threads", "max_iter", "nodes_per_edge"}
    float_keys = {
        "tol",
        "damping",
        "v0",
        "contour_dilation",
        "quadrature_rtol",
        "singular_denominator",
        "singular_pivot",
    }
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "a_matrix_reading":
            normalized[key] = _normalize_choice(str(value), A_MATRIX_READINGS)
        elif key == "u_system_method":
            normalized[key] = _normalize_choice(str(value), U_SYSTEM_METHODS)
        elif key in int_keys:
            normalized[key] = int(value)
        elif key in float_keys:
            normalized[key] = float(value)
        else:
            normalized[key] = value
    if "threads" in normalized:
        normalized["threads"] = max(1, normalized["threads"])
    _RUNTIME_OVERRIDES.update(normalized)
    return get_settings()


def reset_settings() -> Settings:
    """Drop every runtime override."""
    _RUNTIME_OVERRIDES.clear()
    return settings


@contextmanager
def overridden_settings(overrides: dict[str, Any]) -> Iterator[Settings]:
    """Apply overrides for the duration of a block, then restore the previous ones."""
    previous = dict(_RUNTIME_OVERRIDES)
    try:
        yield update_settings(overrides)
    finally:
        _RUNTIME_OVERRIDES.clear()
        _RUNTIME_OVERRIDES.update(previous)
