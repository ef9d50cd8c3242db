"""Rectangular integration contours, Gauss–Legendre panels and analytic test functions."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.special import roots_legendre

from ..config import get_settings
from .detequiv import spectral_support_bound, spectral_support_lower_bound
from .errors import ConfigError, ContourError
from .models import VarianceProfile

logger = logging.getLogger(__name__)

MIN_PANEL_NODES = 12
DERIVATIVE_RTOL = 1e-6

ComplexMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Contour:
    """Positively oriented rectangle [x_left, x_right] × [−v0, v0]."""

    x_left: float
    x_right: float
    v0: float
    nodes_per_edge: int = 48

    def __post_init__(self) -> None:
        if not self.x_right > self.x_left:
            raise ContourError(f"x_right={self.x_right} must exceed x_left={self.x_left}")
        if not self.v0 > 0:
            raise ContourError(f"v0 must be positive, got {self.v0}")
        if self.nodes_per_edge < 2:
            raise ContourError(f"nodes_per_edge must be at least 2, got {self.nodes_per_edge}")

    @property
    def center(self) -> float:
        return 0.5 * (self.x_left + self.x_right)

    def doubled(self) -> Contour:
        return Contour(self.x_left, self.x_right, self.v0, 2 * self.nodes_per_edge)

    def _segment(self, a: complex, b: complex) -> tuple[np.ndarray, np.ndarray]:
        panels = max(1, math.ceil(abs(b - a) / (2.0 * self.v0)))
        per_panel = max(MIN_PANEL_NODES, math.ceil(self.nodes_per_edge / panels))
        x, w = roots_legendre(per_panel)
        edges = a + (b - a) * np.linspace(0.0, 1.0, panels + 1)
        nodes, weights = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            nodes.append(0.5 * (lo + hi) + half * x)
            weights.append(half * w)
        return np.concatenate(nodes), np.concatenate(weights)

    def upper_path(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and complex dz-weights of the upper half, from x_right up, across and down to x_left."""
        xr, xl, top = complex(self.x_right), complex(self.x_left), 1j * self.v0
        pieces = [self._segment(xr, xr + top), self._segment(xr + top, xl + top), self._segment(xl + top, xl)]
        return np.concatenate([p[0] for p in pieces]), np.concatenate([p[1] for p in pieces])

    def full_path(self) -> tuple[np.ndarray, np.ndarray]:
        """Whole contour; the lower half is the mirrored upper half with reversed orientation."""
        nodes, weights = self.upper_path()
        return np.concatenate([nodes, np.conj(nodes)]), np.concatenate([weights, -np.conj(weights)])

    def contains(self, point: complex) -> bool:
        point = complex(point)
        return self.x_left <= point.real <= self.x_right and abs(point.imag) <= self.v0

    def strictly_encloses(self, other: Contour) -> bool:
        return self.x_left < other.x_left and self.x_right > other.x_right and self.v0 > other.v0


def closed_integral(values: np.ndarray, weights: np.ndarray) -> complex:
    """∮ F dz from upper-half samples of F with F(z̄) = conj F(z)."""
    upper = complex(np.sum(np.asarray(values) * weights))
    return upper - upper.conjugate()


@dataclass(frozen=True)
class TestFunction:
    """Analytic test function paired with its complex derivative."""

    __test__ = False

    name: str
    value: ComplexMap
    derivative: ComplexMap
    exclusion: tuple[complex, ...] = ()
    params: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{v:g}" for v in self.params.values())

    @property
    def is_linear_trace(self) -> bool:
        return self.name in {"x", "zero"}

    def derivative_error(self, points: Iterable[complex], step: float = 1e-6) -> float:
        """Largest relative error of f′ against central differences at the given points."""
        z = np.asarray(list(points), dtype=complex)
        numeric = (self.value(z + step) - self.value(z - step)) / (2 * step)
        exact = self.derivative(z)
        return float(np.max(np.abs(numeric - exact) / np.maximum(np.abs(exact), 1.0)))


def zero_function() -> TestFunction:
    return TestFunction("zero", lambda z: np.zeros_like(z), lambda z: np.zeros_like(z))


def identity_function() -> TestFunction:
    return TestFunction("x", lambda z: np.asarray(z), lambda z: np.ones_like(z))


def square_function() -> TestFunction:
    return TestFunction("x2", lambda z: np.asarray(z) ** 2, lambda z: 2 * np.asarray(z))


def log1p_scaled(sigma2: float = 1.0) -> TestFunction:
    """f(x) = log(1 + x/σ²), f′(x) = 1/(σ² + x), branch point at −σ²."""
    if not sigma2 > 0:
        raise ConfigError(f"log1p_scaled needs sigma2 > 0, got {sigma2}")
    return TestFunction(
        "log1p_scaled",
        lambda z: np.log1p(np.asarray(z) / sigma2),
        lambda z: 1.0 / (sigma2 + np.asarray(z)),
        exclusion=(complex(-sigma2),),
        params={"sigma2": float(sigma2)},
    )


def parse_test_function(spec: str) -> TestFunction:
    """Build a built-in test function from ``name[:param]``."""
    name, _, raw = spec.strip().partition(":")
    if name == "x":
        return identity_function()
    if name == "x2":
        return square_function()
    if name == "zero":
        return zero_function()
    if name == "log1p_scaled":
        try:
            return log1p_scaled(float(raw) if raw else 1.0)
        except ValueError as exc:
            raise ConfigError(f"bad log1p_scaled parameter {raw!r}") from exc
    raise ConfigError(f"unknown test function {spec!r}; expected x, x2, zero or log1p_scaled:sigma2")


def _left_clamp(x_left: float, functions: Iterable[TestFunction]) -> float:
    for f in functions:
        for point in f.exclusion:
            if abs(point.imag) < 1e-15 and point.real < 0 and x_left <= 0.5 * point.real:
                x_left = 0.5 * point.real
    return x_left


def default_contour(
    profile: VarianceProfile,
    functions: Iterable[TestFunction] = (),
    v0: float | None = None,
    nodes_per_edge: int | None = None,
) -> Contour:
    cfg = get_settings()
    x_right = 1.2 * spectral_support_bound(profile)
    x_left = _left_clamp(-0.1 * x_right, functions)
    return Contour(
        x_left=x_left,
        x_right=x_right,
        v0=cfg.v0 if v0 is None else v0,
        nodes_per_edge=cfg.nodes_per_edge if nodes_per_edge is None else nodes_per_edge,
    )


def dilate_contour(
    contour: Contour, functions: Iterable[TestFunction] = (), factor: float | None = None
) -> Contour:
    """Second contour: the first dilated about its centre, kept clear of exclusion points."""
    factor = get_settings().contour_dilation if factor is None else factor
    if factor <= 1:
        raise ContourError(f"dilation factor must exceed 1, got {factor}")
    half = 0.5 * (contour.x_right - contour.x_left)
    x_left = contour.center - factor * half
    for f in functions:
        for point in f.exclusion:
            if abs(point.imag) < 1e-15 and point.real < contour.x_left and x_left <= 0.5 * (
                contour.x_left + point.real
            ):
                x_left = 0.5 * (contour.x_left + point.real)
    return Contour(
        x_left=x_left,
        x_right=contour.center + factor * half,
        v0=factor * contour.v0,
        nodes_per_edge=contour.nodes_per_edge,
    )


def validate_contour(
    contour: Contour, profile: VarianceProfile, functions: Iterable[TestFunction] = ()
) -> None:
    bound = spectral_support_bound(profile)
    if contour.x_right <= bound:
        raise ContourError(
            f"x_right={contour.x_right:.6g} does not clear the support bound {bound:.6g}; increase x_r"
        )
    lower = spectral_support_lower_bound(profile)
    if lower <= 0 and contour.x_left >= 0:
        raise ContourError(f"x_left={contour.x_left:.6g} must be negative when the support may reach 0")
    if lower > 0 and contour.x_left >= lower:
        raise ContourError(
            f"x_left={contour.x_left:.6g} must lie below the support edge {lower:.6g}"
        )
    for f in functions:
        for point in f.exclusion:
            if contour.contains(point):
                raise ContourError(
                    f"test function {f.label} is singular at {point} inside the contour; move x_l right"
                )


def check_nested(first: Contour, second: Contour) -> None:
    if not (second.strictly_encloses(first) or first.strictly_encloses(second)):
        raise ContourError("contours overlap; the second contour must strictly enclose the first")
