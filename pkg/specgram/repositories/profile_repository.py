"""
Loading of variance profiles, channel matrices and vectors from disk.

CSV files are read header-less with pandas; structured profile specs are
YAML (which also covers JSON) validated by ``ProfileSpec``.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from ..domain.types import ProfileType
from ..spectral.errors import ConfigError, ProfileValidationError
from ..spectral.models import VarianceProfile
from ..spectral.profile import (
    make_constant_profile,
    make_separable_profile,
    uniform_diagonals,
    validate_profile,
)

logger = logging.getLogger(__name__)

_SPEC_SUFFIXES = {".yaml", ".yml", ".json"}


class UniformDraw(BaseModel):
    uniform: tuple[float, float]
    size: int = Field(ge=1)
    seed: int = 0


class ProfileSpec(BaseModel):
    """Declarative variance profile: separable, dense or constant."""

    type: ProfileType
    p: int | None = Field(default=None, ge=1)
    n: int | None = Field(default=None, ge=1)
    value: float = Field(default=1.0, gt=0.0)
    d: list[float] | UniformDraw | None = None
    d_tilde: list[float] | UniformDraw | None = None
    sigma2: list[list[float]] | None = None
    path: str | None = None
    allow_degenerate: bool = False

    @model_validator(mode="before")
    @classmethod
    def _coerce_aliases(cls, values: Any) -> Any:
        if isinstance(values, dict):
            values = dict(values)
            if "dt" in values and "d_tilde" not in values:
                values["d_tilde"] = values.pop("dt")
            if isinstance(values.get("type"), str):
                values["type"] = values["type"].strip().lower()
        return values

    @model_validator(mode="after")
    def _required_fields(self) -> ProfileSpec:
        if self.type == "constant" and (self.p is None or self.n is None):
            raise ValueError("constant profiles need p and n")
        if self.type == "separable" and (self.d is None or self.d_tilde is None):
            raise ValueError("separable profiles need d and d_tilde")
        if self.type == "dense" and self.sigma2 is None and self.path is None:
            raise ValueError("dense profiles need sigma2 or path")
        return self


def _diagonal(entry: list[float] | UniformDraw, position: int) -> np.ndarray:
    if isinstance(entry, UniformDraw):
        low, high = entry.uniform
        return uniform_diagonals(entry.size, entry.size, low, high, entry.seed)[position]
    return np.asarray(entry, dtype=float)


def separable_diagonals(
    d: list[float] | UniformDraw, d_tilde: list[float] | UniformDraw
) -> tuple[np.ndarray, np.ndarray]:
    """d and d̃ of a separable spec; uniform draws sharing seed and bounds come from one stream, d first."""
    if isinstance(d, UniformDraw) and isinstance(d_tilde, UniformDraw) and (d.seed, d.uniform) == (
        d_tilde.seed,
        d_tilde.uniform,
    ):
        return uniform_diagonals(d.size, d_tilde.size, d.uniform[0], d.uniform[1], d.seed)
    return _diagonal(d, 0), _diagonal(d_tilde, 1)


def read_mapping(path: str | Path, what: str = "config file") -> dict[str, Any]:
    """YAML (or JSON) file holding a mapping; anything else is a ConfigError."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{what} {path} is not valid YAML/JSON: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{what} {path} must hold a mapping, got {type(raw).__name__}")
    return raw


def read_csv_matrix(path: str | Path, dtype: type = float) -> np.ndarray:
    """Header-less numeric CSV; complex entries may be written as ``a+bj``."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True, comment="#")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path} is not a readable CSV: {exc}") from exc
    if frame.empty or frame.isna().to_numpy().any():
        raise ConfigError(f"{path} has missing entries")
    try:
        raw = frame.apply(lambda col: col.str.strip().str.replace(" ", "", regex=False))
        values = raw.to_numpy(dtype=str)
        if dtype is complex or np.char.find(values, "j").max() >= 0:
            matrix = np.vectorize(complex, otypes=[complex])(values)
            return matrix if dtype is complex or np.any(matrix.imag) else matrix.real.copy()
        return values.astype(float)
    except ValueError as exc:
        raise ConfigError(f"{path} is not a numeric CSV: {exc}") from exc


class ProfileRepository:
    """Builds validated profiles from CSV files, spec files or inline specs."""

    def __init__(self, base_dir: str | Path | None = None) -> None:
        self._base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    def _resolve(self, path: str | Path) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self._base_dir / path

    def load_spec(self, path: str | Path) -> ProfileSpec:
        resolved = self._resolve(path)
        raw = read_mapping(resolved, "profile spec")
        try:
            return ProfileSpec.model_validate(raw)
        except ValidationError as exc:
            raise ConfigError(f"invalid profile spec {resolved}: {exc}") from exc


    def build(self, spec: ProfileSpec) -> VarianceProfile:
        if spec.type == "constant":
            profile = make_constant_profile(spec.p, spec.n, spec.value)
        elif spec.type == "separable":
            profile = make_separable_profile(*separable_diagonals(spec.d, spec.d_tilde))
        elif spec.sigma2 is not None:
            profile = VarianceProfile(np.asarray(spec.sigma2, dtype=float))
        else:
            profile = VarianceProfile(read_csv_matrix(self._resolve(spec.path)))
        return self._checked(profile, spec.allow_degenerate)

    def load(self, source: str | Path | ProfileSpec | dict, allow_degenerate: bool = False) -> VarianceProfile:
        """Load a profile from a CSV path, a spec path, or an inline spec."""
        if isinstance(source, dict):
            try:
                source = ProfileSpec(**source)
            except ValidationError as exc:
                raise ConfigError(f"invalid profile spec: {exc}") from exc
        if isinstance(source, ProfileSpec):
            return self.build(source)
        path = self._resolve(source)
        if path.suffix.lower() in _SPEC_SUFFIXES:
            return self.build(self.load_spec(path))
        return self._checked(VarianceProfile(read_csv_matrix(path)), allow_degenerate)

    def load_matrix(self, path: str | Path) -> np.ndarray:
        return read_csv_matrix(self._resolve(path))

    def load_vector(self, path: str | Path) -> np.ndarray:
        return read_csv_matrix(self._resolve(path)).reshape(-1)

    @staticmethod
    def _checked(profile: VarianceProfile, allow_degenerate: bool) -> VarianceProfile:
        diagnostics = validate_profile(profile)
        if not diagnostics.ok and not allow_degenerate:
            raise ProfileValidationError(
                f"profile {profile.p}x{profile.n} has a column mean of "
                f"{diagnostics.sigma2_min_colmean:.3g}; set allow_degenerate to study it anyway"
            )
        logger.debug("Loaded %dx%d profile (sigma2_max=%.4g)", profile.p, profile.n, diagnostics.sigma2_max)
        return profile
