"""
Validated run configuration for every subcommand.

Values come from a JSON/YAML config file merged with command-line flags.
The sparsity level q may be a literal or an expression in n such as
``0.5*sqrt(n)`` or ``n^(1/3)``.
"""
from __future__ import annotations

import ast
import math
import operator
from typing import Any, Callable

from pydantic import BaseModel, Field, field_validator, model_validator

from ..domain.types import EntryKind, Regime, Subcommand, VarianceEstimator
from ..spectral.errors import ConfigError
from ..spectral.models import EntryModel
from ..repositories.profile_repository import ProfileSpec

MAX_SEED = 2**64 - 1

_BINARY: dict[type, Callable[[float, float], float]] = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCTIONS: dict[str, Callable[[float], float]] = {"sqrt": math.sqrt, "log": math.log, "exp": math.exp}


def evaluate_q(expression: str | float | int, n: int, variable: str = "n") -> float:
    """Evaluate a sparsity expression at the given dimension."""
    if isinstance(expression, (int, float)):
        return float(expression)
    text = str(expression).strip().replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse q expression {expression!r}") from exc

    def _eval(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return _eval(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in (variable, "n", "N_t"):
            return float(n)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
            return _BINARY[type(node.op)](_eval(node.left), _eval(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            value = _eval(node.operand)
            return -value if isinstance(node.op, ast.USub) else value
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS
            and len(node.args) == 1
            and not node.keywords
        ):
            return _FUNCTIONS[node.func.id](_eval(node.args[0]))
        raise ConfigError(f"unsupported element in q expression {expression!r}")

    try:
        value = _eval(tree)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ConfigError(f"q expression {expression!r} failed at n={n}: {exc}") from exc
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"q expression {expression!r} gives {value} at n={n}")
    return value


def check_q_range(q: float, n: int, phi_min: float = 0.0) -> float:
    """q must lie in [n^phi_min, √n]."""
    upper = math.sqrt(n)
    lower = float(n) ** phi_min if phi_min > 0 else 0.0
    if q > upper * (1.0 + 1e-12) or q < lower * (1.0 - 1e-12) or q <= 0:
        raise ConfigError(f"q={q:.6g} is outside [n^{phi_min:g}, sqrt(n)] = [{lower:.6g}, {upper:.6g}]")
    return min(q, upper)


def parse_grid(spec: str) -> tuple[float, float, int]:
    """``a:b:m`` → (a, b, m)."""
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be a:b:m, got {spec!r}")
    try:
        a, b, m = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"grid must be a:b:m, got {spec!r}") from exc
    if m < 2 or not b > a:
        raise ConfigError(f"grid needs b > a and m >= 2, got {spec!r}")
    return a, b, m


class EntrySpec(BaseModel):
    """Entry law of the small-scale variables."""

    kind: EntryKind = "complex_gaussian"
    shape: float = Field(default=2.0, gt=0.0)
    scale: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="before")
    @classmethod
    def _from_name(cls, values: Any) -> Any:
        if isinstance(values, str):
            return {"kind": values}
        return values

    def build(self) -> EntryModel:
        if self.kind == "real_gaussian":
            return EntryModel.real_gaussian()
        if self.kind == "complex_gaussian":
            return EntryModel.complex_gaussian()
        if self.kind == "shifted_gamma":
            return EntryModel.shifted_gamma(self.shape, self.scale)
        if self.kind == "complex_shifted_gamma":
            return EntryModel.complex_shifted_gamma(self.shape, self.scale)
        raise ConfigError("custom entry laws cannot be configured from a file")


class ReplaySpec(BaseModel):
    """Equality-test Monte Carlo replay, q given as an expression in N_t."""

    n_r: int = Field(default=200, ge=2)
    c_n: float = Field(default=0.8, gt=0.0)
    q: str | float = "0.5*sqrt(n)"
    theta: float = 0.0
    replications: int = Field(default=2000, ge=1)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    entry: EntrySpec = Field(default_factory=EntrySpec)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    known_retention: bool = False
    variance_estimator: VarianceEstimator = "consistent"


class RunConfig(BaseModel):
    """One validated invocation of the command-line tool."""

    subcommand: Subcommand
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    out: str | None = None
    summary_out: str | None = None
    threads: int | None = Field(default=None, ge=1)

    # profile and model
    profile: str | ProfileSpec | None = None
    q: str | float | None = None
    regime: Regime = "moderate"
    entry: EntrySpec = Field(default_factory=EntrySpec)
    nu4: float | None = Field(default=None, ge=1.0)

    # lsd
    grid: str | None = None
    eta: float = Field(default=1e-2, gt=0.0)

    # clt and simulate
    f: str = "x"
    g: str | None = None
    replications: int = Field(default=2000, ge=1)
    centering: str = "auto"
    with_reference: bool = True

    # test-equality
    h1: str | None = None
    h2: str | None = None
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    s: float | None = Field(default=None, gt=0.0, le=1.0)
    variance_estimator: VarianceEstimator = "consistent"
    replay: ReplaySpec | None = None

    # outage
    d: str | None = None
    dt: str | None = None
    snr_db: list[float] = Field(default_factory=lambda: [0.0])
    rate_grid: str | None = None
    empirical_replications: int = Field(default=0, ge=0)

    # oracle
    profile_column: list[float] | None = None
    A: list[list[float]] | None = None
    B: list[list[float]] | None = None

    # numeric overrides
    tol: float | None = Field(default=None, gt=0.0)
    max_iter: int | None = Field(default=None, ge=1)
    nodes_per_edge: int | None = Field(default=None, ge=2)
    v0: float | None = Field(default=None, gt=0.0)

    @model_validator(mode="before")
    @classmethod
    def _coerce_nulls(cls, values: Any) -> Any:
        if isinstance(values, dict):
            values = {k.replace("-", "_"): v for k, v in values.items()}
            if isinstance(values.get("snr_db"), (int, float)):
                values["snr_db"] = [values["snr_db"]]
            if isinstance(values.get("snr_db"), str):
                values["snr_db"] = [float(x) for x in values["snr_db"].split(",") if x.strip()]
        return values

    @field_validator("centering")
    @classmethod
    def _known_centering(cls, value: str) -> str:
        if value not in ("auto", "fourth_moment", "full", "none"):
            raise ValueError(f"unknown centering {value!r}")
        return value

    @model_validator(mode="after")
    def _required_inputs(self) -> RunConfig:
        needs: dict[str, tuple[str, ...]] = {
            "lsd": ("profile",),
            "clt": ("profile", "q"),
            "simulate": ("profile", "q"),
            "outage": ("d", "dt", "q", "rate_grid"),
            "oracle": ("profile_column", "A", "B", "s"),
        }
        missing = [name for name in needs.get(self.subcommand, ()) if getattr(self, name) is None]
        if self.subcommand == "test-equality" and self.replay is None and (self.h1 is None or self.h2 is None):
            missing.append("h1/h2 or replay")
        if missing:
            raise ValueError(f"{self.subcommand} needs: {', '.join(missing)}")
        return self

    def overrides(self) -> dict[str, Any]:
        return {
            "threads": self.threads,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "nodes_per_edge": self.nodes_per_edge,
            "v0": self.v0,
        }

    def hash_payload(self) -> dict[str, Any]:
        """Configuration fields that determine the numeric output."""
        return self.model_dump(mode="json", exclude={"out", "summary_out", "threads"})
