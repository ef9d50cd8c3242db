"""
Core type definitions and constants.
"""
from __future__ import annotations

from typing import Literal

Regime = Literal["moderate", "high"]
EntryKind = Literal[
    "real_gaussian",
    "complex_gaussian",
    "shifted_gamma",
    "complex_shifted_gamma",
    "custom",
]
Subcommand = Literal["lsd", "clt", "simulate", "test-equality", "outage", "oracle"]
ProfileType = Literal["separable", "dense", "constant"]
VarianceEstimator = Literal["consistent", "plug_in"]
StatisticName = Literal["lss", "trace", "t_log", "t_x"]

PACKAGE_VERSION = "0.4.0"
CSV_METADATA_PREFIX = "# "


class ExitCode:
    OK = 0
    CONFIG_ERROR = 2
    NUMERICAL_FAILURE = 3
