"""Domain layer for specgram."""
from .types import Regime, EntryKind, Subcommand, ProfileType, VarianceEstimator, StatisticName
from .types import ExitCode, PACKAGE_VERSION, CSV_METADATA_PREFIX

__all__ = ["Regime", "EntryKind", "Subcommand", "ProfileType", "VarianceEstimator", "StatisticName",
           "ExitCode", "PACKAGE_VERSION", "CSV_METADATA_PREFIX"]
