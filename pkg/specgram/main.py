"""
Command-line entry point for specgram.

Subcommands: lsd, clt, simulate, test-equality, outage, oracle. Flags are
merged over an optional --config file (JSON or YAML); the merged mapping
is validated as a RunConfig.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Sequence

from pydantic import ValidationError

from .domain.types import ExitCode, PACKAGE_VERSION
from .repositories import read_mapping
from .services import RunConfig, RunService
from .spectral.errors import ConfigError, ModelValidationError, SpecgramError

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON or YAML file with run settings")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output path; '-' or omitted writes to stdout")
    parser.add_argument("--summary-out", dest="summary_out")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--nodes-per-edge", dest="nodes_per_edge", type=int)
    parser.add_argument("--v0", type=float)
    parser.add_argument("--log-level", dest="log_level", default="WARNING")


def _add_model(parser: argparse.ArgumentParser, need_q: bool = True) -> None:
    parser.add_argument("--profile", help="CSV profile or YAML/JSON profile spec")
    if need_q:
        parser.add_argument("--q", help="sparsity level: number or expression in n, e.g. 0.5*sqrt(n)")
        parser.add_argument("--regime", choices=("moderate", "high"))
    parser.add_argument("--entry", help="entry law (real_gaussian, complex_gaussian, shifted_gamma, ...)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specgram", description="Spectral fluctuations of sparse Gram matrices")
    parser.add_argument("--version", action="version", version=f"specgram {PACKAGE_VERSION}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    lsd = sub.add_parser("lsd", help="limiting spectral density on a grid")
    _add_common(lsd)
    _add_model(lsd, need_q=False)
    lsd.add_argument("--grid", help="a:b:m")
    lsd.add_argument("--eta", type=float)

    clt = sub.add_parser("clt", help="CLT mean and covariance of linear spectral statistics")
    _add_common(clt)
    _add_model(clt)
    clt.add_argument("--f")
    clt.add_argument("--g")

    sim = sub.add_parser("simulate", help="Monte Carlo battery of a centred statistic")
    _add_common(sim)
    _add_model(sim)
    sim.add_argument("--f")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--centering", choices=("auto", "fourth_moment", "full", "none"))

    eq = sub.add_parser("test-equality", help="equality test of large-scale fading matrices")
    _add_common(eq)
    eq.add_argument("--h1")
    eq.add_argument("--h2")
    eq.add_argument("--alpha", type=float)
    eq.add_argument("--nu4", type=float)
    eq.add_argument("--s", type=float, help="known retention probability")
    eq.add_argument("--entry")
    eq.add_argument("--variance-estimator", dest="variance_estimator", choices=("consistent", "plug_in"))
    eq.add_argument("--replay", help="JSON/YAML replay spec for a Monte Carlo size/power run")

    out = sub.add_parser("outage", help="outage probability of a sparse MIMO channel")
    _add_common(out)
    out.add_argument("--d", help="receive correlation diagonal (CSV)")
    out.add_argument("--dt", help="transmit correlation diagonal (CSV)")
    out.add_argument("--snr-db", dest="snr_db", help="comma-separated SNR values in dB")
    out.add_argument("--rate-grid", dest="rate_grid", help="a:b:m")
    out.add_argument("--q")
    out.add_argument("--entry")
    out.add_argument("--nu4", type=float)
    out.add_argument("--empirical-replications", dest="empirical_replications", type=int)

    oracle = sub.add_parser("oracle", help="quadratic-form covariance oracle")
    _add_common(oracle)
    oracle.add_argument("--entry")
    oracle.add_argument("--replications", type=int)
    oracle.add_argument("--s", type=float)
    return parser


def _load_mapping(path: str) -> dict[str, Any]:
    return read_mapping(path, "config file")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(_load_mapping(args.config))
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "log_level")}
    if "replay" in flags:
        flags["replay"] = _load_mapping(flags["replay"])
    values.update(flags)
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc.errors(include_url=False)}") from exc


def _exit_code(exc: SpecgramError) -> int:
    if isinstance(exc, (ConfigError, ModelValidationError)):
        return ExitCode.CONFIG_ERROR
    return ExitCode.NUMERICAL_FAILURE


def _error_record(exc: Exception) -> str:
    return json.dumps(
        {"error": str(exc), "type": type(exc).__name__, "detail": getattr(exc, "__dict__", {}) or None},
        sort_keys=True,
        default=str,
    )


def main(argv: Sequence[str] | None = None, service: RunService | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
        outcome = (service or RunService()).run(config)
    except SpecgramError as exc:
        logger.error("%s failed: %s", args.subcommand, exc)
        sys.stderr.write(_error_record(exc) + "\n")
        return _exit_code(exc)
    if outcome.artifacts:
        logger.info("Wrote %s", ", ".join(outcome.artifacts))
    return ExitCode.OK


def run_cli() -> None:
    sys.exit(main())
