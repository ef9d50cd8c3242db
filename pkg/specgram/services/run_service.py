"""
Run service: turns a validated RunConfig into CSV/JSON artifacts.

One private ``_run_<subcommand>`` per subcommand; numeric work is delegated
to the spectral package.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from ..config import overridden_settings
from ..repositories import ArtifactMetadata, ArtifactRepository, ProfileRepository, config_hash
from ..spectral.contour import parse_test_function
from ..spectral.detequiv import density_edge_mask, lsd_density, spectral_support_bound
from ..spectral.errors import ConfigError
from ..spectral.fluct import clt_cov, clt_mean, corrected_centering, lsd_integral
from ..spectral.mimo import (
    EqualityReplayConfig,
    empirical_outage_curve,
    equality_test,
    mi_clt_params,
    mi_replicates,
    outage_probability,
    replicate_equality_test,
    snr_db_to_sigma2,
)
from ..spectral.models import SparsityConfig, VarianceProfile
from ..spectral.profile import standardized_fourth_moment
from ..spectral.simulate import BatteryConfig, mc_battery, quadratic_form_oracle
from .run_config import RunConfig, check_q_range, evaluate_q, parse_grid

logger = logging.getLogger(__name__)

DEFAULT_LSD_POINTS = 400


@dataclass(frozen=True)
class RunOutcome:
    subcommand: str
    payload: dict[str, Any]
    artifacts: list[str] = field(default_factory=list)


def _summary_path(config: RunConfig) -> str | None:
    if config.summary_out:
        return config.summary_out
    if config.out and config.out != "-":
        return str(Path(config.out).with_suffix(".summary.json"))
    return None


class RunService:
    """Dispatches one subcommand and writes its artifacts."""

    def __init__(
        self,
        profiles: ProfileRepository | None = None,
        artifacts: ArtifactRepository | None = None,
    ) -> None:
        self._profiles = profiles or ProfileRepository()
        self._artifacts = artifacts or ArtifactRepository()

    def run(self, config: RunConfig) -> RunOutcome:
        handler = {
            "lsd": self._run_lsd,
            "clt": self._run_clt,
            "simulate": self._run_simulate,
            "test-equality": self._run_test_equality,
            "outage": self._run_outage,
            "oracle": self._run_oracle,
        }[config.subcommand]
        metadata = ArtifactMetadata(
            config_hash=config_hash(config.hash_payload()),
            seed=config.seed,
            extra={"subcommand": config.subcommand},
        )
        logger.info("Running %s (config %s)", config.subcommand, metadata.config_hash[:12])
        with overridden_settings(config.overrides()):
            return handler(config, metadata)

    # ------------------------------------------------------------------
    # shared helpers
    # ------------------------------------------------------------------

    def _profile(self, config: RunConfig) -> VarianceProfile:
        return self._profiles.load(config.profile)

    @staticmethod
    def _sparsity(config: RunConfig, n: int) -> SparsityConfig:
        q = check_q_range(evaluate_q(config.q, n), n)
        if config.regime == "moderate" and q < float(n) ** 0.25:
            logger.warning("q=%.4g is below n^(1/4); the moderate-regime mean may not apply", q)
        return SparsityConfig(n=n, q=q, regime=config.regime)

    def _write_json(self, path: str | None, payload: dict[str, Any], metadata: ArtifactMetadata) -> list[str]:
        self._artifacts.write_json(path, payload, metadata)
        return [path] if path and path != "-" else []

    # ------------------------------------------------------------------
    # subcommands
    # ------------------------------------------------------------------

    def _run_lsd(self, config: RunConfig, metadata: ArtifactMetadata) -> RunOutcome:
        profile = self._profile(config)
        if config.grid:
            a, b, m = parse_grid(config.grid)
        else:
            bound = spectral_support_bound(profile)
            a, b, m = -0.1 * bound, 1.1 * bound, DEFAULT_LSD_POINTS
        grid = np.linspace(a, b, m)
        density = lsd_density(profile, grid, config.eta, threads=config.threads)
        frame = pd.DataFrame(
            {"x": grid, "density": density, "near_edge": density_edge_mask(grid, density, config.eta)}
        )
        self._artifacts.write_csv(config.out, frame, metadata)
        mass = float(trapezoid(density, grid))
        return RunOutcome("lsd", {"mass": mass, "points": m}, [config.out] if config.out else [])

    def _run_clt(self, config: RunConfig, metadata: ArtifactMetadata) -> RunOutcome:
        profile = self._profile(config)
        sparsity = self._sparsity(config, profile.n)
        model = config.entry.build()
        f = parse_test_function(config.f)
        g = parse_test_function(config.g) if config.g else f
        mean = clt_mean(profile, f, None, sparsity, model, threads=config.threads)
        cov = clt_cov(profile, f, g, None, None, sparsity, model, threads=config.threads)
        payload: dict[str, Any] = {
            "f": f.label,
            "g": g.label,
            "p": profile.p,
            "n": profile.n,
            "q": sparsity.q,
            "s": sparsity.s,
            "regime": sparsity.regime,
            "nu4": standardized_fourth_moment(model),
            "pi_integral_f": lsd_integral(profile, f, threads=config.threads),
            "mean": mean.value,
            "cov": cov.value,
            "quadrature_diagnostics": {"mean": mean.diagnostics(), "cov": cov.diagnostics()},
        }
        if sparsity.regime == "high":
            payload["correction"] = corrected_centering(profile, f, None, sparsity, model, threads=config.threads)
        artifacts = self._write_json(config.out, payload, metadata)
        return RunOutcome("clt", payload, artifacts)

    def _run_simulate(self, config: RunConfig, metadata: ArtifactMetadata) -> RunOutcome:
        profile = self._profile(config)
        sparsity = self._sparsity(config, profile.n)
        battery = BatteryConfig(
            profile=profile,
            sparsity=sparsity,
            model=config.entry.build(),
            f=parse_test_function(config.f),
            replications=config.replications,
            seed=config.seed,
            centering=config.centering,
            with_reference=config.with_reference,
            threads=config.threads,
        )
        summary, values = mc_battery(battery)
        frame = pd.DataFrame(
            {"rep": np.arange(values.size), "statistic": summary.statistic_name, "value": values}
        )
        self._artifacts.write_csv(config.out, frame, metadata)
        artifacts = [config.out] if config.out and config.out != "-" else []
        payload = summary.model_dump()
        summary_path = _summary_path(config)
        if summary_path:
            artifacts += self._write_json(summary_path, payload, metadata)
        return RunOutcome("simulate", payload, artifacts)

    def _run_test_equality(self, config: RunConfig, metadata: ArtifactMetadata) -> RunOutcome:
        if config.replay is not None:
            return self._replay_equality(config, metadata)
        H1 = self._profiles.load_matrix(config.h1)
        H2 = self._profiles.load_matrix(config.h2)
        nu4 = config.nu4 if config.nu4 is not None else standardized_fourth_moment(config.entry.build())
        result = equality_test(
            H1, H2, config.alpha, nu4, s=config.s, variance_estimator=config.variance_estimator
        )
        payload = result.model_dump()
        return RunOutcome("test-equality", payload, self._write_json(config.out, payload, metadata))

    def _replay_equality(self, config: RunConfig, metadata: ArtifactMetadata) -> RunOutcome:
        spec = config.replay
        n_t = max(1, round(spec.n_r / spec.c_n))
        q = check_q_range(evaluate_q(spec.q, n_t, variable="N_t"), n_t)
        summary, _, power = replicate_equality_test(
            EqualityReplayConfig(
                q=q,
                n_r=spec.n_r,
                c_n=spec.c_n,
                theta=spec.theta,
                alpha=spec.alpha,
                replications=spec.replications,
                seed=spec.seed,
                model=spec.entry.build(),
                known_retention=spec.known_retention,
                variance_estimator=spec.variance_estimator,
                threads=config.threads,
            )
        )
        payload = summary.model_dump()
        payload.update({"predicted_power": power, "n_t": n_t, "q": q, "theta": spec.theta})
        return RunOutcome("test-equality", payload, self._write_json(config.out, payload, metadata))

    def _run_outage(self, config: RunConfig, metadata: ArtifactMetadata) -> RunOutcome:
        d = self._profiles.load_vector(config.d)
        d_tilde = self._profiles.load_vector(config.dt)
        n_r, n_t = d.size, d_tilde.size
        q = check_q_range(evaluate_q(config.q, n_t), n_t)
        a, b, m = parse_grid(config.rate_grid)
        rates = np.linspace(a, b, m)
        model = config.entry.build()
        frames = []
        params_out: dict[str, Any] = {}
        for snr in config.snr_db:
            sigma2 = snr_db_to_sigma2(snr)
            params = mi_clt_params(d, d_tilde, sigma2, q, model, nu4=config.nu4)
            block = pd.DataFrame(
                {"R": rates, "snr": snr, "P_out_theory": outage_probability(rates, params, q, n_r)}
            )
            if config.empirical_replications:
                caps = mi_replicates(
                    d, d_tilde, sigma2, q, model, config.empirical_replications, config.seed, config.threads
                )
                block["P_out_empirical"] = empirical_outage_curve(caps, rates)
            frames.append(block)
            params_out[f"{snr:g}"] = {
                "V": params.V,
                "mu_log": params.mu_log,
                "sigma2_log": params.sigma2_log,
                "delta": params.delta,
                "delta_tilde": params.delta_tilde,
            }
        frame = pd.concat(frames, ignore_index=True)
        self._artifacts.write_csv(config.out, frame, metadata)
        artifacts = [config.out] if config.out and config.out != "-" else []
        summary_path = _summary_path(config)
        if summary_path:
            artifacts += self._write_json(summary_path, {"params": params_out, "q": q}, metadata)
        return RunOutcome("outage", {"params": params_out, "q": q, "rows": len(frame)}, artifacts)

    def _run_oracle(self, config: RunConfig, metadata: ArtifactMetadata) -> RunOutcome:
        column = np.asarray(config.profile_column, dtype=float)
        A = np.asarray(config.A, dtype=float)
        B = np.asarray(config.B, dtype=float)
        if not math.isfinite(float(np.sum(A) + np.sum(B))):
            raise ConfigError("oracle matrices contain non-finite entries")
        result = quadratic_form_oracle(
            config.entry.build(), column, config.s, A, B, config.replications, config.seed
        )
        payload = {
            "mc_estimate": result.mc_estimate,
            "standard_error": result.standard_error,
            "formula_value": result.formula_value,
            "replications": result.replications,
        }
        return RunOutcome("oracle", payload, self._write_json(config.out, payload, metadata))
