"""Shared fixtures for the specgram test suite."""
from __future__ import annotations

import numpy as np
import pytest

from specgram.config import reset_settings
from specgram.spectral.models import EntryModel, SparsityConfig, VarianceProfile
from specgram.spectral.profile import make_constant_profile, make_uniform_separable_profile


@pytest.fixture(autouse=True)
def _clean_settings():
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def small_dense_profile() -> VarianceProfile:
    rng = np.random.default_rng(11)
    return VarianceProfile(rng.uniform(0.5, 2.0, size=(12, 16)))


@pytest.fixture
def tiny_dense_profile() -> VarianceProfile:
    rng = np.random.default_rng(5)
    return VarianceProfile(rng.uniform(0.5, 2.0, size=(8, 8)))


@pytest.fixture
def mp_profile() -> VarianceProfile:
    return make_constant_profile(100, 200)


@pytest.fixture
def separable_profile() -> VarianceProfile:
    return make_uniform_separable_profile(24, 32, seed=3)


@pytest.fixture
def complex_gaussian() -> EntryModel:
    return EntryModel.complex_gaussian()


@pytest.fixture
def real_gaussian() -> EntryModel:
    return EntryModel.real_gaussian()


@pytest.fixture
def half_retention() -> SparsityConfig:
    return SparsityConfig.from_retention(16, 0.5)
