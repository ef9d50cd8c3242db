"""Tests for profile loading and artifact writing.

Verifies that:
- Profile specs accept aliases and reject incomplete definitions
- CSV matrices parse real and complex entries
- Degenerate profiles are refused unless explicitly allowed
- CSV artifacts carry a parseable metadata header and JSON artifacts sorted keys
- Configuration hashes are stable under key order
"""
from __future__ import annotations

import io
import json

import numpy as np
import pandas as pd
import pytest

from specgram.domain.types import PACKAGE_VERSION
from specgram.repositories import (
    ArtifactMetadata,
    ArtifactRepository,
    ProfileRepository,
    ProfileSpec,
    UniformDraw,
    config_hash,
    read_csv_matrix,
    read_mapping,
    separable_diagonals,
)
from specgram.spectral.errors import ConfigError, ProfileValidationError
from specgram.spectral.profile import make_uniform_separable_profile


# ============================================================================
# Fixtures
# ============================================================================

@pytest.fixture
def repo(tmp_path) -> ProfileRepository:
    return ProfileRepository(base_dir=tmp_path)


@pytest.fixture
def metadata() -> ArtifactMetadata:
    return ArtifactMetadata(config_hash="abc123", seed=7, extra={"subcommand": "lsd"})


# ============================================================================
# Profiles
# ============================================================================

class TestProfileSpec:
    def test_dt_alias_and_case(self):
        spec = ProfileSpec(**{"type": "Separable", "d": [1.0, 2.0], "dt": [1.0, 1.0, 1.0]})
        assert spec.type == "separable"
        assert spec.d_tilde == [1.0, 1.0, 1.0]

    def test_constant_needs_dimensions(self):
        with pytest.raises(ValueError):
            ProfileSpec(type="constant", p=3)

    def test_dense_needs_source(self):
        with pytest.raises(ValueError):
            ProfileSpec(type="dense")


class TestProfileRepository:
    def test_inline_constant(self, repo):
        profile = repo.load({"type": "constant", "p": 3, "n": 5, "value": 2.0})
        assert profile.sigma2.shape == (3, 5)
        assert np.all(profile.sigma2 == 2.0)

    def test_uniform_draws(self, repo):
        spec = {"type": "separable", "d": {"uniform": [1, 2], "size": 4, "seed": 1},
                "d_tilde": {"uniform": [1, 2], "size": 6, "seed": 2}}
        first, second = repo.load(spec), repo.load(spec)
        assert first.sigma2.shape == (4, 6)
        assert np.array_equal(first.sigma2, second.sigma2)

    def test_default_seeds_give_distinct_diagonals(self):
        draw = UniformDraw(uniform=(1.0, 2.0), size=5)
        d, d_tilde = separable_diagonals(draw, draw)
        assert not np.allclose(d, d_tilde)
        expected = make_uniform_separable_profile(5, 5, seed=0)
        assert np.allclose(np.outer(d, d_tilde), expected.sigma2)

    def test_distinct_bounds_share_seed(self):
        d, d_tilde = separable_diagonals(
            UniformDraw(uniform=(1.0, 2.0), size=4), UniformDraw(uniform=(1.0, 3.0), size=4)
        )
        assert d.shape == d_tilde.shape == (4,)
        assert not np.allclose((d - 1.0) * 2.0, d_tilde - 1.0)

    def test_yaml_spec_file(self, repo, tmp_path):
        (tmp_path / "profile.yaml").write_text("type: constant\np: 2\nn: 4\n", encoding="utf-8")
        assert repo.load("profile.yaml").sigma2.shape == (2, 4)

    def test_csv_profile(self, repo, tmp_path):
        np.savetxt(tmp_path / "sigma.csv", np.array([[1.0, 2.0], [3.0, 4.0]]), delimiter=",")
        assert np.allclose(repo.load("sigma.csv").sigma2, [[1.0, 2.0], [3.0, 4.0]])

    def test_dense_spec_with_path(self, repo, tmp_path):
        np.savetxt(tmp_path / "sigma.csv", np.ones((2, 3)), delimiter=",")
        assert repo.load({"type": "dense", "path": "sigma.csv"}).n == 3

    def test_degenerate_profile(self, repo):
        spec = {"type": "dense", "sigma2": [[1.0, 0.0], [1.0, 0.0]]}
        with pytest.raises(ProfileValidationError):
            repo.load(spec)
        assert repo.load({**spec, "allow_degenerate": True}).p == 2

    def test_invalid_inline_spec(self, repo):
        with pytest.raises(ConfigError):
            repo.load({"type": "triangular"})

    def test_missing_file(self, repo):
        with pytest.raises(ConfigError):
            repo.load("absent.csv")

    def test_vector(self, repo, tmp_path):
        np.savetxt(tmp_path / "d.csv", np.array([1.0, 2.0, 3.0]), delimiter=",")
        assert np.allclose(repo.load_vector("d.csv"), [1.0, 2.0, 3.0])


class TestCsvMatrix:
    def test_complex_entries(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("1+2j, 0\n-1j, 3.5\n", encoding="utf-8")
        matrix = read_csv_matrix(path)
        assert np.iscomplexobj(matrix)
        assert matrix[0, 0] == 1 + 2j and matrix[1, 0] == -1j

    def test_real_entries(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("1,2\n3,4\n", encoding="utf-8")
        matrix = read_csv_matrix(path)
        assert not np.iscomplexobj(matrix)
        assert matrix.shape == (2, 2)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("1,abc\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_csv_matrix(path)


# ============================================================================
# Artifacts
# ============================================================================

class TestArtifacts:
    def test_csv_round_trip(self, tmp_path, metadata):
        repo = ArtifactRepository()
        path = tmp_path / "out" / "density.csv"
        repo.write_csv(path, pd.DataFrame({"x": [0.0, 1.0], "density": [0.5, 0.25]}), metadata)
        meta, frame = ArtifactRepository.read_csv(path)
        assert meta == {"version": PACKAGE_VERSION, "config_hash": "abc123", "seed": "7", "subcommand": "lsd"}
        assert list(frame.columns) == ["x", "density"]
        assert frame["density"].tolist() == [0.5, 0.25]

    def test_json_has_sorted_keys_and_metadata(self, tmp_path, metadata):
        path = tmp_path / "summary.json"
        ArtifactRepository().write_json(path, {"b": 1, "a": 2}, metadata)
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text)["metadata"]["seed"] == 7

    def test_stdout(self, metadata):
        buffer = io.StringIO()
        ArtifactRepository(stdout=buffer).write_json("-", {"value": 1.5}, metadata)
        assert json.loads(buffer.getvalue())["value"] == 1.5

    def test_hash_ignores_key_order(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})
        assert len(config_hash({})) == 64


# ============================================================================
# Malformed input
# ============================================================================

class TestMalformedInput:
    def test_empty_csv(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_csv_matrix(path)

    def test_ragged_csv(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1,2\n3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_csv_matrix(path)

    def test_broken_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("a: [1,\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_mapping(path)

    def test_list_valued_yaml(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            read_mapping(path)

    def test_empty_yaml_is_empty_mapping(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert read_mapping(path) == {}

    def test_list_valued_profile_spec(self, repo, tmp_path):
        (tmp_path / "profile.yaml").write_text("- constant\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            repo.load("profile.yaml")
