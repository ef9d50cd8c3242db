"""Repository layer for specgram."""
from .profile_repository import (
    ProfileRepository,
    ProfileSpec,
    UniformDraw,
    read_csv_matrix,
    read_mapping,
    separable_diagonals,
)
from .artifact_repository import ArtifactRepository, ArtifactMetadata, config_hash, canonical_json

__all__ = ["ProfileRepository", "ProfileSpec", "UniformDraw", "read_csv_matrix", "read_mapping",
           "separable_diagonals", "ArtifactRepository", "ArtifactMetadata", "config_hash", "canonical_json"]
