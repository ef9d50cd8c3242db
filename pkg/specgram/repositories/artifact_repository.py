"""Self-describing CSV and JSON artifacts."""
from __future__ import annotations

import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from ..domain.types import CSV_METADATA_PREFIX, PACKAGE_VERSION


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form of a run configuration."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ArtifactMetadata:
    config_hash: str
    seed: int
    version: str = PACKAGE_VERSION
    extra: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"version": self.version, "config_hash": self.config_hash, "seed": self.seed}
        out.update(self.extra)
        return out


def parse_metadata_lines(lines: list[str]) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in lines:
        if not line.startswith(CSV_METADATA_PREFIX):
            break
        key, _, value = line[len(CSV_METADATA_PREFIX):].rstrip("\n").partition("=")
        meta[key.strip()] = value.strip()
    return meta


class ArtifactRepository:
    """Writes CSV bodies behind ``# key=value`` headers and sorted-key JSON summaries."""

    def __init__(self, stdout: io.TextIOBase | None = None) -> None:
        self._stdout = stdout

    def _open(self, path: str | Path | None):
        if path is None or str(path) == "-":
            return None
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        return open(target, "w", encoding="utf-8", newline="")

    def _emit(self, path: str | Path | None, text: str) -> None:
        handle = self._open(path)
        if handle is None:
            (self._stdout or sys.stdout).write(text)
            return
        with handle:
            handle.write(text)

    def render_csv(self, frame: pd.DataFrame, metadata: ArtifactMetadata) -> str:
        header = "".join(f"{CSV_METADATA_PREFIX}{k}={v}\n" for k, v in metadata.as_dict().items())
        return header + frame.to_csv(index=False, lineterminator="\n")

    def write_csv(self, path: str | Path | None, frame: pd.DataFrame, metadata: ArtifactMetadata) -> None:
        self._emit(path, self.render_csv(frame, metadata))

    def render_json(self, payload: dict[str, Any], metadata: ArtifactMetadata) -> str:
        body = dict(payload)
        body["metadata"] = metadata.as_dict()
        return json.dumps(body, sort_keys=True, indent=2, default=str) + "\n"

    def write_json(self, path: str | Path | None, payload: dict[str, Any], metadata: ArtifactMetadata) -> None:
        self._emit(path, self.render_json(payload, metadata))

    @staticmethod
    def read_csv(path: str | Path) -> tuple[dict[str, str], pd.DataFrame]:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
        meta = parse_metadata_lines(lines)
        frame = pd.read_csv(io.StringIO("".join(lines[len(meta):])))
        return meta, frame

    @staticmethod
    def read_json(path: str | Path) -> dict[str, Any]:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
