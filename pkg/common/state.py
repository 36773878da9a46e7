"""
Run State Management
====================

Provides a single interface for everything a run persists next to its outputs:
the resolved manifest, the resolved config text and JSON reports.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Protocol

from common.exceptions import ConfigError
from common.types import RunManifest


class RunRepository(Protocol):
    """Abstract run storage interface.

    Implementations provide persistence for run manifests and reports.
    This protocol enables testing with in-memory implementations.
    """

    def save_manifest(self, run_dir: Path, manifest: RunManifest) -> Path:
        """Persist the resolved manifest of a run."""
        ...

    def load_manifest(self, path: Path) -> RunManifest:
        """Load a manifest written by save_manifest."""
        ...

    def save_report(self, run_dir: Path, name: str, report: dict[str, Any]) -> Path:
        """Persist a JSON report under the run directory."""
        ...


class FileRunRepository:
    """JSON file-based run repository.

    Layout of a run directory:
    - manifest.json   resolved RunManifest
    - config.txt      resolved key=value configuration
    - <name>.json     reports (run report, ablation table, fusion result)
    """

    MANIFEST_FILE = "manifest.json"
    CONFIG_FILE = "config.txt"

    def _write_json(self, path: Path, data: dict[str, Any]) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=False)
            f.write("\n")
        return path

    def _read_json(self, path: Path) -> dict[str, Any] | None:
        """Read JSON file, return None on error."""
        if not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except (json.JSONDecodeError, OSError):
            return None
        return data if isinstance(data, dict) else None

    def save_manifest(self, run_dir: Path, manifest: RunManifest) -> Path:
        """Write manifest.json into the run directory."""
        return self._write_json(run_dir / self.MANIFEST_FILE, manifest.to_dict())

    def save_config_text(self, run_dir: Path, text: str) -> Path:
        """Write the resolved key=value configuration next to the manifest."""
        run_dir.mkdir(parents=True, exist_ok=True)
        path = run_dir / self.CONFIG_FILE
        path.write_text(text, encoding="utf-8")
        return path

    def load_manifest(self, path: Path) -> RunManifest:
        """Load a manifest from a file or a run directory.

        Raises:
            ConfigError: If the manifest is missing, unreadable or incomplete.
        """
        if path.is_dir():
            path = path / self.MANIFEST_FILE
        data = self._read_json(path)
        if data is None:
            raise ConfigError(f"Cannot read run manifest: {path}")
        try:
            return RunManifest.from_dict(data)
        except KeyError as e:
            raise ConfigError(f"Run manifest {path} is incomplete: {e}") from e

    def save_report(self, run_dir: Path, name: str, report: dict[str, Any]) -> Path:
        """Write <name>.json into the run directory."""
        return self._write_json(run_dir / f"{name}.json", report)

    def load_report(self, run_dir: Path, name: str) -> dict[str, Any] | None:
        """Load a report written by save_report, or None if absent."""
        return self._read_json(run_dir / f"{name}.json")
