"""Workspace layout and configuration.

A workspace is a plain directory an operator can inspect and diff with
ordinary tools:

    <root>/
      workspace.json        self-describing format marker
      config.yaml           one configuration file (scan / llm / verify keys)
      scan_manifest.json    latest repository scan (source for Phase-1 runs)
      runs/<run-id>/        run.json + events.log
      artifacts/<tag>/<id>/ v<N>.md + v<N>.meta.json per version
      verifications/        verification records
      templates/            optional per-workspace prompt overrides
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Optional

import yaml
from filelock import FileLock

FORMAT_VERSION = 1
CONFIG_FILE = "config.yaml"
MANIFEST_FILE = "workspace.json"
SCAN_MANIFEST_FILE = "scan_manifest.json"
WORKSPACE_ENV = "MODERNKIT_WORKSPACE"

DEFAULT_CONFIG: dict[str, Any] = {
    "scan": {
        "exclude_dirs": ["target", "build", "node_modules", ".git", "dist"],
        # rules: empty means "use the built-in rule table" (scanner.DEFAULT_RULES)
        "rules": [],
    },
    "llm": {
        "default_backend": None,
        "backends": {},
    },
    "verify": {
        "metric": "jaccard",
        "threshold": 0.75,
        "secondary_backend": None,
    },
}


def atomic_write_text(path: Path, content: str) -> None:
    """Write text via temp-file-then-rename so readers never see a torn file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)


def atomic_write_json(path: Path, payload: Any) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


class Workspace:
    """Handle on one workspace root; creates the layout on first use."""

    SUBDIRS = ("runs", "artifacts", "verifications", "templates")

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._ensure_layout()
        self._config = self._load_config()

    def _ensure_layout(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        for sub in self.SUBDIRS:
            (self.root / sub).mkdir(exist_ok=True)
        marker = self.root / MANIFEST_FILE
        if not marker.exists():
            atomic_write_json(marker, {"format_version": FORMAT_VERSION})
        config_path = self.root / CONFIG_FILE
        if not config_path.exists():
            atomic_write_text(
                config_path,
                yaml.safe_dump(DEFAULT_CONFIG, sort_keys=False),
            )

    def _load_config(self) -> dict[str, Any]:
        raw = (self.root / CONFIG_FILE).read_text(encoding="utf-8")
        loaded = yaml.safe_load(raw) or {}
        return _merge(DEFAULT_CONFIG, loaded)

    @property
    def config(self) -> dict[str, Any]:
        return self._config

    def config_get(self, dotted: str, default: Any = None) -> Any:
        """Look up a dotted key like ``verify.threshold``."""
        node: Any = self._config
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    # --- paths ---

    @property
    def runs_dir(self) -> Path:
        return self.root / "runs"

    @property
    def artifacts_dir(self) -> Path:
        return self.root / "artifacts"

    @property
    def verifications_dir(self) -> Path:
        return self.root / "verifications"

    @property
    def templates_dir(self) -> Path:
        return self.root / "templates"

    @property
    def scan_manifest_path(self) -> Path:
        return self.root / SCAN_MANIFEST_FILE

    def write_lock(self) -> FileLock:
        """Workspace-wide lock taken for cross-process write safety."""
        return FileLock(str(self.root / ".modernkit.lock"))

    # --- scan manifest persistence ---

    def save_scan_manifest(self, payload: dict[str, Any]) -> None:
        with self.write_lock():
            atomic_write_json(self.scan_manifest_path, payload)

    def load_scan_manifest(self) -> Optional[dict[str, Any]]:
        if not self.scan_manifest_path.exists():
            return None
        return json.loads(self.scan_manifest_path.read_text(encoding="utf-8"))


def resolve_workspace_root(explicit: Optional[str]) -> Path:
    """CLI/HTTP default: explicit flag, else MODERNKIT_WORKSPACE, else cwd."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(WORKSPACE_ENV)
    if env:
        return Path(env)
    return Path.cwd() / "workspace"
