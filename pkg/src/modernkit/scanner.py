"""Legacy repository scanner and layer classification.

Walks a source tree, skips excluded directories and binary files, and
assigns every remaining file to one architectural layer via an ordered,
first-match-wins rule table: content markers beat path segments beat file
extensions. Unclassified files are kept and reported, never dropped, so a
reviewer can reassign them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .errors import IoError, NotADirectory, RootNotFound


class LayerKind(str, Enum):
    INTERACTION = "Interaction"
    BUSINESS_LOGIC = "BusinessLogic"
    DATA = "Data"
    CONFIG = "Config"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class ProjectFile:
    """One scanned source file, relative to the scan root."""

    relative_path: str
    content: str
    size_bytes: int
    layer: LayerKind


@dataclass(frozen=True)
class Rule:
    """One classification rule; ``kind`` is content, path, or extension."""

    kind: str
    pattern: str
    layer: LayerKind

    @property
    def rule_id(self) -> str:
        return f"{self.kind}:{self.pattern}"


# Built-in rule table, in precedence order. Content markers cover the common
# Java/Spring annotations; path and extension rules generalize to other
# stacks. Override per workspace via the scan.rules config key.
DEFAULT_RULES: tuple[Rule, ...] = (
    Rule("content", "@Controller", LayerKind.INTERACTION),
    Rule("content", "@RestController", LayerKind.INTERACTION),
    Rule("content", "@WebServlet", LayerKind.INTERACTION),
    Rule("content", "@Path", LayerKind.INTERACTION),
    Rule("content", "@Service", LayerKind.BUSINESS_LOGIC),
    Rule("content", "@Repository", LayerKind.DATA),
    Rule("content", "@Entity", LayerKind.DATA),
    Rule("path", "controller|web|rest|ui|view|templates|static", LayerKind.INTERACTION),
    Rule("path", "service|domain|logic", LayerKind.BUSINESS_LOGIC),
    Rule("path", "repository|dao|db|persistence|model|entity", LayerKind.DATA),
    Rule("extension", ".sql", LayerKind.DATA),
    Rule("extension", ".properties|.yml|.yaml|.xml|.toml|.env", LayerKind.CONFIG),
    Rule("extension", ".html|.jsp|.css|.js", LayerKind.INTERACTION),
)

DEFAULT_EXCLUDE_DIRS: tuple[str, ...] = ("target", "build", "node_modules", ".git", "dist")


@dataclass
class ScanConfig:
    exclude_dirs: tuple[str, ...] = DEFAULT_EXCLUDE_DIRS
    rules: tuple[Rule, ...] = DEFAULT_RULES

    @classmethod
    def from_config(cls, config: dict) -> "ScanConfig":
        """Build from the workspace config mapping (scan.exclude_dirs, scan.rules)."""
        scan = config.get("scan", {}) or {}
        exclude = tuple(scan.get("exclude_dirs") or DEFAULT_EXCLUDE_DIRS)
        raw_rules = scan.get("rules") or []
        if raw_rules:
            rules = tuple(
                Rule(r["kind"], r["pattern"], LayerKind(r["layer"])) for r in raw_rules
            )
        else:
            rules = DEFAULT_RULES
        return cls(exclude_dirs=exclude, rules=rules)


@dataclass
class LayerManifest:
    """All scanned files, sorted by path, plus which rule classified each."""

    scan_root: str
    entries: list[ProjectFile] = field(default_factory=list)
    rule_hits: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scan_root": self.scan_root,
            "entries": [
                {
                    "relative_path": f.relative_path,
                    "content": f.content,
                    "size_bytes": f.size_bytes,
                    "layer": f.layer.value,
                }
                for f in self.entries
            ],
            "rule_hits": dict(sorted(self.rule_hits.items())),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LayerManifest":
        entries = [
            ProjectFile(
                relative_path=e["relative_path"],
                content=e["content"],
                size_bytes=e["size_bytes"],
                layer=LayerKind(e["layer"]),
            )
            for e in payload.get("entries", [])
        ]
        return cls(
            scan_root=payload["scan_root"],
            entries=entries,
            rule_hits=dict(payload.get("rule_hits", {})),
        )

    def layer_counts(self) -> dict[str, int]:
        counts = {kind.value: 0 for kind in LayerKind}
        for entry in self.entries:
            counts[entry.layer.value] += 1
        return counts


def classify_file(
    file_path: str, content: str, rules: Iterable[Rule] = DEFAULT_RULES
) -> tuple[LayerKind, Optional[str]]:
    """Return (layer, rule_id) for the first matching rule, else Unclassified.

    Rule kinds: ``content`` looks for the marker substring in the text,
    ``path`` matches any path segment against the alternation of names
    (case-insensitive), ``extension`` matches the file suffix.
    """
    segments = [s.lower() for s in file_path.split("/")]
    suffix = Path(file_path).suffix.lower()
    for rule in rules:
        if rule.kind == "content":
            if rule.pattern in content:
                return rule.layer, rule.rule_id
        elif rule.kind == "path":
            names = rule.pattern.lower().split("|")
            if any(seg in names for seg in segments):
                return rule.layer, rule.rule_id
        elif rule.kind == "extension":
            if suffix and suffix in rule.pattern.lower().split("|"):
                return rule.layer, rule.rule_id
    return LayerKind.UNCLASSIFIED, None


def scan_repository(root: str | Path, config: Optional[ScanConfig] = None) -> LayerManifest:
    """Scan a legacy repository into a classified, deterministic manifest.

    Excluded directories are pruned at any depth; files that are not valid
    UTF-8 are treated as binary and omitted. Unreadable files raise IoError
    with path context rather than being silently skipped.
    """
    config = config or ScanConfig()
    root_path = Path(root)
    if not root_path.exists():
        raise RootNotFound(f"scan root does not exist: {root_path}")
    if not root_path.is_dir():
        raise NotADirectory(f"scan root is not a directory: {root_path}")

    excluded = set(config.exclude_dirs)
    manifest = LayerManifest(scan_root=str(root_path))

    for dirpath, dirnames, filenames in os.walk(root_path):
        dirnames[:] = sorted(d for d in dirnames if d not in excluded)
        for name in sorted(filenames):
            full = Path(dirpath) / name
            if full.is_symlink() or not full.is_file():
                continue
            rel = full.relative_to(root_path).as_posix()
            try:
                raw = full.read_bytes()
            except OSError as exc:
                raise IoError(f"cannot read {full}: {exc}", {"path": rel}) from exc
            try:
                content = raw.decode("utf-8")
            except UnicodeDecodeError:
                continue  # binary
            layer, rule_id = classify_file(rel, content, config.rules)
            manifest.entries.append(
                ProjectFile(
                    relative_path=rel,
                    content=content,
                    size_bytes=len(raw),
                    layer=layer,
                )
            )
            if rule_id is not None:
                manifest.rule_hits[rel] = rule_id

    manifest.entries.sort(key=lambda f: f.relative_path)
    return manifest


def files_for_layer(manifest: LayerManifest, layer: LayerKind) -> list[ProjectFile]:
    """Entries with the requested layer, in manifest order."""
    return [f for f in manifest.entries if f.layer == layer]
