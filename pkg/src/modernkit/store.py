"""Versioned artifact, run-state, and verification-record persistence.

Everything is plain files under the workspace so operators can read and diff
outputs with ordinary tools. Artifact bodies live at
``artifacts/<tag>/<id>/v<N>.md`` with a sibling ``v<N>.meta.json``; a version
becomes visible only when its meta file lands, and meta files are written
last via temp-then-rename, so an interrupted save leaves no partial version.
A ``v<N>.gen.json`` sidecar records the rendered prompts and backend that
produced a generated version, which later lets verification replay the exact
prompts. Nothing is ever deleted or rewritten; versions only accrue.
"""

from __future__ import annotations

import json
import os
import secrets
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

from .errors import DanglingContextRef, InvalidTag, IoError, UnknownArtifact, UnknownRun, UnknownVersion
from .workspace import Workspace, atomic_write_json

PROVENANCES = ("llm-generated", "human-edited", "llm-repaired")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def new_id(prefix: str = "") -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d%H%M%S%f")
    return f"{prefix}{stamp}-{secrets.token_hex(3)}"


@dataclass(frozen=True)
class Artifact:
    artifact_id: str
    module_tag: str
    kind: str
    version: int
    body: str
    explanation: str
    provenance: str
    context_refs: tuple[tuple[str, int], ...]
    created_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "artifact_id": self.artifact_id,
            "module_tag": self.module_tag,
            "kind": self.kind,
            "version": self.version,
            "body": self.body,
            "explanation": self.explanation,
            "provenance": self.provenance,
            "context_refs": [[rid, rv] for rid, rv in self.context_refs],
            "created_at": self.created_at,
        }


@dataclass(frozen=True)
class ArtifactSummary:
    artifact_id: str
    module_tag: str
    kind: str
    latest_version: int
    provenance: str
    created_at: str


def _valid_tag(tag: str) -> bool:
    return bool(tag) and all(c.isalnum() or c in "._-" for c in tag)


class ArtifactStore:
    def __init__(self, workspace: Workspace):
        self.workspace = workspace

    # --- artifacts ---

    def _artifact_dir(self, artifact_id: str) -> Optional[Path]:
        hits = sorted(self.workspace.artifacts_dir.glob(f"*/{artifact_id}"))
        return hits[0] if hits else None

    def _versions(self, directory: Path) -> list[int]:
        versions = []
        for meta in directory.glob("v*.meta.json"):
            stem = meta.name[len("v") : -len(".meta.json")]
            if stem.isdigit():
                versions.append(int(stem))
        return sorted(versions)

    def exists(self, artifact_id: str) -> bool:
        directory = self._artifact_dir(artifact_id)
        return directory is not None and bool(self._versions(directory))

    def latest_version(self, artifact_id: str) -> int:
        directory = self._artifact_dir(artifact_id)
        if directory is None:
            raise UnknownArtifact(f"no artifact {artifact_id!r}")
        versions = self._versions(directory)
        if not versions:
            raise UnknownArtifact(f"no artifact {artifact_id!r}")
        return versions[-1]

    def save_artifact(
        self,
        artifact_id: str,
        module_tag: str,
        kind: str,
        body: str,
        explanation: str = "",
        provenance: str = "llm-generated",
        context_refs: tuple[tuple[str, int], ...] = (),
        generation: Optional[dict[str, Any]] = None,
    ) -> Artifact:
        """Store the next version of an artifact; the write is atomic.

        ``generation`` optionally carries {backend_id, prompts} for
        llm-generated versions and lands in a ``.gen.json`` sidecar.
        """
        if not _valid_tag(module_tag):
            raise InvalidTag(f"module tag {module_tag!r} is empty or not filesystem-safe")
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        if provenance == "human-edited" and not body:
            raise ValueError("human-edited artifact body must be non-empty")
        for ref_id, ref_version in context_refs:
            if not self._version_exists(ref_id, ref_version):
                raise DanglingContextRef(
                    f"context ref {ref_id}@v{ref_version} does not resolve"
                )

        with self.workspace.write_lock():
            existing = self._artifact_dir(artifact_id)
            if existing is not None and existing.parent.name != module_tag:
                raise InvalidTag(
                    f"artifact {artifact_id!r} already stored under tag "
                    f"{existing.parent.name!r}"
                )
            directory = self.workspace.artifacts_dir / module_tag / artifact_id
            directory.mkdir(parents=True, exist_ok=True)
            versions = self._versions(directory)
            version = (versions[-1] + 1) if versions else 1
            created_at = utc_now()
            meta = {
                "artifact_id": artifact_id,
                "module_tag": module_tag,
                "kind": kind,
                "version": version,
                "provenance": provenance,
                "context_refs": [[rid, rv] for rid, rv in context_refs],
                "created_at": created_at,
            }
            try:
                self._write_atomic(directory / f"v{version}.md", body)
                if generation is not None:
                    atomic_write_json(directory / f"v{version}.gen.json", generation)
                if explanation:
                    self._write_atomic(
                        directory / f"v{version}.explanation.md", explanation
                    )
                # meta last: its presence is what makes the version visible
                atomic_write_json(directory / f"v{version}.meta.json", meta)
            except OSError as exc:
                raise IoError(f"failed to persist {artifact_id} v{version}: {exc}") from exc
        return Artifact(
            artifact_id=artifact_id,
            module_tag=module_tag,
            kind=kind,
            version=version,
            body=body,
            explanation=explanation,
            provenance=provenance,
            context_refs=tuple(context_refs),
            created_at=created_at,
        )

    @staticmethod
    def _write_atomic(path: Path, content: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(content.encode("utf-8"))
        os.replace(tmp, path)

    def _version_exists(self, artifact_id: str, version: int) -> bool:
        directory = self._artifact_dir(artifact_id)
        return directory is not None and (directory / f"v{version}.meta.json").exists()

    def load_artifact(self, artifact_id: str, version: Optional[int] = None) -> Artifact:
        """Load one version (latest when omitted); byte-identical round trip."""
        directory = self._artifact_dir(artifact_id)
        if directory is None or not self._versions(directory):
            raise UnknownArtifact(f"no artifact {artifact_id!r}")
        if version is None:
            version = self._versions(directory)[-1]
        meta_path = directory / f"v{version}.meta.json"
        if not meta_path.exists():
            raise UnknownVersion(f"artifact {artifact_id!r} has no version {version}")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        body = (directory / f"v{version}.md").read_bytes().decode("utf-8")
        explanation_path = directory / f"v{version}.explanation.md"
        explanation = (
            explanation_path.read_bytes().decode("utf-8")
            if explanation_path.exists()
            else ""
        )
        return Artifact(
            artifact_id=meta["artifact_id"],
            module_tag=meta["module_tag"],
            kind=meta["kind"],
            version=meta["version"],
            body=body,
            explanation=explanation,
            provenance=meta["provenance"],
            context_refs=tuple((rid, rv) for rid, rv in meta["context_refs"]),
            created_at=meta["created_at"],
        )

    def load_generation(self, artifact_id: str, version: int) -> Optional[dict[str, Any]]:
        """The prompts/backend sidecar for a generated version, if recorded."""
        directory = self._artifact_dir(artifact_id)
        if directory is None:
            raise UnknownArtifact(f"no artifact {artifact_id!r}")
        path = directory / f"v{version}.gen.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def list_artifacts(
        self, module_tag: Optional[str] = None, kind: Optional[str] = None
    ) -> list[ArtifactSummary]:
        """Latest-version summaries, filters conjunctive, ordered by creation."""
        summaries = []
        for meta_path in self.workspace.artifacts_dir.glob("*/*/v*.meta.json"):
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            summaries.append(meta)
        latest: dict[str, dict] = {}
        for meta in summaries:
            current = latest.get(meta["artifact_id"])
            if current is None or meta["version"] > current["version"]:
                latest[meta["artifact_id"]] = meta
        rows = [
            ArtifactSummary(
                artifact_id=m["artifact_id"],
                module_tag=m["module_tag"],
                kind=m["kind"],
                latest_version=m["version"],
                provenance=m["provenance"],
                created_at=m["created_at"],
            )
            for m in latest.values()
            if (module_tag is None or m["module_tag"] == module_tag)
            and (kind is None or m["kind"] == kind)
        ]
        rows.sort(key=lambda s: (s.created_at, s.artifact_id))
        return rows

    # --- run state ---

    def save_run(self, run: dict[str, Any]) -> None:
        run_dir = self.workspace.runs_dir / run["run_id"]
        with self.workspace.write_lock():
            run_dir.mkdir(parents=True, exist_ok=True)
            atomic_write_json(run_dir / "run.json", run)

    def load_run(self, run_id: str) -> dict[str, Any]:
        path = self.workspace.runs_dir / run_id / "run.json"
        if not path.exists():
            raise UnknownRun(f"no run {run_id!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def list_runs(self) -> list[dict[str, Any]]:
        runs = []
        for path in self.workspace.runs_dir.glob("*/run.json"):
            runs.append(json.loads(path.read_text(encoding="utf-8")))
        runs.sort(key=lambda r: (r.get("created_at", ""), r["run_id"]))
        return runs

    def append_event(self, run_id: str, event: dict[str, Any]) -> None:
        run_dir = self.workspace.runs_dir / run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        record = dict(event)
        record.setdefault("at", utc_now())
        with self.workspace.write_lock():
            with open(run_dir / "events.log", "a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True) + "\n")

    # --- verification records ---

    def save_verification(self, record: dict[str, Any]) -> Path:
        """Append-only verification record keyed by artifact id and version."""
        name = f"{record['artifact_id']}-v{record['version']}-{new_id()}.json"
        path = self.workspace.verifications_dir / name
        with self.workspace.write_lock():
            atomic_write_json(path, record)
        return path

    def list_verifications(self, artifact_id: Optional[str] = None) -> list[dict[str, Any]]:
        records = []
        for path in sorted(self.workspace.verifications_dir.glob("*.json")):
            record = json.loads(path.read_text(encoding="utf-8"))
            if artifact_id is None or record.get("artifact_id") == artifact_id:
                records.append(record)
        records.sort(key=lambda r: r.get("created_at", ""))
        return records
