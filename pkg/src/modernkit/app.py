"""Wires one workspace into a ready-to-use toolchain."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .engine import PipelineEngine
from .gateway import LlmGateway, gateway_from_config
from .prompts import PromptLibrary
from .store import ArtifactStore
from .verify import Verifier
from .workspace import Workspace


@dataclass
class Toolchain:
    workspace: Workspace
    store: ArtifactStore
    library: PromptLibrary
    gateway: LlmGateway
    engine: PipelineEngine
    verifier: Verifier


def build_toolchain(workspace_root: str | Path) -> Toolchain:
    workspace = Workspace(workspace_root)
    store = ArtifactStore(workspace)
    library = PromptLibrary(override_dir=workspace.templates_dir)
    gateway = gateway_from_config(workspace.config, base_dir=workspace.root)
    engine = PipelineEngine(workspace, store, library, gateway)
    verifier = Verifier(store, library, gateway)
    return Toolchain(workspace, store, library, gateway, engine, verifier)
