"""Modernkit: a human-gated LLM workbench for legacy application modernization.

Extracts functional requirements from a legacy codebase layer by layer, then
generates the modern application's artifacts in reverse layer order, with an
operator approving every step and deterministic verification on demand.
"""

from .app import Toolchain, build_toolchain
from .engine import (
    PHASE_STEPS,
    PhaseKind,
    PipelineEngine,
    PipelineRun,
    ReviewDecision,
    StepKind,
    StepState,
    StepStatus,
)
from .gateway import CompletionRequest, CompletionResult, LlmGateway
from .prompts import PromptLibrary, RenderedPrompt
from .scanner import LayerKind, LayerManifest, ProjectFile, ScanConfig, classify_file, files_for_layer, scan_repository
from .store import Artifact, ArtifactStore
from .verify import SimilarityReport, VerificationRecord, Verifier, normalize_tokens, similarity_score
from .workspace import Workspace

__version__ = "0.1.0"

__all__ = [
    "Artifact",
    "ArtifactStore",
    "CompletionRequest",
    "CompletionResult",
    "LayerKind",
    "LayerManifest",
    "LlmGateway",
    "PHASE_STEPS",
    "PhaseKind",
    "PipelineEngine",
    "PipelineRun",
    "ProjectFile",
    "PromptLibrary",
    "RenderedPrompt",
    "ReviewDecision",
    "ScanConfig",
    "SimilarityReport",
    "StepKind",
    "StepState",
    "StepStatus",
    "Toolchain",
    "VerificationRecord",
    "Verifier",
    "Workspace",
    "build_toolchain",
    "classify_file",
    "files_for_layer",
    "normalize_tokens",
    "scan_repository",
    "similarity_score",
]
