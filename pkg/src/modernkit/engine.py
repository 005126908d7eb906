"""Two-phase, step-ordered, human-gated pipeline engine.

Phase 1 (requirements extraction) walks the legacy layers interaction-first;
Phase 2 (application generation) builds the new application data-layer-first,
the reverse order. No step may be generated until every earlier step carries
a human approval, and approval is final within a run. Each generation step
assembles its prompt context exclusively from previously approved artifacts
(progressive prompting), records exactly which artifact versions fed that
context, and persists its rendered prompts so verification can replay them.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import store as store_mod
from .errors import (
    AlreadyGenerated,
    GatewayFailure,
    InvalidReview,
    MissingSource,
    ModernkitError,
    OutOfOrder,
    SourceNotApproved,
    StepNotGenerated,
    UnknownStep,
)
from .gateway import CompletionRequest, LlmGateway
from .prompts import PromptLibrary, RenderedPrompt
from .scanner import LayerKind, LayerManifest, files_for_layer
from .store import ArtifactStore, utc_now
from .workspace import Workspace


class PhaseKind(str, Enum):
    REQUIREMENTS_EXTRACTION = "RequirementsExtraction"
    APPLICATION_GENERATION = "ApplicationGeneration"


class StepKind(str, Enum):
    INTERACTION_REQ = "InteractionReq"
    BUSINESS_REQ = "BusinessReq"
    DATA_CONFIG_REQ = "DataConfigReq"
    CONSOLIDATE = "Consolidate"
    DATA_MODEL_SQL = "DataModelSql"
    ORM_OBJECTS = "OrmObjects"
    API_CODE = "ApiCode"
    TEST_CASES = "TestCases"
    UI_CODE = "UiCode"


class StepStatus(str, Enum):
    PENDING = "Pending"
    GENERATED = "Generated"
    APPROVED = "Approved"
    REJECTED = "Rejected"


PHASE_STEPS: dict[PhaseKind, tuple[StepKind, ...]] = {
    PhaseKind.REQUIREMENTS_EXTRACTION: (
        StepKind.INTERACTION_REQ,
        StepKind.BUSINESS_REQ,
        StepKind.DATA_CONFIG_REQ,
        StepKind.CONSOLIDATE,
    ),
    PhaseKind.APPLICATION_GENERATION: (
        StepKind.DATA_MODEL_SQL,
        StepKind.ORM_OBJECTS,
        StepKind.API_CODE,
        StepKind.TEST_CASES,
        StepKind.UI_CODE,
    ),
}

LAYER_FOR_STEP: dict[StepKind, LayerKind] = {
    StepKind.INTERACTION_REQ: LayerKind.INTERACTION,
    StepKind.BUSINESS_REQ: LayerKind.BUSINESS_LOGIC,
    StepKind.DATA_CONFIG_REQ: LayerKind.DATA,
}

# Config files belong with the data layer step during extraction.
EXTRA_LAYER_FOR_STEP: dict[StepKind, LayerKind] = {
    StepKind.DATA_CONFIG_REQ: LayerKind.CONFIG,
}

STEP_TEMPLATE: dict[StepKind, str] = {
    StepKind.CONSOLIDATE: "consolidate_requirements",
    StepKind.DATA_MODEL_SQL: "data_model_sql",
    StepKind.ORM_OBJECTS: "orm_objects",
    StepKind.API_CODE: "api_code",
    StepKind.TEST_CASES: "test_cases",
    StepKind.UI_CODE: "ui_code",
}


@dataclass
class StepState:
    step: StepKind
    status: StepStatus = StepStatus.PENDING
    artifact_id: Optional[str] = None
    attempt_count: int = 0

    def to_dict(self) -> dict:
        return {
            "step": self.step.value,
            "status": self.status.value,
            "artifact_id": self.artifact_id,
            "attempt_count": self.attempt_count,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StepState":
        return cls(
            step=StepKind(payload["step"]),
            status=StepStatus(payload["status"]),
            artifact_id=payload.get("artifact_id"),
            attempt_count=payload.get("attempt_count", 0),
        )


@dataclass
class PipelineRun:
    run_id: str
    phase: PhaseKind
    source: dict
    module_tag: str
    steps: list[StepState] = field(default_factory=list)
    created_at: str = ""
    updated_at: str = ""

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "phase": self.phase.value,
            "source": self.source,
            "module_tag": self.module_tag,
            "steps": [s.to_dict() for s in self.steps],
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineRun":
        return cls(
            run_id=payload["run_id"],
            phase=PhaseKind(payload["phase"]),
            source=payload["source"],
            module_tag=payload["module_tag"],
            steps=[StepState.from_dict(s) for s in payload["steps"]],
            created_at=payload.get("created_at", ""),
            updated_at=payload.get("updated_at", ""),
        )

    def step_state(self, step: StepKind) -> StepState:
        for state in self.steps:
            if state.step == step:
                return state
        raise UnknownStep(f"run {self.run_id} ({self.phase.value}) has no step {step.value}")

    def first_unapproved(self) -> Optional[StepState]:
        for state in self.steps:
            if state.status != StepStatus.APPROVED:
                return state
        return None


@dataclass(frozen=True)
class ReviewDecision:
    run_id: str
    step: StepKind
    verdict: str  # Approve | Reject
    edited_content: Optional[str] = None
    reviewer: str = "operator"
    note: Optional[str] = None
    decided_at: str = field(default_factory=utc_now)

    def __post_init__(self):
        if self.verdict not in ("Approve", "Reject"):
            raise InvalidReview(f"verdict must be Approve or Reject, not {self.verdict!r}")
        if self.edited_content is not None and self.verdict != "Approve":
            raise InvalidReview("edited content is only permitted with an Approve verdict")


def _sanitize_tag(raw: str) -> str:
    cleaned = "".join(c if (c.isalnum() or c in "._-") else "-" for c in raw).strip("-.")
    return cleaned or "app"


class PipelineEngine:
    """Single-writer-per-run orchestration over the store, prompts, and gateway."""

    def __init__(
        self,
        workspace: Workspace,
        store: ArtifactStore,
        library: PromptLibrary,
        gateway: LlmGateway,
        default_backend: Optional[str] = None,
    ):
        self.workspace = workspace
        self.store = store
        self.library = library
        self.gateway = gateway
        self.default_backend = default_backend or workspace.config_get("llm.default_backend")
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _run_lock(self, run_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks[run_id]

    def _resolve_backend(self, backend_id: Optional[str]) -> str:
        chosen = backend_id or self.default_backend
        if not chosen:
            ids = self.gateway.backend_ids()
            if len(ids) == 1:
                return ids[0]
            raise GatewayFailure(
                ModernkitError("no backend selected and no unambiguous default")
            )
        return chosen

    # --- run lifecycle ---

    def create_run(
        self,
        phase: PhaseKind,
        source_ref: Optional[str] = None,
        module_tag: Optional[str] = None,
    ) -> PipelineRun:
        """Start a run with every step pending.

        Phase 1 sources the workspace's scan manifest; Phase 2 sources an
        approved consolidated-requirements artifact by id.
        """
        if phase == PhaseKind.REQUIREMENTS_EXTRACTION:
            manifest_payload = self.workspace.load_scan_manifest()
            if manifest_payload is None:
                raise MissingSource("no scan manifest in workspace; run a scan first")
            manifest = LayerManifest.from_dict(manifest_payload)
            source = {"kind": "manifest", "ref": "scan_manifest.json"}
            tag = module_tag or _sanitize_tag(manifest.scan_root.rstrip("/").split("/")[-1])
        else:
            if not source_ref:
                raise MissingSource("Phase-2 runs require a consolidated artifact id")
            if not self.store.exists(source_ref):
                raise MissingSource(f"artifact {source_ref!r} not found")
            self._require_approved_consolidation(source_ref)
            source = {"kind": "artifact", "ref": source_ref}
            tag = module_tag or self.store.load_artifact(source_ref).module_tag

        run = PipelineRun(
            run_id=store_mod.new_id("run-"),
            phase=phase,
            source=source,
            module_tag=tag,
            steps=[StepState(step=s) for s in PHASE_STEPS[phase]],
            created_at=utc_now(),
            updated_at=utc_now(),
        )
        self.store.save_run(run.to_dict())
        self.store.append_event(run.run_id, {"event": "created", "phase": phase.value})
        return run

    def _require_approved_consolidation(self, artifact_id: str) -> None:
        artifact = self.store.load_artifact(artifact_id)
        if artifact.kind != StepKind.CONSOLIDATE.value:
            raise SourceNotApproved(
                f"artifact {artifact_id!r} is kind {artifact.kind}, not a consolidation"
            )
        for run_payload in self.store.list_runs():
            run = PipelineRun.from_dict(run_payload)
            for state in run.steps:
                if state.step == StepKind.CONSOLIDATE and state.artifact_id == artifact_id:
                    if state.status == StepStatus.APPROVED:
                        return
                    raise SourceNotApproved(
                        f"consolidation {artifact_id!r} has status {state.status.value}"
                    )
        raise SourceNotApproved(f"consolidation {artifact_id!r} was never approved")

    def run_status(self, run_id: str) -> PipelineRun:
        return PipelineRun.from_dict(self.store.load_run(run_id))

    def list_runs(self) -> list[PipelineRun]:
        return [PipelineRun.from_dict(r) for r in self.store.list_runs()]

    # --- generation ---

    def generate_step(
        self, run_id: str, step: StepKind, backend_id: Optional[str] = None
    ) -> store_mod.Artifact:
        """Generate the step's artifact from the approved context chain."""
        with self._run_lock(run_id):
            run = self.run_status(run_id)
            state = run.step_state(step)
            frontier = run.first_unapproved()
            if frontier is None or frontier.step != step:
                raise OutOfOrder(
                    f"step {step.value} is not the first unapproved step of run {run_id}"
                )
            if state.status == StepStatus.GENERATED:
                raise AlreadyGenerated(f"step {step.value} already has a generated artifact")

            backend = self._resolve_backend(backend_id)
            if not self.gateway.has_backend(backend):
                raise GatewayFailure(ModernkitError(f"backend {backend!r} not registered"))

            # Context assembly first; its failures (missing manifest, missing
            # upstream artifact) propagate as themselves with state untouched.
            if step in LAYER_FOR_STEP:
                manifest = self._load_manifest()
                try:
                    body, explanation, prompts, context_refs = self._generate_layer_document(
                        manifest, step, backend
                    )
                except ModernkitError as exc:
                    raise self._generation_failed(run, state, exc) from exc
            else:
                rendered, context_refs = self._assemble_single_context(run, step)
                prompts = list(rendered.chunks)
                try:
                    body, explanation = self._complete_rendered(rendered, backend)
                except ModernkitError as exc:
                    raise self._generation_failed(run, state, exc) from exc

            artifact_id = state.artifact_id or store_mod.new_id("art-")
            artifact = self.store.save_artifact(
                artifact_id=artifact_id,
                module_tag=run.module_tag,
                kind=step.value,
                body=body,
                explanation=explanation,
                provenance="llm-generated",
                context_refs=tuple(context_refs),
                generation={"backend_id": backend, "prompts": prompts},
            )
            state.artifact_id = artifact.artifact_id
            state.status = StepStatus.GENERATED
            state.attempt_count += 1
            run.updated_at = utc_now()
            self.store.save_run(run.to_dict())
            self.store.append_event(
                run_id,
                {
                    "event": "generated",
                    "step": step.value,
                    "artifact_id": artifact.artifact_id,
                    "version": artifact.version,
                    "backend_id": backend,
                },
            )
            return artifact

    def _generation_failed(
        self, run: PipelineRun, state: StepState, exc: ModernkitError
    ) -> GatewayFailure:
        """Completion failed: the step returns to Pending and the cause
        surfaces as GatewayFailure."""
        state.status = StepStatus.PENDING
        run.updated_at = utc_now()
        self.store.save_run(run.to_dict())
        self.store.append_event(
            run.run_id,
            {"event": "generation_failed", "step": state.step.value, "error": str(exc)},
        )
        return exc if isinstance(exc, GatewayFailure) else GatewayFailure(exc)

    def _load_manifest(self) -> LayerManifest:
        manifest_payload = self.workspace.load_scan_manifest()
        if manifest_payload is None:
            raise MissingSource("no scan manifest in workspace")
        return LayerManifest.from_dict(manifest_payload)

    def _complete_rendered(self, rendered: RenderedPrompt, backend: str) -> tuple[str, str]:
        """Execute a render (sequential chunks) and join outputs in order."""
        texts: list[str] = []
        explanations: list[str] = []
        for chunk in rendered.chunks:
            result = self.gateway.complete(CompletionRequest(prompt=chunk, backend_id=backend))
            texts.append(result.text)
            if result.explanation:
                explanations.append(result.explanation)
        return "\n\n".join(texts), "\n\n".join(explanations)

    def _generate_layer_document(
        self, manifest: LayerManifest, step: StepKind, backend: str
    ) -> tuple[str, str, list[str], list[tuple[str, int]]]:
        """One completion per layer file, concatenated into a layer document.

        A failed file never aborts the step: its section carries an error
        placeholder and the reviewer decides what to do with it.
        """
        layer = LAYER_FOR_STEP[step]
        files = list(files_for_layer(manifest, layer))
        extra = EXTRA_LAYER_FOR_STEP.get(step)
        if extra is not None:
            files.extend(files_for_layer(manifest, extra))

        title = {
            StepKind.INTERACTION_REQ: "Interaction Layer Requirements",
            StepKind.BUSINESS_REQ: "Business Logic Layer Requirements",
            StepKind.DATA_CONFIG_REQ: "Data and Configuration Layer Requirements",
        }[step]
        sections = [f"# {title}"]
        explanations: list[str] = []
        prompts: list[str] = []
        for project_file in files:
            rendered = self.library.render(
                "per_file_requirements",
                {
                    "file_path": project_file.relative_path,
                    "file_content": project_file.content or "(empty file)",
                },
            )
            prompts.extend(rendered.chunks)
            try:
                text, explanation = self._complete_rendered(rendered, backend)
            except ModernkitError as exc:
                sections.append(
                    f"## File: {project_file.relative_path}\n\n"
                    f"[generation failed: {exc.code}: {exc}]"
                )
                continue
            sections.append(f"## File: {project_file.relative_path}\n\n{text}")
            if explanation:
                explanations.append(f"File {project_file.relative_path}: {explanation}")
        if not files:
            sections.append("(no files assigned to this layer)")
        return "\n\n".join(sections), "\n\n".join(explanations), prompts, []

    def _assemble_single_context(
        self, run: PipelineRun, step: StepKind
    ) -> tuple[RenderedPrompt, list[tuple[str, int]]]:
        """Render the step's template from approved upstream artifacts."""
        context: dict[str, str] = {}
        context_refs: list[tuple[str, int]] = []

        def approved_body(source_step: StepKind) -> str:
            state = run.step_state(source_step)
            artifact = self.store.load_artifact(state.artifact_id)
            context_refs.append((artifact.artifact_id, artifact.version))
            return artifact.body

        def consolidated_body() -> str:
            artifact = self.store.load_artifact(run.source["ref"])
            context_refs.append((artifact.artifact_id, artifact.version))
            return artifact.body

        if step == StepKind.CONSOLIDATE:
            context = {
                "interaction_requirements": approved_body(StepKind.INTERACTION_REQ),
                "business_requirements": approved_body(StepKind.BUSINESS_REQ),
                "data_requirements": approved_body(StepKind.DATA_CONFIG_REQ),
            }
        elif step == StepKind.DATA_MODEL_SQL:
            context = {"requirements": consolidated_body()}
        elif step == StepKind.ORM_OBJECTS:
            context = {"data_model": approved_body(StepKind.DATA_MODEL_SQL)}
        elif step == StepKind.API_CODE:
            context = {"orm_code": approved_body(StepKind.ORM_OBJECTS)}
        elif step == StepKind.TEST_CASES:
            context = {"api_code": approved_body(StepKind.API_CODE)}
        elif step == StepKind.UI_CODE:
            context = {"requirements": consolidated_body()}
        else:  # pragma: no cover - layer steps use _generate_layer_document
            raise UnknownStep(f"no context chain for step {step.value}")

        rendered = self.library.render(STEP_TEMPLATE[step], context)
        return rendered, context_refs

    # --- review ---

    def submit_review(self, decision: ReviewDecision) -> StepState:
        """Apply an operator verdict to a generated step."""
        with self._run_lock(decision.run_id):
            run = self.run_status(decision.run_id)
            state = run.step_state(decision.step)
            if state.status != StepStatus.GENERATED:
                raise StepNotGenerated(
                    f"step {decision.step.value} has status {state.status.value}, not Generated"
                )
            if decision.verdict == "Approve":
                if decision.edited_content:
                    previous = self.store.load_artifact(state.artifact_id)
                    edited = self.store.save_artifact(
                        artifact_id=state.artifact_id,
                        module_tag=previous.module_tag,
                        kind=previous.kind,
                        body=decision.edited_content,
                        explanation=previous.explanation,
                        provenance="human-edited",
                        context_refs=((previous.artifact_id, previous.version),),
                    )
                    self.store.append_event(
                        decision.run_id,
                        {
                            "event": "edited",
                            "step": decision.step.value,
                            "artifact_id": edited.artifact_id,
                            "version": edited.version,
                            "reviewer": decision.reviewer,
                        },
                    )
                state.status = StepStatus.APPROVED
            else:
                state.status = StepStatus.REJECTED
            run.updated_at = utc_now()
            self.store.save_run(run.to_dict())
            self.store.append_event(
                decision.run_id,
                {
                    "event": "reviewed",
                    "step": decision.step.value,
                    "verdict": decision.verdict,
                    "reviewer": decision.reviewer,
                    "note": decision.note,
                },
            )
            return state

    # --- repair ---

    def repair_artifact(
        self, run_id: str, step: StepKind, backend_id: Optional[str] = None
    ) -> store_mod.Artifact:
        """Ask a model (optionally a different backend) to fix syntax errors.

        The repaired text lands as a new version; the step stays Generated
        because a human must still approve it.
        """
        with self._run_lock(run_id):
            run = self.run_status(run_id)
            state = run.step_state(step)
            if state.status != StepStatus.GENERATED:
                raise StepNotGenerated(
                    f"step {step.value} has status {state.status.value}, not Generated"
                )
            backend = self._resolve_backend(backend_id)
            previous = self.store.load_artifact(state.artifact_id)
            rendered = self.library.render("repair_syntax", {"artifact_body": previous.body})
            try:
                body, explanation = self._complete_rendered(rendered, backend)
            except ModernkitError as exc:
                if isinstance(exc, GatewayFailure):
                    raise
                raise GatewayFailure(exc) from exc
            artifact = self.store.save_artifact(
                artifact_id=state.artifact_id,
                module_tag=previous.module_tag,
                kind=previous.kind,
                body=body,
                explanation=explanation,
                provenance="llm-repaired",
                context_refs=((previous.artifact_id, previous.version),),
                generation={"backend_id": backend, "prompts": list(rendered.chunks)},
            )
            run.updated_at = utc_now()
            self.store.save_run(run.to_dict())
            self.store.append_event(
                run_id,
                {
                    "event": "repaired",
                    "step": step.value,
                    "artifact_id": artifact.artifact_id,
                    "version": artifact.version,
                    "backend_id": backend,
                },
            )
            return artifact
