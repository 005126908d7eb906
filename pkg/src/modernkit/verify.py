"""Reverse-generation and cross-model verification.

Generated output is fed back through a model to regenerate the requirements
it should satisfy, and the regenerated text is scored against the originals
with a deterministic similarity metric; alternatively the step's exact
prompts are replayed on a second backend and the two outputs compared. Either
way the resulting report is advisory input for the human reviewer; nothing
here ever changes a run or step status.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .engine import PipelineRun, StepKind, StepStatus
from .errors import GatewayFailure, ModernkitError, SameBackend, StepHasNoArtifact
from .gateway import CompletionRequest, LlmGateway
from .prompts import PromptLibrary
from .store import ArtifactStore, utc_now

METRICS = ("jaccard", "tfidf_cosine")
DEFAULT_THRESHOLD = 0.75
MISSING_TOKENS_CAP = 50

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def _load_stopwords() -> frozenset[str]:
    text = (resources.files("modernkit") / "data" / "stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = _load_stopwords()


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop short and stop words."""
    tokens = _TOKEN_SPLIT.split(text.lower())
    return [t for t in tokens if len(t) >= 2 and t not in STOPWORDS]


def jaccard(left_tokens: list[str], right_tokens: list[str]) -> float:
    left, right = set(left_tokens), set(right_tokens)
    if not left and not right:
        return 1.0
    union = left | right
    return len(left & right) / len(union)


def tfidf_cosine(left_tokens: list[str], right_tokens: list[str]) -> float:
    """Cosine of term-frequency vectors with IDF over exactly the two inputs.

    The two-document IDF is smoothed (ln((1+N)/(1+df)) + 1) so shared terms
    keep nonzero weight and identical texts score exactly 1.0.
    """
    if not left_tokens and not right_tokens:
        return 1.0
    if not left_tokens or not right_tokens:
        return 0.0
    left_tf, right_tf = Counter(left_tokens), Counter(right_tokens)
    vocabulary = set(left_tf) | set(right_tf)
    corpus_size = 2
    weights = {}
    for term in vocabulary:
        df = (term in left_tf) + (term in right_tf)
        weights[term] = math.log((1 + corpus_size) / (1 + df)) + 1.0
    dot = sum(left_tf[t] * right_tf[t] * weights[t] ** 2 for t in vocabulary)
    left_norm = math.sqrt(sum((left_tf[t] * weights[t]) ** 2 for t in vocabulary))
    right_norm = math.sqrt(sum((right_tf[t] * weights[t]) ** 2 for t in vocabulary))
    if left_norm == 0.0 or right_norm == 0.0:
        return 0.0
    return min(1.0, dot / (left_norm * right_norm))


def similarity_score(left: str, right: str, metric: str = "jaccard") -> float:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, not {metric!r}")
    left_tokens, right_tokens = normalize_tokens(left), normalize_tokens(right)
    if metric == "jaccard":
        return jaccard(left_tokens, right_tokens)
    return tfidf_cosine(left_tokens, right_tokens)


@dataclass(frozen=True)
class SimilarityReport:
    score: float
    threshold: float
    passed: bool
    metric: str
    left_token_count: int
    right_token_count: int
    missing_tokens: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "threshold": self.threshold,
            "passed": self.passed,
            "metric": self.metric,
            "left_token_count": self.left_token_count,
            "right_token_count": self.right_token_count,
            "missing_tokens": list(self.missing_tokens),
        }


def build_report(left: str, right: str, metric: str, threshold: float) -> SimilarityReport:
    """Score two texts and diagnose which left-side tokens went missing."""
    left_tokens, right_tokens = normalize_tokens(left), normalize_tokens(right)
    score = similarity_score(left, right, metric)
    missing = sorted(set(left_tokens) - set(right_tokens))[:MISSING_TOKENS_CAP]
    return SimilarityReport(
        score=score,
        threshold=threshold,
        passed=score >= threshold,
        metric=metric,
        left_token_count=len(left_tokens),
        right_token_count=len(right_tokens),
        missing_tokens=tuple(missing),
    )


@dataclass(frozen=True)
class VerificationRecord:
    artifact_id: str
    version: int
    mode: str  # reverse | cross_model
    regenerated_text: str
    report: SimilarityReport
    backend_id: str
    created_at: str = field(default_factory=utc_now)

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "version": self.version,
            "mode": self.mode,
            "regenerated_text": self.regenerated_text,
            "report": self.report.to_dict(),
            "backend_id": self.backend_id,
            "created_at": self.created_at,
        }


class Verifier:
    """Advisory verification over stored artifacts; append-only records."""

    def __init__(self, store: ArtifactStore, library: PromptLibrary, gateway: LlmGateway):
        self.store = store
        self.library = library
        self.gateway = gateway
        config = store.workspace.config
        verify_config = config.get("verify", {}) or {}
        self.metric = verify_config.get("metric", "jaccard")
        self.threshold = float(verify_config.get("threshold", DEFAULT_THRESHOLD))
        self.secondary_backend = verify_config.get("secondary_backend")

    def _complete_chunks(self, prompts: list[str], backend_id: str) -> str:
        texts = []
        for prompt in prompts:
            try:
                result = self.gateway.complete(
                    CompletionRequest(prompt=prompt, backend_id=backend_id)
                )
            except ModernkitError as exc:
                raise GatewayFailure(exc) from exc
            texts.append(result.text)
        return "\n\n".join(texts)

    def reverse_verify(
        self,
        artifact_id: str,
        original_requirements: str,
        backend_id: str,
        threshold: Optional[float] = None,
        metric: Optional[str] = None,
    ) -> VerificationRecord:
        """Regenerate requirements from the artifact body and score them
        against the originals."""
        artifact = self.store.load_artifact(artifact_id)  # UnknownArtifact when absent
        rendered = self.library.render(
            "reverse_requirements", {"artifact_body": artifact.body}
        )
        regenerated = self._complete_chunks(list(rendered.chunks), backend_id)
        report = build_report(
            original_requirements,
            regenerated,
            metric or self.metric,
            self.threshold if threshold is None else threshold,
        )
        record = VerificationRecord(
            artifact_id=artifact.artifact_id,
            version=artifact.version,
            mode="reverse",
            regenerated_text=regenerated,
            report=report,
            backend_id=backend_id,
        )
        self.store.save_verification(record.to_dict())
        return record

    def cross_model_verify(
        self,
        run_id: str,
        step: StepKind,
        secondary_backend_id: Optional[str] = None,
        threshold: Optional[float] = None,
        metric: Optional[str] = None,
    ) -> VerificationRecord:
        """Replay the step's exact rendered prompts on a second backend and
        compare the outputs. Advisory only: step status is never touched."""
        secondary_backend_id = secondary_backend_id or self.secondary_backend
        if not secondary_backend_id:
            raise ModernkitError("no secondary backend given or configured")
        run = PipelineRun.from_dict(self.store.load_run(run_id))
        state = run.step_state(step)
        if state.status not in (StepStatus.GENERATED, StepStatus.APPROVED):
            raise StepHasNoArtifact(
                f"step {step.value} has status {state.status.value}; nothing to verify"
            )
        if state.artifact_id is None:
            raise StepHasNoArtifact(f"step {step.value} has no artifact")

        generated_version, generation = self._latest_generation(state.artifact_id)
        if generation["backend_id"] == secondary_backend_id:
            raise SameBackend(
                f"secondary backend {secondary_backend_id!r} generated this artifact"
            )
        primary = self.store.load_artifact(state.artifact_id, generated_version)
        secondary_output = self._complete_chunks(
            list(generation["prompts"]), secondary_backend_id
        )
        report = build_report(
            primary.body,
            secondary_output,
            metric or self.metric,
            self.threshold if threshold is None else threshold,
        )
        record = VerificationRecord(
            artifact_id=primary.artifact_id,
            version=primary.version,
            mode="cross_model",
            regenerated_text=secondary_output,
            report=report,
            backend_id=secondary_backend_id,
        )
        self.store.save_verification(record.to_dict())
        return record

    def _latest_generation(self, artifact_id: str) -> tuple[int, dict]:
        latest = self.store.latest_version(artifact_id)
        for version in range(latest, 0, -1):
            generation = self.store.load_generation(artifact_id, version)
            if generation is not None and generation.get("prompts"):
                return version, generation
        raise StepHasNoArtifact(
            f"artifact {artifact_id!r} has no recorded generation prompts"
        )

    def records_for(self, artifact_id: Optional[str] = None) -> list[dict]:
        return self.store.list_verifications(artifact_id)
