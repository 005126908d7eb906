"""Backend-agnostic completion gateway with bounded retries.

Two backend kinds are supported: ``openai_compatible`` speaks the de-facto
chat-completions HTTP wire format against any conforming endpoint, and
``stub`` replays a scripted transcript file deterministically for tests and
air-gapped demos. A response is judged incomplete when it is empty or ends
inside an unclosed code fence; incomplete or failed attempts are resubmitted
with byte-identical input up to the retry budget.

Stub transcript format: records separated by a line ``===``, each record
starting with ``match:`` (substring to find in the prompt) and an optional
``fail_count:`` (number of empty responses to serve before the body), then
the response body::

    match: data model
    fail_count: 1
    CREATE TABLE owners (...);

    ## Explanation
    One table per entity.
    ===
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import requests

from .errors import (
    BackendError,
    DuplicateBackend,
    ExhaustedRetries,
    IncompleteResponse,
    InvalidEndpoint,
    Timeout,
    UnknownBackend,
)

DEFAULT_TEMPERATURE = 0.2
DEFAULT_MAX_RETRIES = 2
DEFAULT_TIMEOUT_SECONDS = 60
DEFAULT_MAX_OUTPUT_TOKENS = 2048

_EXPLANATION_HEADING = re.compile(
    r"^\s{0,3}#{1,6}\s*explanation\b.*$", re.IGNORECASE | re.MULTILINE
)


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    backend_id: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    timeout_seconds: int = DEFAULT_TIMEOUT_SECONDS

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    explanation: str
    attempts: int
    backend_id: str
    duration_ms: int


def split_explanation(raw: str) -> tuple[str, str]:
    """Split a response at the first heading matching 'Explanation'."""
    match = _EXPLANATION_HEADING.search(raw)
    if match is None:
        return raw.rstrip("\n"), ""
    return raw[: match.start()].rstrip(), raw[match.end() :].strip()


def has_unclosed_fence(text: str) -> bool:
    fences = sum(1 for line in text.splitlines() if line.lstrip().startswith("```"))
    return fences % 2 == 1


class Backend(Protocol):
    backend_id: str
    kind: str
    max_retries: int

    def send(self, request: CompletionRequest) -> str: ...


@dataclass
class _TranscriptRecord:
    match: str
    fail_count: int
    body: str
    failures_served: int = 0


def parse_transcript(text: str) -> list[_TranscriptRecord]:
    records: list[_TranscriptRecord] = []
    for raw_record in re.split(r"(?m)^===\s*$", text):
        if not raw_record.strip():
            continue
        lines = raw_record.strip("\n").splitlines()
        match_value = ""
        fail_count = 0
        body_start = 0
        for i, line in enumerate(lines):
            if line.startswith("match:"):
                match_value = line[len("match:") :].strip()
                body_start = i + 1
            elif line.startswith("fail_count:"):
                fail_count = int(line[len("fail_count:") :].strip())
                body_start = i + 1
            else:
                break
        body = "\n".join(lines[body_start:]).strip("\n")
        records.append(_TranscriptRecord(match_value, fail_count, body))
    return records


@dataclass
class StubBackend:
    """Replays a transcript file: first record whose match substring appears
    in the prompt answers the request; scripted failures come back as empty
    responses so they exercise the retry path."""

    backend_id: str
    transcript_path: Path
    max_retries: int = DEFAULT_MAX_RETRIES
    kind: str = "stub"
    _records: list[_TranscriptRecord] = field(default_factory=list)

    def __post_init__(self):
        self._records = parse_transcript(
            self.transcript_path.read_text(encoding="utf-8")
        )

    def send(self, request: CompletionRequest) -> str:
        for record in self._records:
            if record.match in request.prompt:
                if record.failures_served < record.fail_count:
                    record.failures_served += 1
                    return ""
                return record.body
        raise BackendError(0, f"no transcript entry matches prompt ({self.transcript_path})")


@dataclass
class OpenAiCompatibleBackend:
    """POSTs to <endpoint>/chat/completions and reads the first choice."""

    backend_id: str
    endpoint: str
    model: str = "default"
    max_retries: int = DEFAULT_MAX_RETRIES
    timeout_seconds: Optional[int] = None
    kind: str = "openai_compatible"

    def send(self, request: CompletionRequest) -> str:
        url = self.endpoint.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        timeout = self.timeout_seconds or request.timeout_seconds
        try:
            response = requests.post(url, json=payload, timeout=timeout)
        except requests.Timeout as exc:
            raise Timeout(f"backend {self.backend_id} timed out: {exc}") from exc
        except requests.RequestException as exc:
            raise BackendError(0, str(exc)) from exc
        if response.status_code != 200:
            raise BackendError(response.status_code, response.text[:500])
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(200, f"malformed completion payload: {exc}") from exc


class LlmGateway:
    """Registry of completion backends plus the retrying complete() contract."""

    def __init__(self):
        self._backends: dict[str, Backend] = {}

    def register_backend(
        self,
        backend_id: str,
        kind: str,
        endpoint: str | Path,
        model: Optional[str] = None,
        max_retries: int = DEFAULT_MAX_RETRIES,
        timeout_seconds: Optional[int] = None,
    ) -> None:
        if backend_id in self._backends:
            raise DuplicateBackend(f"backend {backend_id!r} already registered")
        if kind == "stub":
            path = Path(endpoint)
            if not path.is_file():
                raise InvalidEndpoint(f"stub transcript not found: {path}")
            self._backends[backend_id] = StubBackend(backend_id, path, max_retries)
        elif kind == "openai_compatible":
            url = str(endpoint)
            if not url.startswith(("http://", "https://")):
                raise InvalidEndpoint(f"not an HTTP endpoint: {url}")
            self._backends[backend_id] = OpenAiCompatibleBackend(
                backend_id, url, model or "default", max_retries, timeout_seconds
            )
        else:
            raise InvalidEndpoint(f"unknown backend kind: {kind}")

    def backend_ids(self) -> list[str]:
        return sorted(self._backends)

    def has_backend(self, backend_id: str) -> bool:
        return backend_id in self._backends

    def complete(self, request: CompletionRequest) -> CompletionResult:
        """Send the prompt, retrying incomplete or failed responses.

        Every attempt within one call sends the identical request. After the
        budget is spent the last error surfaces as ExhaustedRetries.
        """
        backend = self._backends.get(request.backend_id)
        if backend is None:
            raise UnknownBackend(f"no backend registered as {request.backend_id!r}")
        budget = 1 + backend.max_retries
        started = time.monotonic()
        last_error: Exception = IncompleteResponse("no attempts made")
        for attempt in range(1, budget + 1):
            try:
                raw = backend.send(request)
                text, explanation = split_explanation(raw)
                if not raw.strip() or not text.strip():
                    raise IncompleteResponse("empty response")
                if has_unclosed_fence(raw):
                    raise IncompleteResponse("response ends inside an unclosed code fence")
                duration_ms = int((time.monotonic() - started) * 1000)
                return CompletionResult(
                    text=text,
                    explanation=explanation,
                    attempts=attempt,
                    backend_id=request.backend_id,
                    duration_ms=duration_ms,
                )
            except (IncompleteResponse, Timeout, BackendError) as exc:
                last_error = exc
        raise ExhaustedRetries(last_error, budget)


def gateway_from_config(config: dict, base_dir: Optional[Path] = None) -> LlmGateway:
    """Register every backend under the llm.backends config key.

    Relative stub transcript paths resolve against ``base_dir`` (the
    workspace root) so workspaces stay relocatable.
    """
    gateway = LlmGateway()
    backends = (config.get("llm", {}) or {}).get("backends", {}) or {}
    for backend_id, spec in sorted(backends.items()):
        endpoint = spec.get("endpoint", "")
        if spec.get("kind") == "stub" and base_dir is not None:
            endpoint_path = Path(endpoint)
            if not endpoint_path.is_absolute():
                endpoint = base_dir / endpoint_path
        timeout = spec.get("timeout_seconds")
        gateway.register_backend(
            backend_id,
            spec.get("kind", "openai_compatible"),
            endpoint,
            model=spec.get("model"),
            max_retries=int(spec.get("max_retries", DEFAULT_MAX_RETRIES)),
            timeout_seconds=int(timeout) if timeout else None,
        )
    return gateway
