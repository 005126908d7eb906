"""HTTP surface for the review console and scripts.

A thin mapping over the engine: every endpoint delegates to exactly one
engine/store operation and serializes the domain record faithfully. Engine
errors map onto status codes by category (not-found 404, precondition 409,
validation 400, upstream 502) with a structured {code, message, detail} body.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .app import build_toolchain
from .engine import PhaseKind, ReviewDecision, StepKind
from .errors import (
    IO,
    NOT_FOUND,
    PRECONDITION,
    UPSTREAM,
    VALIDATION,
    ModernkitError,
)

STATUS_FOR_CATEGORY = {
    NOT_FOUND: 404,
    PRECONDITION: 409,
    VALIDATION: 400,
    UPSTREAM: 502,
    IO: 500,
}


class CreateRunBody(BaseModel):
    phase: str
    source: Optional[str] = None
    tag: Optional[str] = None


class GenerateBody(BaseModel):
    backend_id: Optional[str] = None


class ReviewBody(BaseModel):
    verdict: str
    edited_content: Optional[str] = None
    reviewer: str = "operator"
    note: Optional[str] = None


class ReverseVerifyBody(BaseModel):
    artifact_id: str
    original_requirements: str
    backend_id: str
    threshold: Optional[float] = None
    metric: Optional[str] = None


class CrossVerifyBody(BaseModel):
    run_id: str
    step: str
    backend_id: str
    threshold: Optional[float] = None
    metric: Optional[str] = None


def _parse_step(value: str) -> StepKind:
    try:
        return StepKind(value)
    except ValueError:
        raise ModernkitError(f"unknown step kind {value!r}") from None


def _parse_phase(value: str) -> PhaseKind:
    try:
        return PhaseKind(value)
    except ValueError:
        raise ModernkitError(f"unknown phase {value!r}") from None


def create_app(workspace_root: str | Path) -> FastAPI:
    chain = build_toolchain(workspace_root)
    app = FastAPI(title="modernkit", version="0.1.0")
    app.state.toolchain = chain
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"http://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ModernkitError)
    async def _handle_error(_request: Request, exc: ModernkitError):
        return JSONResponse(
            status_code=STATUS_FOR_CATEGORY.get(exc.category, 500),
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.post("/runs", status_code=201)
    def create_run(body: CreateRunBody):
        run = chain.engine.create_run(_parse_phase(body.phase), body.source, body.tag)
        return run.to_dict()

    @app.get("/runs")
    def list_runs():
        return {"runs": [r.to_dict() for r in chain.engine.list_runs()]}

    @app.get("/runs/{run_id}")
    def run_status(run_id: str):
        return chain.engine.run_status(run_id).to_dict()

    @app.post("/runs/{run_id}/steps/{step}/generate")
    def generate(run_id: str, step: str, body: Optional[GenerateBody] = None):
        backend_id = body.backend_id if body else None
        artifact = chain.engine.generate_step(run_id, _parse_step(step), backend_id)
        return artifact.to_dict()

    @app.post("/runs/{run_id}/steps/{step}/review")
    def review(run_id: str, step: str, body: ReviewBody):
        decision = ReviewDecision(
            run_id=run_id,
            step=_parse_step(step),
            verdict=body.verdict,
            edited_content=body.edited_content,
            reviewer=body.reviewer,
            note=body.note,
        )
        state = chain.engine.submit_review(decision)
        return state.to_dict()

    @app.post("/runs/{run_id}/steps/{step}/repair")
    def repair(run_id: str, step: str, body: Optional[GenerateBody] = None):
        backend_id = body.backend_id if body else None
        artifact = chain.engine.repair_artifact(run_id, _parse_step(step), backend_id)
        return artifact.to_dict()

    @app.get("/artifacts")
    def list_artifacts(tag: Optional[str] = None, kind: Optional[str] = None):
        rows = chain.store.list_artifacts(module_tag=tag, kind=kind)
        return {"artifacts": [row.__dict__ for row in rows]}

    @app.get("/artifacts/{artifact_id}/{version}")
    def show_artifact(artifact_id: str, version: int):
        return chain.store.load_artifact(artifact_id, version).to_dict()

    @app.get("/artifacts/{artifact_id}/{version}/verifications")
    def artifact_verifications(artifact_id: str, version: int):
        records = [
            r for r in chain.store.list_verifications(artifact_id)
            if r.get("version") == version
        ]
        return {"verifications": records}

    @app.post("/verify/reverse")
    def verify_reverse(body: ReverseVerifyBody):
        record = chain.verifier.reverse_verify(
            body.artifact_id,
            body.original_requirements,
            body.backend_id,
            body.threshold,
            body.metric,
        )
        return record.to_dict()

    @app.post("/verify/cross")
    def verify_cross(body: CrossVerifyBody):
        record = chain.verifier.cross_model_verify(
            body.run_id,
            _parse_step(body.step),
            body.backend_id,
            body.threshold,
            body.metric,
        )
        return record.to_dict()

    @app.get("/manifest")
    def manifest():
        payload = chain.workspace.load_scan_manifest()
        if payload is None:
            return JSONResponse(
                status_code=404,
                content={
                    "code": "NoScanManifest",
                    "message": "no scan manifest in workspace; run a scan first",
                    "detail": {},
                },
            )
        return payload

    ui_dir = os.environ.get("MODERNKIT_UI_DIR")
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
