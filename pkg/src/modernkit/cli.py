"""Command-line surface: one engine operation per invocation.

Human-readable output by default, machine-readable with --json. Exit codes:
0 success, 1 validation/usage error, 2 engine error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from .app import build_toolchain
from .engine import PhaseKind, ReviewDecision, StepKind
from .errors import VALIDATION, ModernkitError
from .scanner import ScanConfig, scan_repository
from .workspace import resolve_workspace_root

GRAMMAR = """\
commands:
  scan --root DIR [--workspace DIR] [--json]
  run create --phase {RequirementsExtraction|ApplicationGeneration} [--source ARTIFACT] [--tag TAG]
  run status --run RUN_ID
  run list
  run step generate --run RUN_ID --step STEP [--backend ID]
  run step approve --run RUN_ID --step STEP [--edits FILE] [--reviewer NAME] [--note TEXT]
  run step reject --run RUN_ID --step STEP [--reviewer NAME] [--note TEXT]
  run step repair --run RUN_ID --step STEP [--backend ID]
  verify reverse --artifact ID --requirements FILE --backend ID [--threshold X] [--metric M]
  verify cross --run RUN_ID --step STEP --backend ID [--threshold X] [--metric M]
  artifacts list [--tag TAG] [--kind KIND]
  artifacts show --id ID [--version N]
  serve [--port N] [--host ADDR] [--allow-remote]
"""

STEP_CHOICES = click.Choice([s.value for s in StepKind])
PHASE_CHOICES = click.Choice([p.value for p in PhaseKind])


def _emit(payload: dict, as_json: bool, human: str) -> None:
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        click.echo(human)


def _toolchain(ctx: click.Context):
    return build_toolchain(resolve_workspace_root(ctx.obj.get("workspace")))


@click.group()
@click.option("--workspace", "workspace", default=None, envvar="MODERNKIT_WORKSPACE",
              help="Workspace root (default: $MODERNKIT_WORKSPACE or ./workspace)")
@click.pass_context
def cli(ctx: click.Context, workspace: Optional[str]):
    """Modernization workbench: scan, run, review, verify, serve."""
    ctx.ensure_object(dict)
    ctx.obj["workspace"] = workspace


@cli.command("scan")
@click.option("--root", required=True, type=click.Path(), help="Legacy repository root")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def scan_cmd(ctx: click.Context, root: str, as_json: bool):
    """Scan a legacy repository into the workspace's layer manifest."""
    chain = _toolchain(ctx)
    manifest = scan_repository(root, ScanConfig.from_config(chain.workspace.config))
    chain.workspace.save_scan_manifest(manifest.to_dict())
    counts = manifest.layer_counts()
    lines = [f"scanned {len(manifest.entries)} files under {manifest.scan_root}"]
    lines += [f"  {layer}: {count}" for layer, count in counts.items()]
    lines.append(f"unclassified files reported (never dropped): {counts['Unclassified']}")
    _emit(manifest.to_dict(), as_json, "\n".join(lines))


@cli.group("run")
def run_group():
    """Create and drive pipeline runs."""


@run_group.command("create")
@click.option("--phase", required=True, type=PHASE_CHOICES)
@click.option("--source", "source_ref", default=None,
              help="Approved consolidation artifact id (Phase 2)")
@click.option("--tag", "module_tag", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def run_create(ctx, phase, source_ref, module_tag, as_json):
    chain = _toolchain(ctx)
    run = chain.engine.create_run(PhaseKind(phase), source_ref, module_tag)
    _emit(run.to_dict(), as_json,
          f"created run {run.run_id} ({run.phase.value}), {len(run.steps)} steps pending")


@run_group.command("status")
@click.option("--run", "run_id", required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def run_status(ctx, run_id, as_json):
    chain = _toolchain(ctx)
    run = chain.engine.run_status(run_id)
    lines = [f"run {run.run_id} phase={run.phase.value} tag={run.module_tag}"]
    for state in run.steps:
        suffix = f" artifact={state.artifact_id}" if state.artifact_id else ""
        lines.append(f"  {state.step.value}: {state.status.value}"
                     f" (attempts={state.attempt_count}){suffix}")
    _emit(run.to_dict(), as_json, "\n".join(lines))


@run_group.command("list")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def run_list(ctx, as_json):
    chain = _toolchain(ctx)
    runs = chain.engine.list_runs()
    payload = {"runs": [r.to_dict() for r in runs]}
    lines = [f"{r.run_id} {r.phase.value} updated={r.updated_at}" for r in runs]
    _emit(payload, as_json, "\n".join(lines) if lines else "no runs")


@run_group.group("step")
def step_group():
    """Generate, review, and repair individual steps."""


@step_group.command("generate")
@click.option("--run", "run_id", required=True)
@click.option("--step", required=True, type=STEP_CHOICES)
@click.option("--backend", "backend_id", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def step_generate(ctx, run_id, step, backend_id, as_json):
    chain = _toolchain(ctx)
    artifact = chain.engine.generate_step(run_id, StepKind(step), backend_id)
    payload = {"artifact_id": artifact.artifact_id, "version": artifact.version,
               "kind": artifact.kind, "provenance": artifact.provenance}
    _emit(payload, as_json,
          f"generated {artifact.kind} -> {artifact.artifact_id} v{artifact.version}")


def _review(ctx, run_id, step, verdict, edits, reviewer, note, as_json):
    chain = _toolchain(ctx)
    edited_content = None
    if edits:
        edited_content = Path(edits).read_text(encoding="utf-8")
    decision = ReviewDecision(
        run_id=run_id, step=StepKind(step), verdict=verdict,
        edited_content=edited_content, reviewer=reviewer, note=note,
    )
    state = chain.engine.submit_review(decision)
    _emit(state.to_dict(), as_json, f"{step}: {state.status.value}")


@step_group.command("approve")
@click.option("--run", "run_id", required=True)
@click.option("--step", required=True, type=STEP_CHOICES)
@click.option("--edits", default=None, type=click.Path(exists=True),
              help="File whose content replaces the artifact body on approval")
@click.option("--reviewer", default="operator")
@click.option("--note", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def step_approve(ctx, run_id, step, edits, reviewer, note, as_json):
    _review(ctx, run_id, step, "Approve", edits, reviewer, note, as_json)


@step_group.command("reject")
@click.option("--run", "run_id", required=True)
@click.option("--step", required=True, type=STEP_CHOICES)
@click.option("--reviewer", default="operator")
@click.option("--note", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def step_reject(ctx, run_id, step, reviewer, note, as_json):
    _review(ctx, run_id, step, "Reject", None, reviewer, note, as_json)


@step_group.command("repair")
@click.option("--run", "run_id", required=True)
@click.option("--step", required=True, type=STEP_CHOICES)
@click.option("--backend", "backend_id", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def step_repair(ctx, run_id, step, backend_id, as_json):
    chain = _toolchain(ctx)
    artifact = chain.engine.repair_artifact(run_id, StepKind(step), backend_id)
    payload = {"artifact_id": artifact.artifact_id, "version": artifact.version,
               "provenance": artifact.provenance}
    _emit(payload, as_json,
          f"repaired {step} -> {artifact.artifact_id} v{artifact.version} ({artifact.provenance})")


@cli.group("verify")
def verify_group():
    """Advisory verification of generated artifacts."""


@verify_group.command("reverse")
@click.option("--artifact", "artifact_id", required=True)
@click.option("--requirements", required=True, type=click.Path(exists=True),
              help="File holding the original requirements text")
@click.option("--backend", "backend_id", required=True)
@click.option("--threshold", type=float, default=None)
@click.option("--metric", type=click.Choice(["jaccard", "tfidf_cosine"]), default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def verify_reverse(ctx, artifact_id, requirements, backend_id, threshold, metric, as_json):
    chain = _toolchain(ctx)
    original = Path(requirements).read_text(encoding="utf-8")
    record = chain.verifier.reverse_verify(artifact_id, original, backend_id, threshold, metric)
    report = record.report
    _emit(record.to_dict(), as_json,
          f"reverse verification: score={report.score:.4f} threshold={report.threshold}"
          f" passed={report.passed} (advisory)")


@verify_group.command("cross")
@click.option("--run", "run_id", required=True)
@click.option("--step", required=True, type=STEP_CHOICES)
@click.option("--backend", "backend_id", default=None,
              help="Secondary backend id (default: verify.secondary_backend)")
@click.option("--threshold", type=float, default=None)
@click.option("--metric", type=click.Choice(["jaccard", "tfidf_cosine"]), default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def verify_cross(ctx, run_id, step, backend_id, threshold, metric, as_json):
    chain = _toolchain(ctx)
    record = chain.verifier.cross_model_verify(
        run_id, StepKind(step), backend_id, threshold, metric
    )
    report = record.report
    _emit(record.to_dict(), as_json,
          f"cross-model verification: score={report.score:.4f} threshold={report.threshold}"
          f" passed={report.passed} (advisory)")


@cli.group("artifacts")
def artifacts_group():
    """Inspect stored artifacts."""


@artifacts_group.command("list")
@click.option("--tag", default=None)
@click.option("--kind", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def artifacts_list(ctx, tag, kind, as_json):
    chain = _toolchain(ctx)
    rows = chain.store.list_artifacts(module_tag=tag, kind=kind)
    payload = {"artifacts": [row.__dict__ for row in rows]}
    lines = [
        f"{row.artifact_id} v{row.latest_version} tag={row.module_tag}"
        f" kind={row.kind} provenance={row.provenance}"
        for row in rows
    ]
    _emit(payload, as_json, "\n".join(lines) if lines else "no artifacts")


@artifacts_group.command("show")
@click.option("--id", "artifact_id", required=True)
@click.option("--version", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def artifacts_show(ctx, artifact_id, version, as_json):
    chain = _toolchain(ctx)
    artifact = chain.store.load_artifact(artifact_id, version)
    payload = {
        "artifact_id": artifact.artifact_id,
        "module_tag": artifact.module_tag,
        "kind": artifact.kind,
        "version": artifact.version,
        "provenance": artifact.provenance,
        "context_refs": [list(ref) for ref in artifact.context_refs],
        "created_at": artifact.created_at,
        "body": artifact.body,
        "explanation": artifact.explanation,
    }
    human = (f"{artifact.artifact_id} v{artifact.version} kind={artifact.kind}"
             f" provenance={artifact.provenance}\n\n{artifact.body}")
    if artifact.explanation:
        human += f"\n\n--- explanation ---\n{artifact.explanation}"
    _emit(payload, as_json, human)


@cli.command("serve")
@click.option("--port", type=int, default=8700)
@click.option("--host", default="127.0.0.1")
@click.option("--allow-remote", is_flag=True,
              help="Required to bind anything other than loopback")
@click.pass_context
def serve_cmd(ctx, port, host, allow_remote):
    """Serve the HTTP API (loopback only unless --allow-remote)."""
    if host not in ("127.0.0.1", "localhost", "::1") and not allow_remote:
        raise click.UsageError(
            f"binding non-loopback host {host!r} requires --allow-remote"
        )
    import uvicorn

    from .server import create_app

    app = create_app(resolve_workspace_root(ctx.obj.get("workspace")))
    uvicorn.run(app, host=host, port=port, log_level="warning")


def run_cli(argv: Optional[list[str]] = None) -> int:
    """Dispatch argv; returns 0 success, 1 validation/usage, 2 engine error."""
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="modernkit")
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        click.echo(GRAMMAR, err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ModernkitError as exc:
        click.echo(f"error {exc.code}: {exc.message}", err=True)
        return 1 if exc.category == VALIDATION else 2
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
