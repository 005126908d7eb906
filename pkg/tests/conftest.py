"""Shared fixtures: workspace/toolchain builders wired to stub transcripts."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml

from modernkit import build_toolchain
from modernkit.scanner import ScanConfig, scan_repository

FIXTURES = Path(__file__).parent / "fixtures"
TRANSCRIPTS = FIXTURES / "transcripts"
LEGACY_TREE = FIXTURES / "legacy_app"


def make_toolchain(root: Path, backends: dict[str, str], default: str | None = None,
                   scan: bool = False):
    """Build a toolchain in ``root`` with stub backends from named transcripts."""
    root.mkdir(parents=True, exist_ok=True)
    config = {
        "llm": {
            "default_backend": default or (next(iter(backends)) if backends else None),
            "backends": {
                backend_id: {"kind": "stub", "endpoint": str(TRANSCRIPTS / name)}
                for backend_id, name in backends.items()
            },
        },
    }
    (root / "config.yaml").write_text(yaml.safe_dump(config), encoding="utf-8")
    chain = build_toolchain(root)
    if scan:
        manifest = scan_repository(LEGACY_TREE, ScanConfig.from_config(chain.workspace.config))
        chain.workspace.save_scan_manifest(manifest.to_dict())
    return chain


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def legacy_tree() -> Path:
    return LEGACY_TREE


@pytest.fixture
def labels() -> dict[str, str]:
    return json.loads((FIXTURES / "labels.json").read_text(encoding="utf-8"))["labels"]


@pytest.fixture
def chain(tmp_path):
    """Toolchain with the main stub backend and a scanned fixture manifest."""
    return make_toolchain(tmp_path / "ws", {"main": "main.txt"}, scan=True)


# --- acceptance criterion reporting: one pass/fail line per criterion ---

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid:
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[nodeid]
        label = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{label}: {nodeid.split('::')[-1]}")
