import json

import pytest

from modernkit.cli import run_cli
from modernkit.scanner import LayerManifest

from conftest import LEGACY_TREE, TRANSCRIPTS, make_toolchain


@pytest.fixture
def ws(tmp_path):
    chain = make_toolchain(tmp_path / "ws", {"main": "main.txt"}, scan=False)
    return str(chain.workspace.root)


def invoke(capsys, *argv):
    code = run_cli(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestScanCommand:
    def test_scan_summary(self, ws, capsys):
        code, out, err = invoke(
            capsys, "--workspace", ws, "scan", "--root", str(LEGACY_TREE)
        )
        assert code == 0
        assert "scanned 23 files" in out
        assert "Unclassified: 2" in out

    def test_scan_json_round_trips(self, ws, capsys):
        code, out, _ = invoke(
            capsys, "--workspace", ws, "scan", "--root", str(LEGACY_TREE), "--json"
        )
        assert code == 0
        manifest = LayerManifest.from_dict(json.loads(out))
        assert len(manifest.entries) == 23

    def test_scan_missing_root_is_engine_error(self, ws, capsys):
        code, _, err = invoke(capsys, "--workspace", ws, "scan", "--root", "/nope")
        assert code == 2
        assert "RootNotFound" in err


class TestRunCommands:
    def _scan(self, ws, capsys):
        invoke(capsys, "--workspace", ws, "scan", "--root", str(LEGACY_TREE))

    def test_create_status_generate_approve(self, ws, capsys, tmp_path):
        self._scan(ws, capsys)
        code, out, _ = invoke(
            capsys, "--workspace", ws, "run", "create",
            "--phase", "RequirementsExtraction", "--json",
        )
        assert code == 0
        run_id = json.loads(out)["run_id"]

        code, out, _ = invoke(
            capsys, "--workspace", ws, "run", "step", "generate",
            "--run", run_id, "--step", "InteractionReq",
        )
        assert code == 0

        edits = tmp_path / "edited.md"
        edits.write_text("# Interaction Layer Requirements\n\nEdited by reviewer.\n")
        code, out, _ = invoke(
            capsys, "--workspace", ws, "run", "step", "approve",
            "--run", run_id, "--step", "InteractionReq", "--edits", str(edits),
        )
        assert code == 0
        code, out, _ = invoke(
            capsys, "--workspace", ws, "run", "status", "--run", run_id, "--json"
        )
        payload = json.loads(out)
        assert payload["steps"][0]["status"] == "Approved"

    def test_out_of_order_is_engine_error_exit_2(self, ws, capsys):
        self._scan(ws, capsys)
        code, out, _ = invoke(
            capsys, "--workspace", ws, "run", "create",
            "--phase", "RequirementsExtraction", "--json",
        )
        run_id = json.loads(out)["run_id"]
        code, _, err = invoke(
            capsys, "--workspace", ws, "run", "step", "generate",
            "--run", run_id, "--step", "Consolidate",
        )
        assert code == 2
        assert "OutOfOrder" in err

    def test_unknown_run_exit_2(self, ws, capsys):
        code, _, err = invoke(
            capsys, "--workspace", ws, "run", "status", "--run", "ghost"
        )
        assert code == 2
        assert "UnknownRun" in err

    def test_run_list(self, ws, capsys):
        self._scan(ws, capsys)
        invoke(capsys, "--workspace", ws, "run", "create",
               "--phase", "RequirementsExtraction")
        code, out, _ = invoke(capsys, "--workspace", ws, "run", "list", "--json")
        assert code == 0
        assert len(json.loads(out)["runs"]) == 1


class TestUsageErrors:
    def test_unknown_command(self, ws, capsys):
        code, _, err = invoke(capsys, "--workspace", ws, "frobnicate")
        assert code == 1
        assert "commands:" in err

    def test_bad_step_choice(self, ws, capsys):
        code, _, err = invoke(
            capsys, "--workspace", ws, "run", "step", "generate",
            "--run", "r", "--step", "NotAStep",
        )
        assert code == 1

    def test_missing_required_option(self, ws, capsys):
        code, _, err = invoke(capsys, "--workspace", ws, "scan")
        assert code == 1

    def test_serve_refuses_public_bind_without_flag(self, ws, capsys):
        code, _, err = invoke(
            capsys, "--workspace", ws, "serve", "--host", "0.0.0.0", "--port", "9"
        )
        assert code == 1
        assert "--allow-remote" in err


class TestArtifactsCommands:
    def test_list_and_show(self, ws, capsys):
        from modernkit import build_toolchain

        chain = build_toolchain(ws)
        chain.store.save_artifact("A1", "pets", "Consolidate", "the body",
                                  explanation="why")
        code, out, _ = invoke(capsys, "--workspace", ws, "artifacts", "list")
        assert code == 0
        assert "A1" in out

        code, out, _ = invoke(
            capsys, "--workspace", ws, "artifacts", "show", "--id", "A1", "--json"
        )
        payload = json.loads(out)
        assert payload["body"] == "the body"
        assert payload["explanation"] == "why"

    def test_show_unknown_artifact(self, ws, capsys):
        code, _, err = invoke(
            capsys, "--workspace", ws, "artifacts", "show", "--id", "ghost"
        )
        assert code == 2
        assert "UnknownArtifact" in err

    def test_list_filters(self, ws, capsys):
        from modernkit import build_toolchain

        chain = build_toolchain(ws)
        chain.store.save_artifact("A1", "pets", "Consolidate", "x")
        chain.store.save_artifact("A2", "billing", "ApiCode", "y")
        code, out, _ = invoke(
            capsys, "--workspace", ws, "artifacts", "list", "--tag", "billing", "--json"
        )
        rows = json.loads(out)["artifacts"]
        assert [r["artifact_id"] for r in rows] == ["A2"]


class TestVerifyCommands:
    def test_reverse_via_cli(self, tmp_path, capsys):
        chain = make_toolchain(
            tmp_path / "ws",
            {"main": "main.txt", "echo": "echo_requirements.txt"},
            default="main",
            scan=True,
        )
        ws = str(chain.workspace.root)
        chain.store.save_artifact("api-art", "pets", "ApiCode", "code body")
        requirements = tmp_path / "reqs.txt"
        requirements.write_text(
            (TRANSCRIPTS.parent / "requirements_100.txt").read_text(encoding="utf-8")
        )
        code, out, _ = invoke(
            capsys, "--workspace", ws, "verify", "reverse",
            "--artifact", "api-art", "--requirements", str(requirements),
            "--backend", "echo", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["report"]["score"] == 1.0
        assert payload["report"]["passed"] is True
