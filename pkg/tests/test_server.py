import pytest
from fastapi.testclient import TestClient

from modernkit.server import create_app

from conftest import make_toolchain


@pytest.fixture
def client(tmp_path):
    chain = make_toolchain(tmp_path / "ws", {"main": "main.txt"}, scan=True)
    app = create_app(chain.workspace.root)
    return TestClient(app)


def drive_phase1(client):
    run_id = client.post(
        "/runs", json={"phase": "RequirementsExtraction"}
    ).json()["run_id"]
    for step in ("InteractionReq", "BusinessReq", "DataConfigReq", "Consolidate"):
        response = client.post(f"/runs/{run_id}/steps/{step}/generate", json={})
        assert response.status_code == 200, response.text
        response = client.post(
            f"/runs/{run_id}/steps/{step}/review", json={"verdict": "Approve"}
        )
        assert response.status_code == 200, response.text
    return run_id


class TestRunEndpoints:
    def test_create_run_201(self, client):
        response = client.post("/runs", json={"phase": "RequirementsExtraction"})
        assert response.status_code == 201
        payload = response.json()
        assert payload["phase"] == "RequirementsExtraction"
        assert len(payload["steps"]) == 4
        assert all(s["status"] == "Pending" for s in payload["steps"])

    def test_get_unknown_run_404(self, client):
        response = client.get("/runs/ghost")
        assert response.status_code == 404
        assert response.json()["code"] == "UnknownRun"

    def test_review_pending_step_409(self, client):
        run_id = client.post(
            "/runs", json={"phase": "RequirementsExtraction"}
        ).json()["run_id"]
        response = client.post(
            f"/runs/{run_id}/steps/InteractionReq/review", json={"verdict": "Approve"}
        )
        assert response.status_code == 409
        assert response.json()["code"] == "StepNotGenerated"

    def test_generate_out_of_order_409(self, client):
        run_id = client.post(
            "/runs", json={"phase": "RequirementsExtraction"}
        ).json()["run_id"]
        response = client.post(f"/runs/{run_id}/steps/Consolidate/generate", json={})
        assert response.status_code == 409
        assert response.json()["code"] == "OutOfOrder"

    def test_unknown_step_kind_400(self, client):
        run_id = client.post(
            "/runs", json={"phase": "RequirementsExtraction"}
        ).json()["run_id"]
        response = client.post(f"/runs/{run_id}/steps/Bogus/generate", json={})
        assert response.status_code == 400

    def test_full_phase1_over_http(self, client):
        run_id = drive_phase1(client)
        payload = client.get(f"/runs/{run_id}").json()
        assert all(s["status"] == "Approved" for s in payload["steps"])

    def test_list_runs(self, client):
        client.post("/runs", json={"phase": "RequirementsExtraction"})
        payload = client.get("/runs").json()
        assert len(payload["runs"]) == 1

    def test_phase2_unapproved_source_409(self, client):
        response = client.post(
            "/runs", json={"phase": "ApplicationGeneration", "source": "ghost"}
        )
        assert response.status_code == 400  # MissingSource is a validation error
        assert response.json()["code"] == "MissingSource"


class TestArtifactEndpoints:
    def test_show_artifact_and_listing(self, client):
        run_id = drive_phase1(client)
        run = client.get(f"/runs/{run_id}").json()
        artifact_id = run["steps"][0]["artifact_id"]
        listing = client.get("/artifacts").json()["artifacts"]
        assert any(row["artifact_id"] == artifact_id for row in listing)
        record = client.get(f"/artifacts/{artifact_id}/1").json()
        assert record["kind"] == "InteractionReq"
        assert "## File:" in record["body"]

    def test_unknown_version_404(self, client):
        run_id = drive_phase1(client)
        run = client.get(f"/runs/{run_id}").json()
        artifact_id = run["steps"][0]["artifact_id"]
        response = client.get(f"/artifacts/{artifact_id}/99")
        assert response.status_code == 404
        assert response.json()["code"] == "UnknownVersion"

    def test_repair_endpoint(self, client):
        run_id = client.post(
            "/runs", json={"phase": "RequirementsExtraction"}
        ).json()["run_id"]
        client.post(f"/runs/{run_id}/steps/InteractionReq/generate", json={})
        response = client.post(f"/runs/{run_id}/steps/InteractionReq/repair", json={})
        assert response.status_code == 200
        assert response.json()["provenance"] == "llm-repaired"


class TestManifestEndpoint:
    def test_manifest_served(self, client):
        payload = client.get("/manifest").json()
        assert payload["scan_root"].endswith("legacy_app")
        assert len(payload["entries"]) == 23

    def test_manifest_missing_404(self, tmp_path):
        chain = make_toolchain(tmp_path / "bare", {"main": "main.txt"}, scan=False)
        client = TestClient(create_app(chain.workspace.root))
        assert client.get("/manifest").status_code == 404


class TestVerifyEndpoints:
    def test_reverse_verify(self, tmp_path):
        chain = make_toolchain(
            tmp_path / "ws",
            {"main": "main.txt", "echo": "echo_requirements.txt"},
            default="main",
            scan=True,
        )
        chain.store.save_artifact("api-art", "pets", "ApiCode", "code body")
        client = TestClient(create_app(chain.workspace.root))
        from conftest import FIXTURES

        original = (FIXTURES / "requirements_100.txt").read_text(encoding="utf-8")
        response = client.post("/verify/reverse", json={
            "artifact_id": "api-art",
            "original_requirements": original,
            "backend_id": "echo",
        })
        assert response.status_code == 200
        assert response.json()["report"]["score"] == 1.0

    def test_gateway_failure_maps_502(self, tmp_path):
        chain = make_toolchain(
            tmp_path / "ws",
            {"main": "main.txt", "broken": "nomatch.txt"},
            default="main",
            scan=True,
        )
        chain.store.save_artifact("api-art", "pets", "ApiCode", "code body")
        client = TestClient(create_app(chain.workspace.root))
        response = client.post("/verify/reverse", json={
            "artifact_id": "api-art",
            "original_requirements": "anything",
            "backend_id": "broken",
        })
        assert response.status_code == 502
        assert response.json()["code"] == "GatewayFailure"
