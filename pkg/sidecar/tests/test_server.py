from __future__ import annotations

import json
import socket
import threading
import time

import pytest
import requests
from fastapi.testclient import TestClient

from conftest import run_primary
from varmatch_sidecar.model import PairScorer
from varmatch_sidecar.server import build_app


@pytest.fixture(scope="module")
def client(tiny_checkpoint):
    return TestClient(build_app(PairScorer(tiny_checkpoint)))


WIRE_PAIRS = [
    {"tokens": ["[BOS]", "brand", "acme", "color", "red",
                "[SEP]", "brand", "acme", "color", "red", "[SEP]"]},
    {"left_text": "brand: acme, color: red", "right_text": "brand: zen, color: blue"},
]


class TestProtocol:
    def test_batch_of_two(self, client):
        response = client.post("/", json={"pairs": WIRE_PAIRS})
        assert response.status_code == 200
        scores = response.json()["scores"]
        assert len(scores) == 2
        assert all(0.0 <= s <= 1.0 for s in scores)

    def test_empty_batch(self, client):
        response = client.post("/", json={"pairs": []})
        assert response.status_code == 200
        assert response.json() == {"scores": []}

    def test_order_preserved(self, client):
        forward = client.post("/", json={"pairs": WIRE_PAIRS}).json()["scores"]
        backward = client.post("/", json={"pairs": list(reversed(WIRE_PAIRS))}).json()["scores"]
        assert backward == list(reversed(forward))

    def test_missing_pairs_key_is_protocol_error(self, client):
        response = client.post("/", json={"payload": 1})
        assert response.status_code == 400
        assert "error" in response.json()
        # the process keeps serving
        assert client.post("/", json={"pairs": []}).status_code == 200

    def test_invalid_json_is_protocol_error(self, client):
        response = client.post("/", content=b"{nope", headers={"Content-Type": "application/json"})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_score_alias_route(self, client):
        response = client.post("/score", json={"pairs": WIRE_PAIRS})
        assert response.status_code == 200

    def test_health_reports_digest(self, client, tiny_checkpoint):
        response = client.get("/health")
        assert response.status_code == 200
        body = response.json()
        manifest = json.loads((tiny_checkpoint / "sidecar.json").read_text())
        assert body["model_digest"] == manifest["model_digest"]
        assert body["config"]["epochs"] == manifest["train_config"]["epochs"]


@pytest.fixture(scope="module")
def live_server(tiny_checkpoint):
    import uvicorn

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(build_app(PairScorer(tiny_checkpoint)),
                            host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            requests.get(url + "/health", timeout=1)
            break
        except requests.RequestException:
            time.sleep(0.1)
    yield url
    server.should_exit = True
    thread.join(timeout=5)


class TestPrimaryDrivenConformance:
    def test_primary_match_command_scores_through_sidecar(self, live_server, tiny_pairs,
                                                          tmp_path_factory):
        workdir = tmp_path_factory.mktemp("remote")
        catalog = tiny_pairs.parent / "catalog.jsonl"
        scores = workdir / "scores.jsonl"
        run_primary(["match", "--pairs", tiny_pairs, "--catalog", catalog,
                     "--backend", "remote", "--endpoint", live_server,
                     "--out", scores])
        rows = [json.loads(line) for line in scores.read_text().splitlines()][1:]
        assert rows and all(0.0 <= row["score"] <= 1.0 for row in rows)

    def test_primary_conformance_probe_passes(self, live_server):
        from varmatch.matchkit import check_scoring_endpoint

        passed = check_scoring_endpoint(live_server)
        assert set(passed) >= {
            "empty_batch", "length_and_range", "deterministic",
            "order_preserved", "malformed_request_rejected",
            "survives_malformed_request"}
