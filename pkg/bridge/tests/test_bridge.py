from __future__ import annotations

import base64
import io
import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from minvid_bridge import BaselineMeanPixel, DelayedReady, create_app

GOLDEN = Path(__file__).resolve().parent.parent.parent / "fixtures" / "golden"


def canonical_json_bytes(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=True) + "\n").encode("ascii")


def png_b64(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


@pytest.fixture
def client() -> TestClient:
    return TestClient(create_app(BaselineMeanPixel()))


class TestGoldenConformance:
    def test_score_roundtrips_golden_documents(self, client):
        request = json.loads((GOLDEN / "score_request.json").read_text())
        response = client.post("/score", json=request)
        assert response.status_code == 200
        assert canonical_json_bytes(response.json()) == (
            GOLDEN / "score_response.json"
        ).read_bytes()

    def test_batch_roundtrips_golden_documents(self, client):
        request = json.loads((GOLDEN / "score_batch_request.json").read_text())
        response = client.post("/score_batch", json=request)
        assert response.status_code == 200
        assert canonical_json_bytes(response.json()) == (
            GOLDEN / "score_batch_response.json"
        ).read_bytes()


class TestScore:
    def test_constant_black_frames_deterministic(self, client):
        body = {
            "config_id": "cfg-1",
            "fps": 2,
            "frames": [png_b64(np.zeros((4, 4), dtype=np.uint8))],
        }
        first = client.post("/score", json=body).json()
        second = client.post("/score", json=body).json()
        assert first == second
        assert first["config_id"] == "cfg-1"
        assert first["score"] == pytest.approx(0.017986, abs=1e-6)
        assert len(first["top_labels"]) == 10

    def test_score_always_in_unit_interval(self, client):
        rng = np.random.default_rng(1)
        for _ in range(10):
            frames = [
                png_b64(rng.integers(0, 256, (5, 5), dtype=np.uint8))
                for _ in range(rng.integers(1, 4))
            ]
            doc = client.post(
                "/score", json={"config_id": "x", "fps": 2, "frames": frames}
            ).json()
            assert 0.0 <= doc["score"] <= 1.0

    def test_echoes_config_id(self, client):
        body = {
            "config_id": "clip~f0,1~x0_1~y0_1~s50_1~k0",
            "fps": 2,
            "frames": [png_b64(np.full((3, 3), 200, dtype=np.uint8))],
        }
        assert client.post("/score", json=body).json()["config_id"] == body["config_id"]


class TestBatch:
    def test_responses_preserve_input_order(self, client):
        levels = [0, 128, 255]
        requests = [
            {
                "config_id": f"cfg-{level}",
                "fps": 2,
                "frames": [png_b64(np.full((2, 2), level, dtype=np.uint8))],
            }
            for level in levels
        ]
        body = client.post("/score_batch", json={"requests": requests}).json()
        assert [r["config_id"] for r in body["responses"]] == [f"cfg-{v}" for v in levels]
        scores = [r["score"] for r in body["responses"]]
        assert scores == sorted(scores)  # brighter input, larger logistic score

    def test_batch_requires_list(self, client):
        response = client.post("/score_batch", json={"requests": "nope"})
        assert response.status_code == 400
        assert response.json()["field"] == "requests"


class TestValidation:
    def test_malformed_base64_names_field(self, client):
        body = {"config_id": "x", "fps": 2, "frames": ["@@not-base64@@"]}
        response = client.post("/score", json=body)
        assert response.status_code == 400
        assert response.json()["field"] == "frames[0]"

    def test_non_image_payload_names_field(self, client):
        blob = base64.b64encode(b"plain text").decode()
        body = {"config_id": "x", "fps": 2, "frames": [png_b64(np.zeros((2, 2), np.uint8)), blob]}
        response = client.post("/score", json=body)
        assert response.status_code == 400
        assert response.json()["field"] == "frames[1]"

    def test_missing_config_id(self, client):
        response = client.post("/score", json={"fps": 2, "frames": []})
        assert response.status_code == 400
        assert response.json()["field"] == "config_id"

    def test_bad_fps(self, client):
        body = {"config_id": "x", "fps": 0, "frames": [png_b64(np.zeros((2, 2), np.uint8))]}
        response = client.post("/score", json=body)
        assert response.status_code == 400
        assert response.json()["field"] == "fps"

    def test_empty_frames(self, client):
        response = client.post("/score", json={"config_id": "x", "fps": 2, "frames": []})
        assert response.status_code == 400
        assert response.json()["field"] == "frames"

    def test_batch_error_names_nested_field(self, client):
        good = {"config_id": "a", "fps": 2, "frames": [png_b64(np.zeros((2, 2), np.uint8))]}
        bad = {"config_id": "b", "fps": 2, "frames": ["!!"]}
        response = client.post("/score_batch", json={"requests": [good, bad]})
        assert response.status_code == 400
        assert response.json()["field"] == "requests[1].frames[0]"


class TestLoading:
    def test_503_while_model_loads(self):
        adapter = DelayedReady(BaselineMeanPixel(), delay_calls=2)
        client = TestClient(create_app(adapter))
        body = {
            "config_id": "x",
            "fps": 2,
            "frames": [png_b64(np.zeros((2, 2), dtype=np.uint8))],
        }
        assert client.post("/score", json=body).status_code == 503
        assert client.post("/score_batch", json={"requests": [body]}).status_code == 503
        assert client.post("/score", json=body).status_code == 200
