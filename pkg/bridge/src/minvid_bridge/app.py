"""HTTP surface: POST /score and POST /score_batch.

Requests are validated field by field; a 400 response names the offending
field.  While the adapter loads, both endpoints answer 503.
"""

from __future__ import annotations

import base64
import binascii
import io

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from .adapters import Adapter


class RequestError(ValueError):
    def __init__(self, message: str, field: str):
        super().__init__(message)
        self.field = field


def decode_frame(data: object, field: str) -> np.ndarray:
    if not isinstance(data, str):
        raise RequestError("frame must be a base64 string", field)
    try:
        raw = base64.b64decode(data.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise RequestError(f"invalid base64: {exc}", field) from exc
    try:
        with Image.open(io.BytesIO(raw)) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise RequestError(f"not a decodable image: {exc}", field) from exc


def parse_score_request(doc: object, prefix: str = "") -> tuple[str, int, list[np.ndarray]]:
    if not isinstance(doc, dict):
        raise RequestError("request body must be an object", prefix or "body")
    config_id = doc.get("config_id")
    if not isinstance(config_id, str) or not config_id:
        raise RequestError("config_id must be a nonempty string", f"{prefix}config_id")
    fps = doc.get("fps")
    if not isinstance(fps, (int, float)) or isinstance(fps, bool) or fps <= 0:
        raise RequestError("fps must be a positive number", f"{prefix}fps")
    frames = doc.get("frames")
    if not isinstance(frames, list) or not frames:
        raise RequestError("frames must be a nonempty list", f"{prefix}frames")
    decoded = [
        decode_frame(frame, f"{prefix}frames[{i}]") for i, frame in enumerate(frames)
    ]
    return config_id, int(fps), decoded


def create_app(adapter: Adapter) -> FastAPI:
    app = FastAPI(title="minvid scoring bridge")

    def unavailable() -> JSONResponse:
        return JSONResponse({"error": "model loading, retry later"}, status_code=503)

    def bad_request(exc: RequestError) -> JSONResponse:
        return JSONResponse({"error": str(exc), "field": exc.field}, status_code=400)

    def score_one(doc: object, prefix: str = "") -> dict:
        config_id, fps, frames = parse_score_request(doc, prefix)
        value, labels = adapter.score(frames, fps)
        if not 0.0 <= value <= 1.0:
            raise RuntimeError(f"adapter produced score {value} outside [0, 1]")
        return {
            "config_id": config_id,
            "score": value,
            "label": labels[0] if labels else adapter.name,
            "top_labels": labels[:10],
        }

    @app.post("/score")
    async def score(request: Request):
        if not adapter.ready():
            return unavailable()
        try:
            return score_one(await request.json())
        except RequestError as exc:
            return bad_request(exc)

    @app.post("/score_batch")
    async def score_batch(request: Request):
        if not adapter.ready():
            return unavailable()
        doc = await request.json()
        requests = doc.get("requests") if isinstance(doc, dict) else None
        if not isinstance(requests, list):
            return bad_request(RequestError("requests must be a list", "requests"))
        try:
            responses = [
                score_one(item, prefix=f"requests[{i}].") for i, item in enumerate(requests)
            ]
        except RequestError as exc:
            return bad_request(exc)
        return {"responses": responses}

    return app
