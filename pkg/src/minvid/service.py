"""HTTP surface of the human-study service.

Subjects fetch trials from GET /jobs/next and post free-text answers;
administrators enqueue work through POST /jobs.  Stimuli travel in both
presentation forms: an animated GIF looping at the job's frame rate plus
the individual frames as base64 PNGs.  All bodies are JSON documents
matching the manifest schema.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse

from .core import FrameGrid
from .imageio import loop_gif_bytes
from .manifest import config_from_doc
from .oracle import encode_frames_b64
from .study import (
    DeadlineExpired,
    DuplicateSubmission,
    NotAssigned,
    Probe,
    StudyStore,
    UnknownJob,
    burn_probe_marker,
)


def _error(status: int, message: str, field: str | None = None) -> JSONResponse:
    body = {"error": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(body, status_code=status)


def job_payload(store: StudyStore, job) -> dict:
    """Subject-facing job document.

    Probe jobs ship marker coordinates and marked presentation frames, but
    never the component name or accepted labels.
    """
    frames = store.rendered[job.config_key.to_str()]
    config = store.configs[job.config_key.to_str()]
    if job.kind == "probe" and job.probe is not None:
        marked = burn_probe_marker(frames, job.probe)
        frames = [FrameGrid(m) for m in marked]
        probe_doc = {
            "frame_position": job.probe.frame_position,
            "x": job.probe.x,
            "y": job.probe.y,
        }
    else:
        probe_doc = None
    return {
        "job_id": job.job_id,
        "kind": job.kind,
        "config_key": job.config_key.to_str(),
        "fps": config.fps,
        "frames": encode_frames_b64(frames),
        "gif": base64.b64encode(loop_gif_bytes(frames, config.fps)).decode("ascii"),
        "probe": probe_doc,
    }


def create_app(store: StudyStore, admin_token: str = "change-me") -> FastAPI:
    app = FastAPI(title="minvid study service")

    @app.post("/jobs")
    async def enqueue(request: Request, x_admin_token: str | None = Header(None)):
        if x_admin_token != admin_token:
            return _error(401, "admin token required")
        doc = await request.json()
        kind = doc.get("kind")
        n_subjects = doc.get("n_subjects")
        if not isinstance(n_subjects, int) or n_subjects < 1:
            return _error(400, "n_subjects must be a positive integer", "n_subjects")
        try:
            if kind == "recognition":
                configs = [config_from_doc(d) for d in doc.get("configs", [])]
                job_ids = store.enqueue_recognition(configs, n_subjects)
            elif kind == "probe":
                config = config_from_doc(doc["config"])
                probes = [
                    Probe(
                        frame_position=int(p["frame_position"]),
                        x=int(p["x"]),
                        y=int(p["y"]),
                        component_key=tuple(p["component_key"]),
                        component_name=str(p["component_name"]),
                    )
                    for p in doc.get("probes", [])
                ]
                job_ids = store.enqueue_probes(config, probes, n_subjects)
            else:
                return _error(400, f"unknown job kind {kind!r}", "kind")
        except KeyError as exc:
            return _error(400, f"missing or unknown reference: {exc}", str(exc))
        except ValueError as exc:
            return _error(400, str(exc))
        return {"job_ids": job_ids}

    @app.get("/jobs/next")
    def next_job(subject: str):
        if not subject:
            return _error(400, "subject is required", "subject")
        job = store.next_job(subject)
        if job is None:
            return Response(status_code=204)
        return job_payload(store, job)

    @app.post("/jobs/{job_id}/response")
    async def submit(job_id: str, request: Request):
        doc = await request.json()
        subject = doc.get("subject")
        text = doc.get("text")
        if not isinstance(subject, str) or not subject:
            return _error(400, "subject is required", "subject")
        if not isinstance(text, str):
            return _error(400, "text is required", "text")
        try:
            store.submit_response(job_id, subject, text)
        except UnknownJob:
            return _error(404, f"unknown job {job_id}")
        except DuplicateSubmission as exc:
            return _error(409, str(exc))
        except NotAssigned as exc:
            return _error(409, str(exc))
        except DeadlineExpired as exc:
            return _error(410, str(exc))
        return {"accepted": True, "job_id": job_id}

    @app.post("/jobs/{job_id}/override")
    async def override(job_id: str, request: Request, x_admin_token: str | None = Header(None)):
        if x_admin_token != admin_token:
            return _error(401, "admin token required")
        doc = await request.json()
        correct = doc.get("correct")
        if not isinstance(correct, bool):
            return _error(400, "correct must be a boolean", "correct")
        try:
            store.override_response(job_id, correct)
        except UnknownJob:
            return _error(404, f"unknown job {job_id}")
        except (NotAssigned, DuplicateSubmission) as exc:
            return _error(409, str(exc))
        return {"overridden": True, "job_id": job_id}

    @app.get("/configs/{key_str}/status")
    def config_status(key_str: str):
        try:
            return store.config_status(key_str)
        except KeyError:
            return _error(404, f"unknown configuration {key_str}")

    return app
