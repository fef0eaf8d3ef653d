"""Regenerate the shared golden protocol documents in fixtures/golden/.

The model-scorer documents use the baseline mean-pixel logistic scorer
(sigmoid gain 4, scores rounded to 6 decimals, ten intensity-bin labels),
so the bridge implementation must match these constants exactly.  The
study-service documents are produced by the real store/service code over
a frozen seeded toy clip.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from minvid.core import FrameGrid, canonical_key, make_root
from minvid.manifest import canonical_json_bytes, record_to_doc
from minvid.oracle import AnswerKey, RecognitionRecord, encode_frames_b64, score_request_doc
from minvid.service import job_payload
from minvid.study import Probe, StudyStore

from conftest import build_clip

OUT = ROOT / "fixtures" / "golden"

SIGMOID_GAIN = 4.0
N_BINS = 10


def baseline_score(frames: list[np.ndarray]) -> tuple[float, list[str]]:
    mean = float(np.concatenate([f.reshape(-1) for f in frames]).mean())
    centered = (mean / 255.0) * 2.0 - 1.0
    score = round(1.0 / (1.0 + math.exp(-SIGMOID_GAIN * centered)), 6)
    centers = [255.0 * (i + 0.5) / N_BINS for i in range(N_BINS)]
    order = sorted(range(N_BINS), key=lambda i: (abs(mean - centers[i]), i))
    return score, [f"intensity_bin_{i}" for i in order]


def write(name: str, doc) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_bytes(canonical_json_bytes(doc))
    print("wrote", OUT / name)


def main() -> None:
    # --- scorer documents -------------------------------------------------
    dark = np.zeros((2, 2), dtype=np.uint8)
    light = np.full((2, 2), 255, dtype=np.uint8)
    gray = np.full((2, 2), 128, dtype=np.uint8)

    req1 = score_request_doc(
        "golden-0001", 2, encode_frames_b64([FrameGrid(dark), FrameGrid(light)])
    )
    score1, labels1 = baseline_score([dark, light])
    resp1 = {
        "config_id": "golden-0001",
        "score": score1,
        "label": labels1[0],
        "top_labels": labels1,
    }
    req2 = score_request_doc("golden-0002", 2, encode_frames_b64([FrameGrid(gray)]))
    score2, labels2 = baseline_score([gray])
    resp2 = {
        "config_id": "golden-0002",
        "score": score2,
        "label": labels2[0],
        "top_labels": labels2,
    }
    write("score_request.json", req1)
    write("score_response.json", resp1)
    write("score_batch_request.json", {"requests": [req1, req2]})
    write("score_batch_response.json", {"responses": [resp1, resp2]})

    # --- study-service documents ------------------------------------------
    clip = build_clip(12, 2, seed=11)
    answer_key = AnswerKey(
        key_id="ak-rowing",
        category="rowing",
        object_terms=("boat", "canoe", "kayak"),
        action_terms=("row", "paddle"),
    )
    store = StudyStore()
    store.add_clip(clip, answer_key)
    root = make_root(clip)
    store.enqueue_recognition([root], n_subjects=2)
    job = store.next_job("s-1")
    write("job_document.json", job_payload(store, job))

    probe_store = StudyStore()
    probe_store.add_clip(clip, answer_key)
    probe = Probe(frame_position=1, x=3, y=2, component_key=("oar", "paddle"), component_name="oar")
    probe_store.enqueue_probes(root, [probe], n_subjects=1)
    probe_job = probe_store.next_job("s-2")
    write("probe_job_document.json", job_payload(probe_store, probe_job))

    write("response_submission.json", {"subject": "s-17", "text": "a person rowing a small boat"})

    record = RecognitionRecord(config_key=canonical_key(root), n_subjects=30, n_correct=21)
    write(
        "record_status.json",
        {
            "config_key": canonical_key(root).to_str(),
            "state": "complete",
            "record": record_to_doc(record),
        },
    )


if __name__ == "__main__":
    main()
