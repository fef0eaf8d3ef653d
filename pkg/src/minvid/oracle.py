"""Recognition oracles.

Everything that can answer "is this configuration recognizable" is
expressed through one contract: given a configuration it produces a
RecognitionRecord (n correct out of n subjects).  Concrete backends are a
deterministic synthetic oracle for desk-scale runs, an HTTP client for the
model-scoring wire protocol, and a client for the human-study service.
Free-text answers are adjudicated by keyword matching against curated
answer keys.
"""

from __future__ import annotations

import base64
import io
import random
import string
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Protocol

import httpx

from .core import ConfigKey, SourceClip, VideoConfig, canonical_key, round_half_up

DEFAULT_N_SUBJECTS = 30
RECOGNITION_THRESHOLD = Fraction(1, 2)  # strict: rate must exceed this


class OracleError(RuntimeError):
    pass


class OracleUnavailable(OracleError):
    """The oracle backend cannot be reached; the node stays pending."""


class OracleTimeout(OracleError):
    """The oracle did not answer in time; the node stays pending."""


class OraclePending(OracleError):
    """The answer is being collected asynchronously (e.g. human jobs)."""


class EmptyResponses(ValueError):
    pass


# ---------------------------------------------------------------------------
# Free-text adjudication


_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})


def _stem(word: str) -> str:
    """Crude suffix stripping, applied identically to keys and responses.

    Linguistic fidelity does not matter; only that inflections of one term
    collapse to the same stem on both sides of the comparison.
    """
    w = word
    if w.endswith("ing") and len(w) >= 6:
        w = w[:-3]
        if len(w) >= 3 and w[-1] == w[-2]:
            w = w[:-1]
    elif w.endswith("ed") and len(w) >= 4:
        w = w[:-2]
        if len(w) >= 3 and w[-1] == w[-2]:
            w = w[:-1]
    elif w.endswith("es") and len(w) >= 4:
        w = w[:-2]
    elif w.endswith("s") and not w.endswith("ss") and len(w) >= 4:
        w = w[:-1]
    if w.endswith("e") and len(w) >= 4:
        w = w[:-1]
    return w


def text_stems(text: str) -> frozenset[str]:
    words = text.lower().translate(_PUNCT_TABLE).split()
    return frozenset(_stem(w) for w in words if w)


def term_stems(term: str) -> frozenset[str]:
    """A term may be a phrase; it matches when all of its word stems appear."""
    return text_stems(term)


@dataclass(frozen=True, order=True)
class AnswerKey:
    """Correctness standard for one action category.

    A response is correct when it names at least one object term and at
    least one action term.  Terms are stored verbatim; matching happens on
    normalized stems.
    """

    key_id: str
    category: str
    object_terms: tuple[str, ...]
    action_terms: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "object_terms", tuple(self.object_terms))
        object.__setattr__(self, "action_terms", tuple(self.action_terms))
        if not self.object_terms or not self.action_terms:
            raise ValueError("object and action term sets must both be nonempty")

    @property
    def object_stem_sets(self) -> tuple[frozenset[str], ...]:
        return tuple(term_stems(t) for t in self.object_terms)

    @property
    def action_stem_sets(self) -> tuple[frozenset[str], ...]:
        return tuple(term_stems(t) for t in self.action_terms)


def _any_term_present(stems: frozenset[str], terms: Iterable[frozenset[str]]) -> bool:
    return any(t and t <= stems for t in terms)


def match_description(free_text: str, key: AnswerKey) -> bool:
    """True iff the text names both an object term and an action term."""
    stems = text_stems(free_text)
    if not stems:
        return False
    return _any_term_present(stems, key.object_stem_sets) and _any_term_present(
        stems, key.action_stem_sets
    )


def answer_key_from_text(text: str, key_id: str | None = None) -> AnswerKey:
    """Parse the ``category:/object:/action:`` answer-key file format."""
    category = ""
    objects: list[str] = []
    actions: list[str] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ValueError(f"malformed answer key line: {line!r}")
        label, _, rest = line.partition(":")
        values = [v.strip() for v in rest.split(",") if v.strip()]
        label = label.strip().lower()
        if label == "category":
            category = rest.strip()
        elif label == "object":
            objects.extend(values)
        elif label == "action":
            actions.extend(values)
        else:
            raise ValueError(f"unknown answer key field {label!r}")
    if not category:
        raise ValueError("answer key must name a category")
    return AnswerKey(
        key_id=key_id or f"ak-{category}",
        category=category,
        object_terms=tuple(objects),
        action_terms=tuple(actions),
    )


# ---------------------------------------------------------------------------
# Recognition records


@dataclass(frozen=True)
class TrialResponse:
    """One subject's free-text answer for one configuration.

    ``correct`` is recomputable from the text and the answer key and is
    stored for audit; ``manual_override``, when set, records an explicit
    adjudication of an ambiguous response and takes precedence.
    """

    subject_id: str
    config_key: ConfigKey
    free_text: str
    correct: bool
    timestamp: float | None = None
    manual_override: bool | None = None

    @property
    def effective_correct(self) -> bool:
        return self.correct if self.manual_override is None else self.manual_override


@dataclass(frozen=True)
class RecognitionRecord:
    config_key: ConfigKey
    n_subjects: int
    n_correct: int

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        if not 0 <= self.n_correct <= self.n_subjects:
            raise ValueError("n_correct must lie in [0, n_subjects]")

    @property
    def rate(self) -> Fraction:
        return Fraction(self.n_correct, self.n_subjects)


def recognition_rate(responses: list[TrialResponse], key: AnswerKey) -> RecognitionRecord:
    """Re-adjudicate responses against the key and compute the exact rate.

    The stored ``correct`` flags are never trusted blindly: text is matched
    afresh, with explicit manual overrides taking precedence.
    """
    if not responses:
        raise EmptyResponses("no responses to aggregate")
    config_key = responses[0].config_key
    if any(r.config_key != config_key for r in responses):
        raise ValueError("responses must all belong to one configuration")
    n_correct = sum(
        1
        for r in responses
        if (match_description(r.free_text, key) if r.manual_override is None
            else r.manual_override)
    )
    return RecognitionRecord(config_key=config_key, n_subjects=len(responses), n_correct=n_correct)


def is_recognizable(record: RecognitionRecord) -> bool:
    """Strictly more than half of the subjects were correct."""
    return record.rate > RECOGNITION_THRESHOLD


# ---------------------------------------------------------------------------
# Oracle backends


class OracleHandle(Protocol):
    def fetch(self, config: VideoConfig, key: ConfigKey, n_subjects: int) -> RecognitionRecord:
        """Produce the record for one configuration; may raise OracleError."""


def query(
    oracle: OracleHandle, config: VideoConfig, n_subjects: int = DEFAULT_N_SUBJECTS
) -> RecognitionRecord:
    if n_subjects < 1:
        raise ValueError("n_subjects must be >= 1")
    return oracle.fetch(config, canonical_key(config), n_subjects)


RateFn = Callable[[ConfigKey, VideoConfig], float | Fraction]


class SyntheticOracle:
    """Deterministic test oracle driven by a rate function over keys.

    Without a seed the count is the rate quantized to the nearest subject
    count.  With a seed, per-subject Bernoulli draws are derived from the
    key alone, so records do not depend on query order.
    """

    def __init__(self, rate_fn: RateFn, seed: int | None = None):
        self._rate_fn = rate_fn
        self._seed = seed

    def fetch(self, config: VideoConfig, key: ConfigKey, n_subjects: int) -> RecognitionRecord:
        rate = Fraction(self._rate_fn(key, config)).limit_denominator(10**9)
        rate = min(max(rate, Fraction(0)), Fraction(1))
        if self._seed is None:
            n_correct = round_half_up(rate * n_subjects)
        else:
            rng = random.Random(f"{self._seed}:{key.to_str()}")
            n_correct = sum(1 for _ in range(n_subjects) if rng.random() < rate)
        return RecognitionRecord(config_key=key, n_subjects=n_subjects, n_correct=n_correct)


class TableOracle:
    """Fixed rate per key; unknown keys raise.  Handy in tests."""

    def __init__(self, rates: dict[ConfigKey, float | Fraction]):
        self._rates = dict(rates)

    def fetch(self, config: VideoConfig, key: ConfigKey, n_subjects: int) -> RecognitionRecord:
        if key not in self._rates:
            raise OracleUnavailable(f"no tabled rate for {key.to_str()}")
        rate = Fraction(self._rates[key]).limit_denominator(10**9)
        return RecognitionRecord(
            config_key=key, n_subjects=n_subjects, n_correct=round_half_up(rate * n_subjects)
        )


class CachedOracle:
    """Per-key cache with single-flight semantics around an inner oracle.

    Concurrent queries for one key produce exactly one upstream call; the
    cached record is returned for every repeat.
    """

    def __init__(self, inner: OracleHandle):
        self._inner = inner
        self._records: dict[ConfigKey, RecognitionRecord] = {}
        self._key_locks: dict[ConfigKey, threading.Lock] = {}
        self._lock = threading.Lock()

    @property
    def upstream(self) -> OracleHandle:
        return self._inner

    def fetch(self, config: VideoConfig, key: ConfigKey, n_subjects: int) -> RecognitionRecord:
        with self._lock:
            record = self._records.get(key)
            if record is not None:
                return record
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            record = self._records.get(key)
            if record is not None:
                return record
            record = self._inner.fetch(config, key, n_subjects)
            with self._lock:
                self._records[key] = record
            return record


# ---------------------------------------------------------------------------
# Wire protocol (model scorers)


def encode_frames_b64(frames) -> list[str]:
    """PNG-encode rendered frames as base64 strings (8-bit grayscale)."""
    from PIL import Image

    encoded = []
    for frame in frames:
        buf = io.BytesIO()
        Image.fromarray(frame.pixels, mode="L").save(buf, format="PNG")
        encoded.append(base64.b64encode(buf.getvalue()).decode("ascii"))
    return encoded


def decode_frame_b64(data: str):
    import numpy as np
    from PIL import Image

    raw = base64.b64decode(data.encode("ascii"), validate=True)
    with Image.open(io.BytesIO(raw)) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def score_request_doc(config_id: str, fps: int, frames_b64: list[str]) -> dict:
    return {"config_id": config_id, "fps": fps, "frames": list(frames_b64)}


def parse_score_response(doc: dict) -> tuple[str, float, str]:
    """Validate a /score response; returns (config_id, score, label)."""
    try:
        config_id = doc["config_id"]
        score = float(doc["score"])
        label = doc["label"]
    except (KeyError, TypeError, ValueError) as exc:
        raise OracleUnavailable(f"malformed score response: {exc}") from exc
    if not 0.0 <= score <= 1.0:
        raise OracleUnavailable(f"score {score} outside [0, 1]")
    return str(config_id), score, str(label)


class WireOracle:
    """Client for the model-scoring protocol: POST /score with PNG frames.

    The returned score in [0, 1] is converted to a pseudo-count so this
    oracle yields the same record shape as every other backend.
    """

    def __init__(
        self,
        client: httpx.Client,
        clips: dict[str, SourceClip],
        timeout: float = 30.0,
        retries: int = 2,
    ):
        self._client = client
        self._clips = clips
        self._timeout = timeout
        self._retries = retries
        self.labels: dict[ConfigKey, str] = {}
        # ranked label lists are stored when the scorer sends them, but
        # nothing downstream requires them
        self.top_labels: dict[ConfigKey, tuple[str, ...]] = {}

    def fetch(self, config: VideoConfig, key: ConfigKey, n_subjects: int) -> RecognitionRecord:
        from .core import render

        clip = self._clips.get(config.clip_id)
        if clip is None:
            raise OracleUnavailable(f"unknown clip {config.clip_id}")
        frames = render(config, clip)
        doc = score_request_doc(key.to_str(), config.fps, encode_frames_b64(frames))
        last_exc: Exception | None = None
        for _ in range(self._retries + 1):
            try:
                resp = self._client.post("/score", json=doc, timeout=self._timeout)
            except httpx.TimeoutException as exc:
                last_exc = OracleTimeout(str(exc))
                continue
            except httpx.HTTPError as exc:
                last_exc = OracleUnavailable(str(exc))
                continue
            if resp.status_code != 200:
                last_exc = OracleUnavailable(f"scorer returned HTTP {resp.status_code}")
                continue
            body = resp.json()
            config_id, score, label = parse_score_response(body)
            if config_id != key.to_str():
                raise OracleUnavailable("scorer echoed a different config_id")
            self.labels[key] = label
            ranked = body.get("top_labels")
            if isinstance(ranked, list):
                self.top_labels[key] = tuple(str(v) for v in ranked)
            n_correct = round_half_up(Fraction(score).limit_denominator(10**9) * n_subjects)
            return RecognitionRecord(config_key=key, n_subjects=n_subjects, n_correct=n_correct)
        assert last_exc is not None
        raise last_exc


class HumanServiceOracle:
    """Client for the human-study service.

    First query for a key enqueues the jobs and reports pending; once all
    subject responses arrive the service exposes the finished record.
    """

    def __init__(self, client: httpx.Client, admin_token: str, timeout: float = 30.0):
        self._client = client
        self._admin_token = admin_token
        self._timeout = timeout

    def fetch(self, config: VideoConfig, key: ConfigKey, n_subjects: int) -> RecognitionRecord:
        from .manifest import config_to_doc, record_from_doc

        key_str = key.to_str()
        try:
            resp = self._client.get(f"/configs/{key_str}/status", timeout=self._timeout)
        except httpx.TimeoutException as exc:
            raise OracleTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise OracleUnavailable(str(exc)) from exc
        if resp.status_code == 404:
            enqueue = {
                "kind": "recognition",
                "n_subjects": n_subjects,
                "configs": [config_to_doc(config)],
            }
            try:
                posted = self._client.post(
                    "/jobs",
                    json=enqueue,
                    headers={"X-Admin-Token": self._admin_token},
                    timeout=self._timeout,
                )
            except httpx.TimeoutException as exc:
                raise OracleTimeout(str(exc)) from exc
            except httpx.HTTPError as exc:
                raise OracleUnavailable(str(exc)) from exc
            if posted.status_code != 200:
                raise OracleUnavailable(f"enqueue failed: HTTP {posted.status_code}")
            raise OraclePending(f"jobs enqueued for {key_str}")
        if resp.status_code != 200:
            raise OracleUnavailable(f"status failed: HTTP {resp.status_code}")
        doc = resp.json()
        if doc.get("state") != "complete":
            raise OraclePending(f"responses still being collected for {key_str}")
        return record_from_doc(doc["record"])
