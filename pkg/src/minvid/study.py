"""Recognition and probe trials served to human subjects.

Job-state transitions are atomic, and assignment enforces the exclusion
rule: a subject is never given two jobs whose configurations share an
action category.  When the last of a configuration's subject responses
arrives, exactly one RecognitionRecord is emitted to registered listeners.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import ConfigKey, FrameGrid, SourceClip, VideoConfig, canonical_key, render
from .evaluate import population_stats
from .oracle import (
    AnswerKey,
    RecognitionRecord,
    TrialResponse,
    match_description,
    term_stems,
    text_stems,
)

DEFAULT_ASSIGNMENT_TIMEOUT = 600.0  # seconds

RECOGNITION = "recognition"
PROBE = "probe"

OPEN = "open"
ASSIGNED = "assigned"
COMPLETED = "completed"


class UnknownJob(KeyError):
    pass


class NotAssigned(RuntimeError):
    pass


class DeadlineExpired(RuntimeError):
    pass


class DuplicateSubmission(RuntimeError):
    pass


class Incomplete(RuntimeError):
    pass


@dataclass
class Subject:
    subject_id: str
    seen_action_types: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class Probe:
    """A marked point inside a stimulus frame, with its accepted labels."""

    frame_position: int
    x: int
    y: int
    component_key: tuple[str, ...]
    component_name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "component_key", tuple(self.component_key))
        if not self.component_key:
            raise ValueError("component_key must be nonempty")
        if self.frame_position < 0 or self.x < 0 or self.y < 0:
            raise ValueError("probe position must be non-negative")


@dataclass(frozen=True)
class ProbeResponse:
    subject_id: str
    job_id: str
    free_text: str
    correct: bool
    timestamp: float | None = None
    manual_override: bool | None = None

    @property
    def effective_correct(self) -> bool:
        return self.correct if self.manual_override is None else self.manual_override


def match_component(free_text: str, probe: Probe) -> bool:
    stems = text_stems(free_text)
    return any(term_stems(term) <= stems for term in probe.component_key if term.strip())


@dataclass
class LabelJob:
    job_id: str
    config_key: ConfigKey
    category: str
    kind: str  # recognition | probe
    probe: Probe | None = None
    state: str = OPEN
    assigned_to: str | None = None
    deadline: float | None = None
    response: TrialResponse | ProbeResponse | None = None


@dataclass(frozen=True)
class ComponentStat:
    component_name: str
    n_subjects: int
    n_correct: int
    recognized: bool

    @property
    def rate(self) -> Fraction:
        return Fraction(self.n_correct, self.n_subjects)


@dataclass(frozen=True)
class ComponentReport:
    config_key: str
    components: tuple[ComponentStat, ...]
    mean_rate: float
    sd_rate: float


def component_stats(rates: list[Fraction]) -> tuple[float, float]:
    """Aggregate mean and population SD over per-component rates."""
    return population_stats(rates)


def _job_id(key: ConfigKey, kind: str, discriminator: str, sequence: int) -> str:
    """Deterministic job id; ``sequence`` is the store-wide creation index."""
    h = hashlib.sha256(f"{key.to_str()}|{kind}|{discriminator}".encode()).hexdigest()[:12]
    return f"job-{h}-{sequence:04d}"


def burn_probe_marker(frames: list[FrameGrid], probe: Probe) -> list[np.ndarray]:
    """Presentation copies with a 1-pixel-radius marker on the probed frame.

    Marker intensity contrasts with the local neighborhood; stored stimulus
    data is never touched.
    """
    copies = [f.pixels.copy() for f in frames]
    target = copies[probe.frame_position]
    side = target.shape[0]
    spots = [(probe.x, probe.y), (probe.x - 1, probe.y), (probe.x + 1, probe.y),
             (probe.x, probe.y - 1), (probe.x, probe.y + 1)]
    neighborhood = target[
        max(0, probe.y - 1) : probe.y + 2, max(0, probe.x - 1) : probe.x + 2
    ]
    value = 255 if neighborhood.mean() < 128 else 0
    for x, y in spots:
        if 0 <= x < side and 0 <= y < side:
            target[y, x] = value
    return copies


class StudyStore:
    """In-memory job queue, subject registry, and record emitter."""

    def __init__(
        self,
        clips: dict[str, SourceClip] | None = None,
        answer_keys: dict[str, AnswerKey] | None = None,
        clock: Callable[[], float] = time.time,
        assignment_timeout: float = DEFAULT_ASSIGNMENT_TIMEOUT,
    ):
        self._lock = threading.RLock()
        self._clock = clock
        self._timeout = assignment_timeout
        self.clips = dict(clips or {})
        self.answer_keys = dict(answer_keys or {})
        self.jobs: dict[str, LabelJob] = {}
        self.job_order: list[str] = []
        self.subjects: dict[str, Subject] = {}
        self.configs: dict[str, VideoConfig] = {}
        self.rendered: dict[str, list[FrameGrid]] = {}
        self.expected: dict[tuple[str, str], int] = {}  # (key, kind) -> n jobs
        self.records: dict[str, RecognitionRecord] = {}
        self.on_record: list[Callable[[RecognitionRecord], None]] = []

    # -- registration -------------------------------------------------------

    def add_clip(self, clip: SourceClip, answer_key: AnswerKey) -> None:
        with self._lock:
            self.clips[clip.clip_id] = clip
            self.answer_keys[answer_key.key_id] = answer_key

    def _category(self, config: VideoConfig) -> str:
        clip = self.clips.get(config.clip_id)
        if clip is None:
            raise KeyError(f"unknown clip {config.clip_id!r}")
        return clip.action_category

    def _register_config(self, config: VideoConfig) -> tuple[str, list[FrameGrid]]:
        key_str = canonical_key(config).to_str()
        if key_str not in self.rendered:
            clip = self.clips[config.clip_id]
            self.rendered[key_str] = render(config, clip)  # RenderFailure propagates
        self.configs[key_str] = config
        return key_str, self.rendered[key_str]

    # -- enqueue ------------------------------------------------------------

    def enqueue_recognition(self, configs: list[VideoConfig], n_subjects: int) -> list[str]:
        """Open n_subjects distinct recognition jobs per configuration."""
        if n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        created: list[str] = []
        with self._lock:
            for config in configs:
                key_str, _ = self._register_config(config)
                category = self._category(config)
                existing = self.expected.get((key_str, RECOGNITION), 0)
                for _ in range(n_subjects):
                    job = LabelJob(
                        job_id=_job_id(
                            canonical_key(config), RECOGNITION, "r", len(self.job_order)
                        ),
                        config_key=canonical_key(config),
                        category=category,
                        kind=RECOGNITION,
                    )
                    self.jobs[job.job_id] = job
                    self.job_order.append(job.job_id)
                    created.append(job.job_id)
                self.expected[(key_str, RECOGNITION)] = existing + n_subjects
        return created

    def enqueue_probes(
        self, config: VideoConfig, probes: list[Probe], n_subjects: int
    ) -> list[str]:
        """Open n_subjects probe jobs per probe point."""
        if n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        created: list[str] = []
        with self._lock:
            key_str, frames = self._register_config(config)
            side = frames[0].side
            for probe in probes:
                if probe.frame_position >= len(frames):
                    raise ValueError("probe frame_position outside retained frames")
                if probe.x >= side or probe.y >= side:
                    raise ValueError("probe point outside rendered frame bounds")
            category = self._category(config)
            for probe in probes:
                existing = self.expected.get((key_str, PROBE), 0)
                for _ in range(n_subjects):
                    job = LabelJob(
                        job_id=_job_id(
                            canonical_key(config),
                            PROBE,
                            probe.component_name,
                            len(self.job_order),
                        ),
                        config_key=canonical_key(config),
                        category=category,
                        kind=PROBE,
                        probe=probe,
                    )
                    self.jobs[job.job_id] = job
                    self.job_order.append(job.job_id)
                    created.append(job.job_id)
                self.expected[(key_str, PROBE)] = existing + n_subjects
        return created

    # -- assignment ---------------------------------------------------------

    def _sweep_expired(self) -> None:
        now = self._clock()
        for job in self.jobs.values():
            if job.state == ASSIGNED and job.deadline is not None and now > job.deadline:
                job.state = OPEN
                job.assigned_to = None
                job.deadline = None
                # the original subject saw the stimulus; their category
                # exclusion stays in force

    def next_job(self, subject_id: str) -> LabelJob | None:
        """Assign the first open job whose category the subject has not seen.

        The assignment and the seen-category update happen in one atomic
        step, so a subject cannot race itself into two same-category jobs.
        """
        with self._lock:
            self._sweep_expired()
            subject = self.subjects.setdefault(subject_id, Subject(subject_id=subject_id))
            for job_id in self.job_order:
                job = self.jobs[job_id]
                if job.state != OPEN:
                    continue
                if job.category in subject.seen_action_types:
                    continue
                job.state = ASSIGNED
                job.assigned_to = subject_id
                job.deadline = self._clock() + self._timeout
                subject.seen_action_types.add(job.category)
                return job
            return None

    # -- submission ---------------------------------------------------------

    def submit_response(
        self, job_id: str, subject_id: str, free_text: str
    ) -> TrialResponse | ProbeResponse:
        with self._lock:
            job = self.jobs.get(job_id)
            if job is None:
                raise UnknownJob(job_id)
            if job.state == COMPLETED:
                if job.response is not None and job.response.subject_id == subject_id:
                    raise DuplicateSubmission(f"job {job_id} already has a response")
                raise NotAssigned(f"job {job_id} is already completed")
            if job.state != ASSIGNED or job.assigned_to != subject_id:
                raise NotAssigned(f"job {job_id} is not assigned to {subject_id}")
            if job.deadline is not None and self._clock() > job.deadline:
                job.state = OPEN
                job.assigned_to = None
                job.deadline = None
                raise DeadlineExpired(f"job {job_id} deadline passed; job reopened")
            now = self._clock()
            if job.kind == RECOGNITION:
                clip = self.clips[self.configs[job.config_key.to_str()].clip_id]
                answer_key = self.answer_keys[clip.answer_key_id]
                response: TrialResponse | ProbeResponse = TrialResponse(
                    subject_id=subject_id,
                    config_key=job.config_key,
                    free_text=free_text,
                    correct=match_description(free_text, answer_key),
                    timestamp=now,
                )
            else:
                assert job.probe is not None
                response = ProbeResponse(
                    subject_id=subject_id,
                    job_id=job_id,
                    free_text=free_text,
                    correct=match_component(free_text, job.probe),
                    timestamp=now,
                )
            job.response = response
            job.state = COMPLETED
            job.assigned_to = subject_id
            if job.kind == RECOGNITION:
                self._maybe_emit_record(job.config_key)
            return response

    def _recognition_jobs(self, key_str: str) -> list[LabelJob]:
        return [
            self.jobs[j]
            for j in self.job_order
            if self.jobs[j].kind == RECOGNITION and self.jobs[j].config_key.to_str() == key_str
        ]

    def override_response(self, job_id: str, correct: bool) -> None:
        """Manually adjudicate an ambiguous response.

        Recognition overrides must land before the configuration's record
        is emitted; probe overrides are always allowed (component reports
        are computed on demand).
        """
        from dataclasses import replace

        with self._lock:
            job = self.jobs.get(job_id)
            if job is None:
                raise UnknownJob(job_id)
            if job.state != COMPLETED or job.response is None:
                raise NotAssigned(f"job {job_id} has no response to adjudicate")
            if job.kind == RECOGNITION and job.config_key.to_str() in self.records:
                raise DuplicateSubmission(
                    f"record for {job.config_key.to_str()} already emitted"
                )
            job.response = replace(job.response, manual_override=correct)

    def _maybe_emit_record(self, config_key: ConfigKey) -> None:
        key_str = config_key.to_str()
        if key_str in self.records:
            return
        expected = self.expected.get((key_str, RECOGNITION), 0)
        jobs = self._recognition_jobs(key_str)
        completed = [j for j in jobs if j.state == COMPLETED]
        if expected == 0 or len(completed) < expected:
            return
        n_correct = sum(
            1 for j in completed if j.response is not None and j.response.effective_correct
        )
        record = RecognitionRecord(
            config_key=config_key, n_subjects=len(completed), n_correct=n_correct
        )
        self.records[key_str] = record
        for listener in self.on_record:
            listener(record)

    # -- reporting ----------------------------------------------------------

    def config_status(self, key_str: str) -> dict:
        with self._lock:
            if key_str in self.records:
                record = self.records[key_str]
                return {
                    "config_key": key_str,
                    "state": "complete",
                    "record": {
                        "config_key": key_str,
                        "n_subjects": record.n_subjects,
                        "n_correct": record.n_correct,
                    },
                }
            if (key_str, RECOGNITION) in self.expected or (key_str, PROBE) in self.expected:
                return {"config_key": key_str, "state": "pending", "record": None}
            raise KeyError(key_str)

    def component_recognition(self, key_str: str) -> ComponentReport:
        """Per-component recognition rates once all probe jobs completed."""
        with self._lock:
            probe_jobs = [
                self.jobs[j]
                for j in self.job_order
                if self.jobs[j].kind == PROBE and self.jobs[j].config_key.to_str() == key_str
            ]
            if not probe_jobs:
                raise Incomplete(f"no probe jobs for {key_str}")
            if any(j.state != COMPLETED for j in probe_jobs):
                raise Incomplete(f"probe jobs for {key_str} are still open")
            by_component: dict[str, list[LabelJob]] = {}
            for job in probe_jobs:
                assert job.probe is not None
                by_component.setdefault(job.probe.component_name, []).append(job)
            stats = []
            for name in sorted(by_component):
                jobs = by_component[name]
                n_correct = sum(
                    1 for j in jobs if j.response is not None and j.response.effective_correct
                )
                rate = Fraction(n_correct, len(jobs))
                stats.append(
                    ComponentStat(
                        component_name=name,
                        n_subjects=len(jobs),
                        n_correct=n_correct,
                        recognized=rate > Fraction(1, 2),
                    )
                )
            mean, sd = component_stats([s.rate for s in stats])
            return ComponentReport(
                config_key=key_str, components=tuple(stats), mean_rate=mean, sd_rate=sd
            )

    def job_counts(self) -> dict[str, int]:
        with self._lock:
            counts = {OPEN: 0, ASSIGNED: 0, COMPLETED: 0}
            for job in self.jobs.values():
                counts[job.state] += 1
            counts["total"] = len(self.jobs)
            return counts
