"""Persistence formats.

One manifest document is the single source of truth for a search session:
clip metadata (pixels live in content-addressed PNG files next to it),
answer keys, recognition records, model scores, and the serialized search
tree.  Everything round-trips losslessly; rationals are stored as integer
numerator/denominator pairs, never floats.  Writes are atomic.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .core import ConfigKey, CropRect, VideoConfig
from .oracle import AnswerKey, RecognitionRecord
from .reduce import ReductionEdge
from .search import AuditEntry, EdgeRecord, SearchNode, SearchParams, SearchTree

SCHEMA_VERSION = 1


class ManifestError(ValueError):
    pass


def canonical_json_bytes(doc) -> bytes:
    """Stable human-readable encoding: sorted keys, two-space indent."""
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=True) + "\n").encode("ascii")


def atomic_write(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Field codecs


def frac_to_pair(f: Fraction) -> list[int]:
    return [f.numerator, f.denominator]


def frac_from_pair(pair) -> Fraction:
    num, den = pair
    return Fraction(int(num), int(den))


def config_to_doc(config: VideoConfig) -> dict:
    return {
        "clip_id": config.clip_id,
        "roi_side": config.roi_side,
        "frame_indices": list(config.frame_indices),
        "crop": {
            "x": frac_to_pair(config.crop.x),
            "y": frac_to_pair(config.crop.y),
            "side": frac_to_pair(config.crop.side),
        },
        "scale_steps": config.scale_steps,
        "fps": config.fps,
    }


def config_from_doc(doc: dict) -> VideoConfig:
    crop = doc["crop"]
    return VideoConfig(
        clip_id=doc["clip_id"],
        roi_side=int(doc["roi_side"]),
        frame_indices=tuple(int(i) for i in doc["frame_indices"]),
        crop=CropRect(
            frac_from_pair(crop["x"]), frac_from_pair(crop["y"]), frac_from_pair(crop["side"])
        ),
        scale_steps=int(doc["scale_steps"]),
        fps=int(doc["fps"]),
    )


def record_to_doc(record: RecognitionRecord) -> dict:
    return {
        "config_key": record.config_key.to_str(),
        "n_subjects": record.n_subjects,
        "n_correct": record.n_correct,
    }


def record_from_doc(doc: dict) -> RecognitionRecord:
    return RecognitionRecord(
        config_key=ConfigKey.from_str(doc["config_key"]),
        n_subjects=int(doc["n_subjects"]),
        n_correct=int(doc["n_correct"]),
    )


def answer_key_to_doc(key: AnswerKey) -> dict:
    return {
        "key_id": key.key_id,
        "category": key.category,
        "object_terms": list(key.object_terms),
        "action_terms": list(key.action_terms),
    }


def answer_key_from_doc(doc: dict) -> AnswerKey:
    return AnswerKey(
        key_id=doc["key_id"],
        category=doc["category"],
        object_terms=tuple(doc["object_terms"]),
        action_terms=tuple(doc["action_terms"]),
    )


def _edge_to_doc(edge: EdgeRecord) -> dict:
    return {
        "parent": edge.parent,
        "kind": edge.kind,
        "dropped_frame_index": edge.dropped_frame_index,
        "child": edge.child,
        "blocked": edge.blocked,
    }


def _edge_from_doc(doc: dict) -> EdgeRecord:
    return EdgeRecord(
        parent=doc["parent"],
        kind=doc["kind"],
        dropped_frame_index=doc["dropped_frame_index"],
        child=doc["child"],
        blocked=doc.get("blocked"),
    )


def _reduction_edge_to_doc(edge: ReductionEdge) -> dict:
    return {"kind": edge.kind, "dropped_frame_index": edge.dropped_frame_index}


def _reduction_edge_from_doc(doc: dict) -> ReductionEdge:
    return ReductionEdge(kind=doc["kind"], dropped_frame_index=doc["dropped_frame_index"])


def _node_to_doc(node: SearchNode) -> dict:
    record = None
    if node.record is not None:
        record = {"n_subjects": node.record.n_subjects, "n_correct": node.record.n_correct}
    return {
        "key": node.key.to_str(),
        "config": config_to_doc(node.config),
        "status": node.status,
        "record": record,
        "expanded": node.expanded,
        "child_keys": list(node.child_keys),
        "parent_edges": [
            {"parent": parent, "edge": _reduction_edge_to_doc(edge)}
            for parent, edge in node.parent_edges
        ],
    }


def _node_from_doc(doc: dict) -> SearchNode:
    key = ConfigKey.from_str(doc["key"])
    record = None
    if doc["record"] is not None:
        record = RecognitionRecord(
            config_key=key,
            n_subjects=int(doc["record"]["n_subjects"]),
            n_correct=int(doc["record"]["n_correct"]),
        )
    return SearchNode(
        key=key,
        config=config_from_doc(doc["config"]),
        status=doc["status"],
        record=record,
        expanded=bool(doc["expanded"]),
        child_keys=list(doc["child_keys"]),
        parent_edges=[
            (pe["parent"], _reduction_edge_from_doc(pe["edge"])) for pe in doc["parent_edges"]
        ],
    )


def params_to_doc(params: SearchParams) -> dict:
    return {
        "n_subjects": params.n_subjects,
        "min_side": params.min_side,
        "max_depth": params.max_depth,
        "oracle_budget": params.oracle_budget,
        "traversal": params.traversal,
    }


def params_from_doc(doc: dict) -> SearchParams:
    return SearchParams(
        n_subjects=int(doc["n_subjects"]),
        min_side=int(doc["min_side"]),
        max_depth=None if doc["max_depth"] is None else int(doc["max_depth"]),
        oracle_budget=None if doc["oracle_budget"] is None else int(doc["oracle_budget"]),
        traversal=doc["traversal"],
    )


def tree_to_doc(tree: SearchTree) -> dict:
    return {
        "root_key": tree.root_key,
        "params": params_to_doc(tree.params),
        # node order is discovery order; replaying it keeps resumption exact
        "nodes": [_node_to_doc(n) for n in tree.nodes.values()],
        "edges": [_edge_to_doc(e) for e in tree.edges],
        "audit": [
            {"seq": a.seq, "key": a.key, "n_subjects": a.n_subjects, "n_correct": a.n_correct}
            for a in tree.audit
        ],
    }


def tree_from_doc(doc: dict) -> SearchTree:
    nodes = [_node_from_doc(nd) for nd in doc["nodes"]]
    by_key = {n.key.to_str(): n for n in nodes}
    root_key = doc["root_key"]
    if root_key not in by_key:
        raise ManifestError("tree document has no root node")
    tree = SearchTree(by_key[root_key].config, params_from_doc(doc["params"]))
    tree.nodes = {n.key.to_str(): n for n in nodes}
    tree.edges = [_edge_from_doc(e) for e in doc["edges"]]
    tree.audit = [
        AuditEntry(
            seq=int(a["seq"]),
            key=a["key"],
            n_subjects=int(a["n_subjects"]),
            n_correct=int(a["n_correct"]),
        )
        for a in doc["audit"]
    ]
    return tree


# ---------------------------------------------------------------------------
# Manifest


@dataclass(frozen=True)
class ClipEntry:
    """Clip metadata; pixel data lives in referenced frame files."""

    clip_id: str
    action_category: str
    answer_key_id: str
    frame_side: int
    frame_refs: tuple[str, ...]


def clip_entry_to_doc(entry: ClipEntry) -> dict:
    return {
        "clip_id": entry.clip_id,
        "action_category": entry.action_category,
        "answer_key_id": entry.answer_key_id,
        "frame_side": entry.frame_side,
        "frame_refs": list(entry.frame_refs),
    }


def clip_entry_from_doc(doc: dict) -> ClipEntry:
    return ClipEntry(
        clip_id=doc["clip_id"],
        action_category=doc["action_category"],
        answer_key_id=doc["answer_key_id"],
        frame_side=int(doc["frame_side"]),
        frame_refs=tuple(doc["frame_refs"]),
    )


@dataclass(frozen=True)
class ScoreEntry:
    """(configuration, label, model score) for evaluation runs."""

    config_key: str
    label: str  # "positive" | "negative"
    model_score: float
    human_rate: Fraction | None = None

    def __post_init__(self) -> None:
        if self.label not in ("positive", "negative"):
            raise ValueError("label must be 'positive' or 'negative'")
        if not 0.0 <= self.model_score <= 1.0:
            raise ValueError("model_score must lie in [0, 1]")


def score_entry_to_doc(entry: ScoreEntry) -> dict:
    return {
        "config_key": entry.config_key,
        "label": entry.label,
        "model_score": entry.model_score,
        "human_rate": None if entry.human_rate is None else frac_to_pair(entry.human_rate),
    }


def score_entry_from_doc(doc: dict) -> ScoreEntry:
    rate = doc.get("human_rate")
    return ScoreEntry(
        config_key=doc["config_key"],
        label=doc["label"],
        model_score=float(doc["model_score"]),
        human_rate=None if rate is None else frac_from_pair(rate),
    )


@dataclass
class Manifest:
    clips: list[ClipEntry] = field(default_factory=list)
    answer_keys: list[AnswerKey] = field(default_factory=list)
    records: list[RecognitionRecord] = field(default_factory=list)
    scores: list[ScoreEntry] = field(default_factory=list)
    tree: SearchTree | None = None

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "clips": [clip_entry_to_doc(c) for c in self.clips],
            "answer_keys": [answer_key_to_doc(k) for k in self.answer_keys],
            "records": [record_to_doc(r) for r in self.records],
            "scores": [score_entry_to_doc(s) for s in self.scores],
            "tree": None if self.tree is None else tree_to_doc(self.tree),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Manifest":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ManifestError(f"unsupported manifest schema version {version!r}")
        return cls(
            clips=[clip_entry_from_doc(c) for c in doc["clips"]],
            answer_keys=[answer_key_from_doc(k) for k in doc["answer_keys"]],
            records=[record_from_doc(r) for r in doc["records"]],
            scores=[score_entry_from_doc(s) for s in doc["scores"]],
            tree=None if doc["tree"] is None else tree_from_doc(doc["tree"]),
        )

    def to_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_doc())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Manifest":
        return cls.from_doc(json.loads(data.decode("ascii")))

    def save(self, path: str | Path) -> None:
        atomic_write(path, self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        return cls.from_bytes(Path(path).read_bytes())

    def clip_entry(self, clip_id: str) -> ClipEntry:
        for entry in self.clips:
            if entry.clip_id == clip_id:
                return entry
        raise ManifestError(f"unknown clip {clip_id!r}")

    def answer_key(self, key_id: str) -> AnswerKey:
        for key in self.answer_keys:
            if key.key_id == key_id:
                return key
        raise ManifestError(f"unknown answer key {key_id!r}")
