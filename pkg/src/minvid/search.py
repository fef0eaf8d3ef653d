"""Recursive reduction search.

Expands recognizable configurations, stops at unrecognizable ones, and
certifies a node as minimal when it is recognizable while every one-step
reduction is unrecognizable.  Nodes reachable from several parents are
deduplicated by canonical key, so the explored structure is a DAG and each
distinct stimulus costs one oracle query.

The loop is driven entirely by tree state: interrupting a run (oracle
outage, query budget) and resuming it replays the remaining work in the
same order, so a resumed search is indistinguishable from an uninterrupted
one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .core import ConfigKey, SHRINK, VideoConfig, canonical_key
from .oracle import (
    DEFAULT_N_SUBJECTS,
    OracleHandle,
    OraclePending,
    OracleTimeout,
    OracleUnavailable,
    RecognitionRecord,
    is_recognizable,
)
from .reduce import DEFAULT_MIN_SIDE, ReductionEdge, blocked_reductions, expand

PENDING = "pending"
RECOGNIZABLE = "recognizable"
UNRECOGNIZABLE = "unrecognizable"
MINIMAL = "minimal"

STATUSES = (PENDING, RECOGNIZABLE, UNRECOGNIZABLE, MINIMAL)

PersistFn = Callable[["SearchTree"], None]


class BudgetExhausted(RuntimeError):
    """Raised when the next query would exceed the distinct-key budget.

    The partial tree is attached and remains valid and resumable.
    """

    def __init__(self, tree: "SearchTree"):
        super().__init__("oracle budget exhausted")
        self.tree = tree


class CorruptState(RuntimeError):
    """A persisted tree violates a structural invariant, named in args."""


class NotMinimal(ValueError):
    pass


@dataclass(frozen=True)
class SearchParams:
    """Search knobs.  The recognition threshold itself is fixed: a node is
    recognizable only when strictly more than half the subjects are correct."""

    n_subjects: int = DEFAULT_N_SUBJECTS
    min_side: int = DEFAULT_MIN_SIDE
    max_depth: int | None = None
    oracle_budget: int | None = 500
    traversal: str = "bfs"

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        if self.min_side < 1:
            raise ValueError("min_side must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.oracle_budget is not None and self.oracle_budget < 1:
            raise ValueError("oracle_budget must be >= 1")
        if self.traversal not in ("bfs", "dfs"):
            raise ValueError("traversal must be 'bfs' or 'dfs'")

    @property
    def threshold(self) -> Fraction:
        return Fraction(1, 2)


@dataclass
class SearchNode:
    key: ConfigKey
    config: VideoConfig
    status: str = PENDING
    record: RecognitionRecord | None = None
    parent_edges: list[tuple[str, ReductionEdge]] = field(default_factory=list)
    expanded: bool = False
    child_keys: list[str] = field(default_factory=list)

    @property
    def key_str(self) -> str:
        return self.key.to_str()


@dataclass
class EdgeRecord:
    parent: str
    kind: str
    dropped_frame_index: int | None
    child: str | None  # None for floor-blocked reductions
    blocked: str | None = None


@dataclass
class AuditEntry:
    """One oracle call.  Sequence numbers, not timestamps, keep replays
    byte-identical."""

    seq: int
    key: str
    n_subjects: int
    n_correct: int


class SearchTree:
    """The explored reduction lattice with per-node status."""

    def __init__(self, root_config: VideoConfig, params: SearchParams):
        self.params = params
        root_key = canonical_key(root_config)
        self.root_key = root_key.to_str()
        self.nodes: dict[str, SearchNode] = {}
        self.edges: list[EdgeRecord] = []
        self.audit: list[AuditEntry] = []
        self.nodes[self.root_key] = SearchNode(key=root_key, config=root_config)

    # -- inspection ---------------------------------------------------------

    @property
    def root(self) -> SearchNode:
        return self.nodes[self.root_key]

    def depth(self, key: ConfigKey) -> int:
        """Reduction distance from the root; identical along every path."""
        root = self.root.config
        ratio = key.side / root.crop.side
        crop_steps = 0
        acc = Fraction(1)
        while acc != ratio:
            acc *= SHRINK
            crop_steps += 1
            if crop_steps > 10_000:
                raise CorruptState(f"side {key.side} unreachable from root")
        frame_drops = len(root.frame_indices) - len(key.frame_indices)
        if frame_drops < 0:
            raise CorruptState("node retains more frames than the root")
        return crop_steps + (key.scale_steps - root.scale_steps) + frame_drops

    def minimal_keys(self) -> list[str]:
        keys = [n.key for n in self.nodes.values() if n.status == MINIMAL]
        return [k.to_str() for k in sorted(keys)]

    def pending_keys(self) -> list[str]:
        keys = [n.key for n in self.nodes.values() if n.status == PENDING]
        return [k.to_str() for k in sorted(keys)]

    def queried_keys(self) -> list[str]:
        return [entry.key for entry in self.audit]

    def is_complete(self) -> bool:
        return not any(_unfinished(self, k) for k in self.nodes)

    def children(self, key_str: str) -> list[tuple[ReductionEdge, SearchNode]]:
        out = []
        for edge in self.edges:
            if edge.parent == key_str and edge.child is not None:
                out.append(
                    (
                        ReductionEdge(kind=edge.kind, dropped_frame_index=edge.dropped_frame_index),
                        self.nodes[edge.child],
                    )
                )
        return out

    # -- integrity ----------------------------------------------------------

    def integrity_error(self) -> str | None:
        """First violated invariant, or None if the tree is sound."""
        if self.root_key not in self.nodes:
            return "root node missing"
        for key_str, node in self.nodes.items():
            if node.status not in STATUSES:
                return f"{key_str}: unknown status {node.status!r}"
            if key_str != node.key.to_str():
                return f"{key_str}: node filed under the wrong key"
            if node.status == PENDING and node.record is not None:
                return f"{key_str}: pending node carries a record"
            if node.status in (RECOGNIZABLE, MINIMAL, UNRECOGNIZABLE) and node.record is None:
                return f"{key_str}: resolved node is missing its record"
            if node.record is not None:
                recognized = is_recognizable(node.record)
                if node.status in (RECOGNIZABLE, MINIMAL) and not recognized:
                    return f"{key_str}: status {node.status} contradicts its record"
                if node.status == UNRECOGNIZABLE and recognized:
                    return f"{key_str}: status unrecognizable contradicts its record"
            if node.status == UNRECOGNIZABLE and node.expanded:
                return f"{key_str}: search descended below an unrecognizable node"
            if node.status == MINIMAL:
                if not node.expanded:
                    return f"{key_str}: minimal node was never expanded"
                bad = [
                    c for c in node.child_keys if self.nodes[c].status != UNRECOGNIZABLE
                ]
                if bad:
                    return f"{key_str}: minimal node has non-unrecognizable child {bad[0]}"
            for child_key in node.child_keys:
                if child_key not in self.nodes:
                    return f"{key_str}: dangling child {child_key}"
        for edge in self.edges:
            if edge.parent not in self.nodes:
                return f"edge from unknown node {edge.parent}"
            if edge.child is not None and edge.child not in self.nodes:
                return f"edge to unknown node {edge.child}"
        for i, entry in enumerate(self.audit, start=1):
            if entry.seq != i:
                return f"audit sequence broken at position {i}"
            if entry.key not in self.nodes:
                return f"audit entry for unknown key {entry.key}"
        return None


# ---------------------------------------------------------------------------
# Drive loop


def _unfinished(tree: SearchTree, key_str: str) -> bool:
    node = tree.nodes[key_str]
    if node.status == PENDING:
        return True
    if node.status != RECOGNIZABLE:
        return False
    if tree.params.max_depth is not None and tree.depth(node.key) >= tree.params.max_depth:
        return False
    if not node.expanded:
        return True
    statuses = [tree.nodes[c].status for c in node.child_keys]
    if any(s == PENDING for s in statuses):
        return True
    # all children resolved: certification still owed?
    return all(s == UNRECOGNIZABLE for s in statuses)


def _query_node(
    tree: SearchTree, oracle: OracleHandle, node: SearchNode, persist: PersistFn
) -> bool:
    """Resolve one pending node.  Returns False when the answer is still
    being collected; unavailability aborts the pass with the tree intact."""
    budget = tree.params.oracle_budget
    if budget is not None and len(tree.audit) >= budget:
        persist(tree)
        raise BudgetExhausted(tree)
    try:
        record = oracle.fetch(node.config, node.key, tree.params.n_subjects)
    except OraclePending:
        return False
    except (OracleUnavailable, OracleTimeout):
        persist(tree)
        raise
    tree.audit.append(
        AuditEntry(
            seq=len(tree.audit) + 1,
            key=node.key_str,
            n_subjects=record.n_subjects,
            n_correct=record.n_correct,
        )
    )
    node.record = record
    node.status = RECOGNIZABLE if is_recognizable(record) else UNRECOGNIZABLE
    persist(tree)
    return True


def _expand_node(tree: SearchTree, node: SearchNode, persist: PersistFn) -> None:
    min_side = tree.params.min_side
    for edge in blocked_reductions(node.config, min_side):
        tree.edges.append(
            EdgeRecord(
                parent=node.key_str,
                kind=edge.kind,
                dropped_frame_index=edge.dropped_frame_index,
                child=None,
                blocked="floor",
            )
        )
    child_keys: list[str] = []
    for edge, child_config in expand(node.config, min_side):
        child_key = canonical_key(child_config)
        child_str = child_key.to_str()
        child = tree.nodes.get(child_str)
        if child is None:
            child = SearchNode(key=child_key, config=child_config)
            tree.nodes[child_str] = child
        child.parent_edges.append((node.key_str, edge))
        tree.edges.append(
            EdgeRecord(
                parent=node.key_str,
                kind=edge.kind,
                dropped_frame_index=edge.dropped_frame_index,
                child=child_str,
            )
        )
        child_keys.append(child_str)
    node.child_keys = child_keys
    node.expanded = True
    persist(tree)


def _drive(tree: SearchTree, oracle: OracleHandle, persist: PersistFn) -> None:
    dfs = tree.params.traversal == "dfs"
    work: deque[str] = deque(k for k in tree.nodes if _unfinished(tree, k))
    queued = set(work)
    while work:
        key_str = work.pop() if dfs else work.popleft()
        queued.discard(key_str)
        node = tree.nodes[key_str]
        if node.record is None:
            if not _query_node(tree, oracle, node, persist):
                continue  # answer pending; node keeps status pending
        if node.status != RECOGNIZABLE:
            continue
        if tree.params.max_depth is not None and tree.depth(node.key) >= tree.params.max_depth:
            continue
        if not node.expanded:
            _expand_node(tree, node, persist)
        all_unrecognizable = True
        followups: list[str] = []
        for child_str in node.child_keys:
            child = tree.nodes[child_str]
            if child.record is None:
                if not _query_node(tree, oracle, child, persist):
                    all_unrecognizable = False
                    continue
            if child.status != UNRECOGNIZABLE:
                all_unrecognizable = False
                if child_str not in queued and _unfinished(tree, child_str):
                    followups.append(child_str)
        for child_str in followups:
            work.append(child_str)
            queued.add(child_str)
        if all_unrecognizable and node.status == RECOGNIZABLE:
            node.status = MINIMAL
            persist(tree)


def _noop_persist(tree: SearchTree) -> None:
    return None


def run_search(
    root: VideoConfig,
    oracle: OracleHandle,
    params: SearchParams | None = None,
    persist: PersistFn | None = None,
) -> SearchTree:
    """Search the reduction lattice below ``root``.

    Raises BudgetExhausted (partial tree attached) when the distinct-key
    budget runs out, and propagates oracle unavailability after persisting;
    both leave a valid, resumable tree.
    """
    tree = SearchTree(root, params or SearchParams())
    _drive(tree, oracle, persist or _noop_persist)
    return tree


def resume(
    tree: SearchTree, oracle: OracleHandle, persist: PersistFn | None = None
) -> SearchTree:
    """Continue a persisted search.  Completed node statuses never change."""
    problem = tree.integrity_error()
    if problem is not None:
        raise CorruptState(problem)
    _drive(tree, oracle, persist or _noop_persist)
    return tree


def minimal_set(tree: SearchTree) -> list[VideoConfig]:
    """Certified minimal configurations, in deterministic key order."""
    return [tree.nodes[k].config for k in tree.minimal_keys()]


def sub_minimal_set(
    tree: SearchTree, minimal_key: ConfigKey
) -> tuple[list[VideoConfig], list[VideoConfig]]:
    """Children of a minimal node, split into (spatial, temporal)."""
    key_str = minimal_key.to_str()
    node = tree.nodes.get(key_str)
    if node is None or node.status != MINIMAL:
        raise NotMinimal(f"{key_str} is not a certified minimal configuration")
    spatial: list[VideoConfig] = []
    temporal: list[VideoConfig] = []
    for edge, child in tree.children(key_str):
        if edge.is_spatial:
            spatial.append(child.config)
        else:
            temporal.append(child.config)
    return spatial, temporal
