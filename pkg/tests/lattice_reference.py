"""Independent brute-force reference for the reduction search.

Enumerates the entire deduplicated lattice below a root, queries the
oracle for every node independently, and applies the minimality definition
directly: a node is minimal when it is recognizable, reachable from the
root through recognizable ancestors (the recursive procedure never
descends below an unrecognizable node), its children are materialized
(i.e. it lies above any depth limit), and every child is unrecognizable.

For monotone oracles the reachability clause is vacuous, and the raw
definition gives the same set.
"""

from __future__ import annotations

from collections import deque

from minvid.core import VideoConfig, canonical_key
from minvid.oracle import OracleHandle, is_recognizable
from minvid.reduce import expand


def enumerate_lattice(
    root: VideoConfig, min_side: int, max_depth: int | None
) -> tuple[dict[str, VideoConfig], dict[str, list[str] | None], dict[str, int]]:
    """(configs by key, children by key or None if unexpanded, depths)."""
    root_key = canonical_key(root).to_str()
    configs: dict[str, VideoConfig] = {root_key: root}
    children: dict[str, list[str] | None] = {}
    depths: dict[str, int] = {root_key: 0}
    queue = deque([root_key])
    while queue:
        key = queue.popleft()
        if key in children:
            continue
        depth = depths[key]
        if max_depth is not None and depth >= max_depth:
            children[key] = None  # truncated: children unknown
            continue
        child_keys = []
        for _, child in expand(configs[key], min_side):
            child_key = canonical_key(child).to_str()
            if child_key not in configs:
                configs[child_key] = child
                depths[child_key] = depth + 1
                queue.append(child_key)
            child_keys.append(child_key)
        children[key] = child_keys
    return configs, children, depths


def brute_force_minimal(
    root: VideoConfig,
    oracle: OracleHandle,
    n_subjects: int,
    min_side: int,
    max_depth: int | None,
    require_reachable: bool = True,
) -> list[str]:
    """Minimal keys by definition, via exhaustive independent queries."""
    configs, children, _ = enumerate_lattice(root, min_side, max_depth)
    recognizable: dict[str, bool] = {}
    for key in configs:
        record = oracle.fetch(configs[key], canonical_key(configs[key]), n_subjects)
        recognizable[key] = is_recognizable(record)

    root_key = canonical_key(root).to_str()
    if require_reachable:
        reachable = set()
        if recognizable[root_key]:
            queue = deque([root_key])
            reachable.add(root_key)
            while queue:
                key = queue.popleft()
                for child in children[key] or []:
                    if recognizable[child] and child not in reachable:
                        reachable.add(child)
                        queue.append(child)
    else:
        reachable = {k for k in configs if recognizable[k]}

    minimal = [
        key
        for key in configs
        if recognizable[key]
        and key in reachable
        and children[key] is not None
        and all(not recognizable[c] for c in children[key])
    ]
    return sorted(minimal, key=lambda k: canonical_key(configs[k]))


def lattice_size(root: VideoConfig, min_side: int, max_depth: int | None) -> int:
    configs, _, _ = enumerate_lattice(root, min_side, max_depth)
    return len(configs)


# ---------------------------------------------------------------------------
# Randomized synthetic-oracle families


def monotone_rate_fn(seed: int):
    """Random recognizability thresholds, monotone under every reduction:
    each condition only gets harder as size, resolution, or frames shrink."""
    import random
    from fractions import Fraction

    rng = random.Random(seed)
    side_cut = rng.choice([4, 5, 6, 8, 10, 12])
    frames_needed = rng.choice([1, 1, 2, 2, 3])
    max_scale_steps = rng.choice([0, 1, 2, 3, 4])
    hi = rng.choice([Fraction(3, 5), Fraction(4, 5), Fraction(1)])
    lo = rng.choice([Fraction(0), Fraction(1, 5), Fraction(2, 5), Fraction(1, 2)])

    def rate(key, config):
        ok = (
            config.rendered_side >= side_cut
            and config.frame_count >= frames_needed
            and config.scale_steps <= max_scale_steps
        )
        return hi if ok else lo

    return rate


def hashed_rate_fn(seed: int):
    """Arbitrary deterministic per-key rates (not monotone)."""
    import random
    from fractions import Fraction

    def rate(key, config):
        return Fraction(random.Random(f"{seed}|{key.to_str()}").randrange(0, 31), 30)

    return rate
