"""Minimal recognizable video configurations: search, study, evaluation.

The pipeline starts from a small source clip, repeatedly applies 20%
spatial reductions (corner crops, resolution) and single-frame removals,
asks an oracle whether each version is still recognizable, and certifies
configurations that are recognizable while every one-step reduction is
not.  Oracles can be deterministic synthetic functions, an external model
scorer behind the wire protocol, or pools of human subjects behind the
study service.
"""

from .core import (
    ConfigKey,
    CropRect,
    FrameGrid,
    RenderFailure,
    SourceClip,
    VideoConfig,
    canonical_key,
    make_root,
    render,
    round_half_up,
)
from .oracle import (
    AnswerKey,
    CachedOracle,
    HumanServiceOracle,
    OraclePending,
    OracleTimeout,
    OracleUnavailable,
    RecognitionRecord,
    SyntheticOracle,
    TrialResponse,
    WireOracle,
    is_recognizable,
    match_description,
    query,
    recognition_rate,
)
from .reduce import (
    FloorReached,
    LastFrame,
    ReductionEdge,
    crop_corner,
    drop_frame,
    expand,
    reduce_resolution,
)
from .search import (
    BudgetExhausted,
    CorruptState,
    NotMinimal,
    SearchParams,
    SearchTree,
    minimal_set,
    resume,
    run_search,
    sub_minimal_set,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerKey",
    "BudgetExhausted",
    "CachedOracle",
    "ConfigKey",
    "CorruptState",
    "CropRect",
    "FloorReached",
    "FrameGrid",
    "HumanServiceOracle",
    "LastFrame",
    "NotMinimal",
    "OraclePending",
    "OracleTimeout",
    "OracleUnavailable",
    "RecognitionRecord",
    "ReductionEdge",
    "RenderFailure",
    "SearchParams",
    "SearchTree",
    "SourceClip",
    "SyntheticOracle",
    "TrialResponse",
    "VideoConfig",
    "WireOracle",
    "canonical_key",
    "crop_corner",
    "drop_frame",
    "expand",
    "is_recognizable",
    "make_root",
    "match_description",
    "minimal_set",
    "query",
    "recognition_rate",
    "reduce_resolution",
    "render",
    "resume",
    "round_half_up",
    "run_search",
    "sub_minimal_set",
    "__version__",
]
