"""One-step reductions of a configuration.

Each configuration expands into at most 4 corner crops, one resolution
step, and one frame removal per retained frame.  Crops keep 4/5 of the
current side and are anchored at a corner; the resolution step increments
the scale exponent.  Children below the rendered-size floor are omitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import SHRINK, ConfigKey, CropRect, VideoConfig, canonical_key, round_half_up

CORNERS = ("TL", "TR", "BL", "BR")
SPATIAL_KINDS = ("crop_TL", "crop_TR", "crop_BL", "crop_BR", "resolution")
DEFAULT_MIN_SIDE = 4


class FloorReached(ValueError):
    """The reduction would fall below the minimum rendered side."""


class LastFrame(ValueError):
    """A single retained frame cannot be reduced temporally."""


@dataclass(frozen=True)
class ReductionEdge:
    """Identifies one reduction step; determines the child key given a parent."""

    kind: str  # crop_TL | crop_TR | crop_BL | crop_BR | resolution | drop_frame
    dropped_frame_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in SPATIAL_KINDS and self.kind != "drop_frame":
            raise ValueError(f"unknown reduction kind {self.kind!r}")
        if (self.kind == "drop_frame") != (self.dropped_frame_index is not None):
            raise ValueError("dropped_frame_index is set exactly for drop_frame edges")

    @property
    def is_spatial(self) -> bool:
        return self.kind in SPATIAL_KINDS

    @property
    def is_temporal(self) -> bool:
        return self.kind == "drop_frame"


def spatial_child_rendered_side(config: VideoConfig) -> int:
    """Rendered side every spatial child of this configuration would have.

    Corner crops shrink the rational crop side by 4/5; the resolution step
    increments the exponent instead.  Either way the exact output side is
    the parent's effective side times 4/5, rounded half-up.
    """
    return round_half_up(config.effective_side * SHRINK)


def _spatial_allowed(config: VideoConfig, min_side: int) -> bool:
    return spatial_child_rendered_side(config) >= min_side


def crop_corner(config: VideoConfig, corner: str, min_side: int = DEFAULT_MIN_SIDE) -> VideoConfig:
    """Crop to the named corner, keeping 4/5 of the current side."""
    if corner not in CORNERS:
        raise ValueError(f"corner must be one of {CORNERS}, got {corner!r}")
    if not _spatial_allowed(config, min_side):
        raise FloorReached(
            f"crop would render below min_side={min_side}"
        )
    parent = config.crop
    child_side = parent.side * SHRINK
    shift = parent.side - child_side
    x = parent.x + (shift if corner in ("TR", "BR") else Fraction(0))
    y = parent.y + (shift if corner in ("BL", "BR") else Fraction(0))
    return VideoConfig(
        clip_id=config.clip_id,
        roi_side=config.roi_side,
        frame_indices=config.frame_indices,
        crop=CropRect(x, y, child_side),
        scale_steps=config.scale_steps,
        fps=config.fps,
    )


def reduce_resolution(config: VideoConfig, min_side: int = DEFAULT_MIN_SIDE) -> VideoConfig:
    """Reduce resolution to 4/5, keeping the crop rectangle unchanged."""
    if not _spatial_allowed(config, min_side):
        raise FloorReached(
            f"resolution step would render below min_side={min_side}"
        )
    return VideoConfig(
        clip_id=config.clip_id,
        roi_side=config.roi_side,
        frame_indices=config.frame_indices,
        crop=config.crop,
        scale_steps=config.scale_steps + 1,
        fps=config.fps,
    )


def drop_frame(config: VideoConfig, position: int) -> VideoConfig:
    """Remove one retained frame; ``position`` indexes into frame_indices."""
    if config.frame_count < 2:
        raise LastFrame("cannot drop the only retained frame")
    if not 0 <= position < config.frame_count:
        raise ValueError(f"position {position} out of range")
    indices = config.frame_indices[:position] + config.frame_indices[position + 1 :]
    return VideoConfig(
        clip_id=config.clip_id,
        roi_side=config.roi_side,
        frame_indices=indices,
        crop=config.crop,
        scale_steps=config.scale_steps,
        fps=config.fps,
    )


def expand(
    config: VideoConfig, min_side: int = DEFAULT_MIN_SIDE
) -> list[tuple[ReductionEdge, VideoConfig]]:
    """All one-step reductions, in fixed order.

    Order: TL, TR, BL, BR crops, resolution, then one frame drop per
    retained frame (first to last).  Floor-blocked spatial children are
    silently omitted; ``blocked_reductions`` reports them.
    """
    children: list[tuple[ReductionEdge, VideoConfig]] = []
    if _spatial_allowed(config, min_side):
        for corner in CORNERS:
            children.append(
                (ReductionEdge(kind=f"crop_{corner}"), crop_corner(config, corner, min_side))
            )
        children.append((ReductionEdge(kind="resolution"), reduce_resolution(config, min_side)))
    if config.frame_count >= 2:
        for position, frame_index in enumerate(config.frame_indices):
            children.append(
                (
                    ReductionEdge(kind="drop_frame", dropped_frame_index=frame_index),
                    drop_frame(config, position),
                )
            )
    return children


def blocked_reductions(config: VideoConfig, min_side: int = DEFAULT_MIN_SIDE) -> list[ReductionEdge]:
    """Reductions omitted from expand() because of the size floor."""
    if _spatial_allowed(config, min_side):
        return []
    return [ReductionEdge(kind=kind) for kind in SPATIAL_KINDS]


def child_keys(config: VideoConfig, min_side: int = DEFAULT_MIN_SIDE) -> list[ConfigKey]:
    return [canonical_key(child) for _, child in expand(config, min_side)]
