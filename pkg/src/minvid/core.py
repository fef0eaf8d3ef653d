"""Stimulus configurations, their canonical identity, and pixel rendering.

A stimulus is a short sequence of square grayscale frames cut from a source
region of interest.  Configurations are described exactly: the retained crop
rectangle is tracked as rational coordinates and the resolution factor as an
integer exponent of 4/5, so chains of reductions stay path-independent and
rendering is bit-reproducible.  Rounding to pixels happens only at render
time, always half-up.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

# Linear shrink factor applied by one size or resolution step.
SHRINK = Fraction(4, 5)

DEFAULT_FPS = 2


class RenderFailure(ValueError):
    """The configuration does not cover at least one output pixel."""


def round_half_up(value: Fraction | int) -> int:
    """Nearest integer for a non-negative rational, with halves rounded up."""
    f = Fraction(value)
    return (2 * f.numerator + f.denominator) // (2 * f.denominator)


@dataclass(frozen=True, eq=False)
class FrameGrid:
    """One square 8-bit grayscale frame.

    ``pixels`` is a read-only (side, side) uint8 array, row-major.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.uint8, copy=True)
        if arr.ndim != 2:
            raise ValueError("frame pixels must be a 2-D array")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("frame must contain at least one pixel")
        if arr.shape[0] != arr.shape[1]:
            raise ValueError("frames are square: got %dx%d" % arr.shape)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def side(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return self.side

    @property
    def height(self) -> int:
        return self.side

    @property
    def samples(self) -> bytes:
        """Row-major intensity bytes, length width*height."""
        return self.pixels.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrameGrid):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.samples))

    def __repr__(self) -> str:
        return f"FrameGrid(side={self.side})"


def clip_content_id(frames: Sequence[FrameGrid]) -> str:
    """Content hash identifying a clip by its exact pixel data."""
    h = hashlib.sha256()
    h.update(b"clip:%d" % len(frames))
    for f in frames:
        h.update(b";%d:%d;" % (f.width, f.height))
        h.update(f.samples)
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class SourceClip:
    """Manually selected square ROI frames for one action instance."""

    clip_id: str
    frames: tuple[FrameGrid, ...]
    action_category: str
    answer_key_id: str

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not 1 <= len(frames) <= 5:
            raise ValueError("clip must contain 1 to 5 frames, got %d" % len(frames))
        side = frames[0].side
        if any(f.side != side for f in frames):
            raise ValueError("all clip frames must share identical dimensions")

    @property
    def roi_side(self) -> int:
        return self.frames[0].side

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SourceClip):
            return NotImplemented
        return (
            self.clip_id == other.clip_id
            and self.action_category == other.action_category
            and self.answer_key_id == other.answer_key_id
            and self.frames == other.frames
        )

    def __hash__(self) -> int:
        return hash((self.clip_id, self.action_category, self.answer_key_id, self.frames))


@dataclass(frozen=True, order=True)
class CropRect:
    """Square crop rectangle in source-ROI coordinates, exact rationals."""

    x: Fraction
    y: Fraction
    side: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", Fraction(self.x))
        object.__setattr__(self, "y", Fraction(self.y))
        object.__setattr__(self, "side", Fraction(self.side))
        if self.side <= 0:
            raise ValueError("crop side must be positive")
        if self.x < 0 or self.y < 0:
            raise ValueError("crop origin must be non-negative")


@dataclass(frozen=True)
class VideoConfig:
    """A reduced stimulus: retained frames, crop rectangle, resolution factor.

    ``scale_steps`` counts resolution reductions; the effective resolution
    factor is (4/5)**scale_steps.  ``fps`` is a presentation parameter only
    and plays no role in stimulus identity.
    """

    clip_id: str
    roi_side: int
    frame_indices: tuple[int, ...]
    crop: CropRect
    scale_steps: int = 0
    fps: int = DEFAULT_FPS

    def __post_init__(self) -> None:
        indices = tuple(int(i) for i in self.frame_indices)
        object.__setattr__(self, "frame_indices", indices)
        if not indices:
            raise ValueError("frame_indices must be nonempty")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("frame_indices must be strictly increasing")
        if indices[0] < 0:
            raise ValueError("frame indices must be non-negative")
        if self.roi_side < 1:
            raise ValueError("roi_side must be >= 1")
        if self.scale_steps < 0:
            raise ValueError("scale_steps must be >= 0")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        c = self.crop
        if c.x + c.side > self.roi_side or c.y + c.side > self.roi_side:
            raise ValueError("crop rectangle extends outside the source ROI")

    @property
    def scale(self) -> Fraction:
        return SHRINK**self.scale_steps

    @property
    def effective_side(self) -> Fraction:
        """Exact rational output side before rounding to pixels."""
        return self.crop.side * self.scale

    @property
    def rendered_side(self) -> int:
        return round_half_up(self.effective_side)

    @property
    def frame_count(self) -> int:
        return len(self.frame_indices)


@dataclass(frozen=True, order=True)
class ConfigKey:
    """Canonical identity of a configuration in source-pixel coordinates.

    Two configurations denote the same stimulus (same source pixels, same
    retained frames, same effective resolution) iff their keys are equal,
    independent of the reduction path taken.
    """

    clip_id: str
    frame_indices: tuple[int, ...]
    x: Fraction
    y: Fraction
    side: Fraction
    scale_steps: int

    def to_str(self) -> str:
        """Compact deterministic string form, safe inside URL paths."""
        idx = ",".join(str(i) for i in self.frame_indices)
        return (
            f"{self.clip_id}~f{idx}"
            f"~x{self.x.numerator}_{self.x.denominator}"
            f"~y{self.y.numerator}_{self.y.denominator}"
            f"~s{self.side.numerator}_{self.side.denominator}"
            f"~k{self.scale_steps}"
        )

    @classmethod
    def from_str(cls, text: str) -> "ConfigKey":
        try:
            clip_id, f, x, y, s, k = text.split("~")
            assert f[0] == "f" and x[0] == "x" and y[0] == "y" and s[0] == "s" and k[0] == "k"
            indices = tuple(int(i) for i in f[1:].split(","))

            def frac(part: str) -> Fraction:
                num, den = part[1:].split("_")
                return Fraction(int(num), int(den))

            return cls(clip_id, indices, frac(x), frac(y), frac(s), int(k[1:]))
        except (ValueError, AssertionError) as exc:
            raise ValueError(f"malformed config key string: {text!r}") from exc


def make_root(clip: SourceClip, fps: int = DEFAULT_FPS) -> VideoConfig:
    """Starting configuration: all frames, full ROI, full resolution."""
    if clip.frame_count == 0:
        raise ValueError("clip has no frames")
    side = clip.roi_side
    return VideoConfig(
        clip_id=clip.clip_id,
        roi_side=side,
        frame_indices=tuple(range(clip.frame_count)),
        crop=CropRect(Fraction(0), Fraction(0), Fraction(side)),
        scale_steps=0,
        fps=fps,
    )


def canonical_key(config: VideoConfig) -> ConfigKey:
    return ConfigKey(
        clip_id=config.clip_id,
        frame_indices=config.frame_indices,
        x=config.crop.x,
        y=config.crop.y,
        side=config.crop.side,
        scale_steps=config.scale_steps,
    )


def _overlap_weights(n_in: int, n_out: int) -> np.ndarray:
    """Integer overlap lengths between input cells and output cells.

    Input cell c covers [c, c+1) and output cell i covers
    [i*n_in/n_out, (i+1)*n_in/n_out); scaling both by n_out makes every
    boundary an integer, so the (n_out, n_in) weight matrix is exact.
    Each row sums to n_in.
    """
    w = np.zeros((n_out, n_in), dtype=np.int64)
    for i in range(n_out):
        lo = i * n_in
        hi = (i + 1) * n_in
        c0 = lo // n_out
        c1 = -(-hi // n_out)  # ceil division
        for c in range(c0, min(c1, n_in)):
            ov = min(hi, (c + 1) * n_out) - max(lo, c * n_out)
            if ov > 0:
                w[i, c] = ov
    return w


def area_average(block: np.ndarray, out_side: int) -> np.ndarray:
    """Exact box-filter downsample of a block to out_side x out_side.

    Pure integer arithmetic; the average of a constant block is that
    constant, and results are identical across platforms.
    """
    h, wdt = block.shape
    if h == out_side and wdt == out_side:
        return block.copy()
    wy = _overlap_weights(h, out_side)
    wx = _overlap_weights(wdt, out_side)
    num = wy @ block.astype(np.int64) @ wx.T
    den = h * wdt
    return ((2 * num + den) // (2 * den)).astype(np.uint8)


def render(config: VideoConfig, clip: SourceClip) -> list[FrameGrid]:
    """Extract the crop and downsample each retained frame.

    Rational crop bounds are rounded half-up to pixel bounds; the output
    side is round_half_up(crop_side * scale).  All output frames share the
    same dimensions.
    """
    if config.clip_id != clip.clip_id:
        raise ValueError("configuration does not belong to this clip")
    if config.roi_side != clip.roi_side:
        raise ValueError("configuration ROI size does not match the clip")
    if any(i >= clip.frame_count for i in config.frame_indices):
        raise ValueError("frame index outside the clip")

    c = config.crop
    x0 = round_half_up(c.x)
    x1 = round_half_up(c.x + c.side)
    y0 = round_half_up(c.y)
    y1 = round_half_up(c.y + c.side)
    out_side = config.rendered_side
    if out_side < 1:
        raise RenderFailure("rendered side below one pixel")
    if x1 <= x0 or y1 <= y0:
        raise RenderFailure("crop rectangle rounds to an empty pixel block")

    rendered = []
    for idx in config.frame_indices:
        block = clip.frames[idx].pixels[y0:y1, x0:x1]
        rendered.append(FrameGrid(area_average(block, out_side)))
    return rendered


def key_sort_order(keys: Iterable[ConfigKey]) -> list[ConfigKey]:
    """Deterministic ordering used everywhere results are listed."""
    return sorted(keys)
