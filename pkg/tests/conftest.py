from __future__ import annotations

import numpy as np
import pytest

from minvid.core import FrameGrid, SourceClip, clip_content_id


def build_clip(side: int, n_frames: int, seed: int = 7, category: str = "rowing",
               answer_key_id: str = "ak-rowing") -> SourceClip:
    """Clip with generic (seeded random) pixel content.

    Generic content makes distinct crops render distinct pixels, which the
    key-vs-render equivalence checks rely on.
    """
    rng = np.random.default_rng(seed)
    frames = tuple(
        FrameGrid(rng.integers(0, 256, (side, side), dtype=np.uint8)) for _ in range(n_frames)
    )
    return SourceClip(
        clip_id=clip_content_id(frames),
        frames=frames,
        action_category=category,
        answer_key_id=answer_key_id,
    )


def constant_clip(side: int, n_frames: int, value: int = 77, category: str = "mopping",
                  answer_key_id: str = "ak-mopping") -> SourceClip:
    frames = tuple(
        FrameGrid(np.full((side, side), value, dtype=np.uint8)) for _ in range(n_frames)
    )
    return SourceClip(
        clip_id=clip_content_id(frames),
        frames=frames,
        action_category=category,
        answer_key_id=answer_key_id,
    )


@pytest.fixture
def clip50() -> SourceClip:
    return build_clip(50, 2)


@pytest.fixture
def clip12() -> SourceClip:
    return build_clip(12, 2, seed=11)


@pytest.fixture
def clip12x3() -> SourceClip:
    return build_clip(12, 3, seed=13)


@pytest.fixture
def clip10() -> SourceClip:
    return build_clip(10, 2, seed=17)
