from __future__ import annotations

from fractions import Fraction

import pytest

from minvid.core import CropRect, VideoConfig, canonical_key, make_root, render, round_half_up
from minvid.reduce import (
    FloorReached,
    LastFrame,
    ReductionEdge,
    blocked_reductions,
    crop_corner,
    drop_frame,
    expand,
    reduce_resolution,
    spatial_child_rendered_side,
)

from conftest import build_clip


@pytest.fixture
def root50(clip50):
    return make_root(clip50)


class TestCropCorner:
    def test_tl_anchors_origin(self, root50):
        child = crop_corner(root50, "TL")
        assert (child.crop.x, child.crop.y, child.crop.side) == (0, 0, 40)
        assert child.scale_steps == root50.scale_steps
        assert child.frame_indices == root50.frame_indices

    def test_br_anchor_arithmetic(self, root50):
        child = crop_corner(root50, "BR")
        assert (child.crop.x, child.crop.y, child.crop.side) == (10, 10, 40)

    def test_tr_bl_anchors(self, root50):
        assert (crop_corner(root50, "TR").crop.x, crop_corner(root50, "TR").crop.y) == (10, 0)
        assert (crop_corner(root50, "BL").crop.x, crop_corner(root50, "BL").crop.y) == (0, 10)

    def test_boundary_side_five(self):
        clip = build_clip(5, 2)
        child = crop_corner(make_root(clip), "TL", min_side=4)
        assert child.crop.side == 4

    def test_floor_reached(self):
        clip = build_clip(4, 2)
        with pytest.raises(FloorReached):
            crop_corner(make_root(clip), "TL", min_side=4)

    def test_unknown_corner(self, root50):
        with pytest.raises(ValueError):
            crop_corner(root50, "XX")


class TestReduceResolution:
    def test_increments_exponent(self, root50):
        child = reduce_resolution(root50)
        assert child.scale_steps == 1
        assert child.crop == root50.crop
        assert child.rendered_side == 40

    def test_second_step(self, root50):
        child = reduce_resolution(reduce_resolution(root50))
        assert child.scale_steps == 2
        assert child.rendered_side == 32

    def test_floor_reached(self):
        clip = build_clip(4, 2)
        with pytest.raises(FloorReached):
            reduce_resolution(make_root(clip), min_side=4)


class TestDropFrame:
    def test_drop_second_leaves_first(self, root50):
        child = drop_frame(root50, 1)
        assert child.frame_indices == (0,)

    def test_drop_first_leaves_second(self, root50):
        child = drop_frame(root50, 0)
        assert child.frame_indices == (1,)

    def test_drop_middle_of_three(self):
        cfg = VideoConfig("c", 20, (0, 2, 4), CropRect(Fraction(0), Fraction(0), Fraction(20)))
        assert drop_frame(cfg, 1).frame_indices == (0, 4)

    def test_last_frame_guard(self):
        cfg = VideoConfig("c", 20, (3,), CropRect(Fraction(0), Fraction(0), Fraction(20)))
        with pytest.raises(LastFrame):
            drop_frame(cfg, 0)


class TestExpand:
    def test_two_frame_config_has_seven_children(self, root50):
        children = expand(root50)
        assert len(children) == 7
        kinds = [edge.kind for edge, _ in children]
        assert kinds == [
            "crop_TL",
            "crop_TR",
            "crop_BL",
            "crop_BR",
            "resolution",
            "drop_frame",
            "drop_frame",
        ]
        assert [e.dropped_frame_index for e, _ in children[5:]] == [0, 1]

    def test_one_frame_config_has_five_children(self):
        clip = build_clip(50, 1)
        children = expand(make_root(clip))
        assert len(children) == 5
        assert all(edge.is_spatial for edge, _ in children)

    def test_at_floor_only_temporal(self):
        clip = build_clip(4, 2)
        children = expand(make_root(clip), min_side=4)
        assert [edge.kind for edge, _ in children] == ["drop_frame", "drop_frame"]
        blocked = blocked_reductions(make_root(clip), min_side=4)
        assert [e.kind for e in blocked] == [
            "crop_TL",
            "crop_TR",
            "crop_BL",
            "crop_BR",
            "resolution",
        ]

    def test_one_frame_at_floor_is_leaf(self):
        clip = build_clip(4, 1)
        assert expand(make_root(clip), min_side=4) == []

    def test_never_yields_parent_key(self, clip12x3):
        root = make_root(clip12x3)
        seen = [root]
        for _ in range(3):
            nxt = []
            for cfg in seen:
                for _, child in expand(cfg, min_side=4):
                    assert canonical_key(child) != canonical_key(cfg)
                    nxt.append(child)
            seen = nxt

    def test_child_count_bound(self, clip12x3):
        root = make_root(clip12x3)
        for cfg in [root, drop_frame(root, 0)]:
            n = len(expand(cfg, min_side=4))
            assert 0 <= n <= 5 + cfg.frame_count

    def test_spatial_children_render_same_dimensions(self, clip12):
        root = make_root(clip12)
        parent = reduce_resolution(root, min_side=4)  # non-integer effective side next
        want = round_half_up(parent.effective_side * Fraction(4, 5))
        assert want == spatial_child_rendered_side(parent)
        for edge, child in expand(parent, min_side=4):
            if edge.is_spatial:
                frames = render(child, clip12)
                assert frames[0].side == want

    def test_children_nest_inside_parent(self, clip12x3):
        root = make_root(clip12x3)
        frontier = [root]
        for _ in range(3):
            nxt = []
            for cfg in frontier:
                for _, child in expand(cfg, min_side=4):
                    assert child.crop.x >= cfg.crop.x
                    assert child.crop.y >= cfg.crop.y
                    assert child.crop.x + child.crop.side <= cfg.crop.x + cfg.crop.side
                    assert child.crop.y + child.crop.side <= cfg.crop.y + cfg.crop.side
                    assert child.scale_steps >= cfg.scale_steps
                    nxt.append(child)
            frontier = nxt


class TestReductionEdge:
    def test_drop_frame_requires_index(self):
        with pytest.raises(ValueError):
            ReductionEdge(kind="drop_frame")
        with pytest.raises(ValueError):
            ReductionEdge(kind="resolution", dropped_frame_index=0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ReductionEdge(kind="zoom")
