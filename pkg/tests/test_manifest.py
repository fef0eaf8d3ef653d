from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minvid.core import ConfigKey, CropRect, VideoConfig, canonical_key, make_root
from minvid.manifest import (
    ClipEntry,
    Manifest,
    ManifestError,
    ScoreEntry,
    answer_key_from_doc,
    answer_key_to_doc,
    atomic_write,
    canonical_json_bytes,
    clip_entry_from_doc,
    clip_entry_to_doc,
    config_from_doc,
    config_to_doc,
    frac_from_pair,
    frac_to_pair,
    record_from_doc,
    record_to_doc,
    score_entry_from_doc,
    score_entry_to_doc,
)
from minvid.oracle import AnswerKey, RecognitionRecord, SyntheticOracle
from minvid.search import SearchParams, run_search

fractions = st.builds(
    Fraction, st.integers(min_value=0, max_value=10**6), st.integers(min_value=1, max_value=10**6)
)


@st.composite
def configs(draw):
    roi = draw(st.integers(min_value=4, max_value=100))
    n = draw(st.integers(min_value=1, max_value=5))
    indices = tuple(sorted(draw(st.sets(st.integers(0, 9), min_size=n, max_size=n))))
    side = draw(
        st.fractions(
            min_value=Fraction(1, 10), max_value=Fraction(roi), max_denominator=625
        )
    )
    x = draw(st.fractions(min_value=0, max_value=Fraction(roi) - side, max_denominator=625))
    y = draw(st.fractions(min_value=0, max_value=Fraction(roi) - side, max_denominator=625))
    return VideoConfig(
        clip_id=draw(st.text(st.characters(categories=("Ll", "Nd")), min_size=1, max_size=8)),
        roi_side=roi,
        frame_indices=indices,
        crop=CropRect(x, y, side),
        scale_steps=draw(st.integers(0, 6)),
        fps=draw(st.integers(1, 10)),
    )


class TestFieldCodecs:
    @settings(max_examples=100, deadline=None)
    @given(fractions)
    def test_rationals_roundtrip_as_integer_pairs(self, f):
        pair = frac_to_pair(f)
        assert all(isinstance(v, int) for v in pair)
        assert frac_from_pair(pair) == f

    @settings(max_examples=80, deadline=None)
    @given(configs())
    def test_config_roundtrip(self, config):
        doc = config_to_doc(config)
        assert config_from_doc(json.loads(json.dumps(doc))) == config

    @settings(max_examples=80, deadline=None)
    @given(configs())
    def test_key_string_roundtrip(self, config):
        key = canonical_key(config)
        assert ConfigKey.from_str(key.to_str()) == key

    def test_record_roundtrip(self, clip50):
        record = RecognitionRecord(canonical_key(make_root(clip50)), 30, 17)
        assert record_from_doc(record_to_doc(record)) == record

    def test_answer_key_roundtrip(self):
        key = AnswerKey("ak-x", "x", ("a", "b c"), ("d",))
        assert answer_key_from_doc(answer_key_to_doc(key)) == key

    def test_clip_entry_roundtrip(self):
        entry = ClipEntry("c1", "rowing", "ak-rowing", 50, ("aa.png", "bb.png"))
        assert clip_entry_from_doc(clip_entry_to_doc(entry)) == entry

    def test_score_entry_roundtrip(self):
        entry = ScoreEntry("key1", "positive", 0.75, Fraction(21, 30))
        assert score_entry_from_doc(score_entry_to_doc(entry)) == entry
        bare = ScoreEntry("key2", "negative", 0.25)
        assert score_entry_from_doc(score_entry_to_doc(bare)) == bare

    def test_no_floats_in_rational_fields(self, clip50):
        cfg = make_root(clip50)
        doc = config_to_doc(cfg)
        assert doc["crop"]["x"] == [0, 1]
        assert doc["crop"]["side"] == [50, 1]


class TestManifest:
    def _manifest_with_tree(self, clip50) -> Manifest:
        oracle = SyntheticOracle(
            lambda k, c: 1 if c.rendered_side >= 40 and c.frame_count >= 2 else 0
        )
        tree = run_search(make_root(clip50), oracle, SearchParams())
        return Manifest(
            clips=[ClipEntry(clip50.clip_id, "rowing", "ak-rowing", 50, ("a.png", "b.png"))],
            answer_keys=[AnswerKey("ak-rowing", "rowing", ("boat",), ("row",))],
            records=[RecognitionRecord(canonical_key(make_root(clip50)), 30, 21)],
            scores=[ScoreEntry("k", "positive", 0.5)],
            tree=tree,
        )

    def test_bytes_roundtrip_identity(self, clip50):
        manifest = self._manifest_with_tree(clip50)
        data = manifest.to_bytes()
        assert Manifest.from_bytes(data).to_bytes() == data

    def test_save_load(self, clip50, tmp_path):
        manifest = self._manifest_with_tree(clip50)
        path = tmp_path / "state.json"
        manifest.save(path)
        assert Manifest.load(path).to_bytes() == manifest.to_bytes()

    def test_rejects_unknown_schema_version(self):
        with pytest.raises(ManifestError):
            Manifest.from_doc({"schema_version": 999})

    def test_canonical_json_is_sorted_and_ascii(self):
        data = canonical_json_bytes({"b": 1, "a": [1, 2], "c": None})
        assert data == b'{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1,\n  "c": null\n}\n'

    def test_atomic_write_replaces(self, tmp_path):
        target = tmp_path / "out.json"
        atomic_write(target, b"one")
        atomic_write(target, b"two")
        assert target.read_bytes() == b"two"
        assert list(tmp_path.iterdir()) == [target]

    def test_empty_manifest_roundtrip(self):
        data = Manifest().to_bytes()
        assert Manifest.from_bytes(data).to_bytes() == data
