"""Recognition-gap statistics, average precision, and dataset assembly.

Group summaries use the population standard deviation (divide by N), since
they describe a fixed stimulus set; that choice is recorded in report
metadata.  Average precision is the uninterpolated mean of precision at
each positive's rank.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .manifest import ScoreEntry, frac_from_pair, frac_to_pair
from .search import SearchTree


class UnpairedKey(ValueError):
    pass


class NoPositives(ValueError):
    pass


class OverlappingKeys(ValueError):
    pass


class KeyMismatch(ValueError):
    pass


def population_stats(values: Sequence[float | Fraction]) -> tuple[float, float]:
    """(mean, population SD) of a nonempty sample.

    Moments accumulate in exact rational arithmetic, so the result is
    independent of input order.
    """
    if not values:
        raise ValueError("no values")
    xs = [Fraction(v) for v in values]
    mean = sum(xs) / len(xs)
    var = sum((x - mean) ** 2 for x in xs) / len(xs)
    return float(mean), math.sqrt(var)


# ---------------------------------------------------------------------------
# Recognition gaps


@dataclass(frozen=True)
class GapTriplet:
    """One minimal configuration with its one-step reduced versions' rates."""

    triplet_id: str
    minimal_rate: Fraction
    spatial_rates: tuple[Fraction, ...]
    temporal_rates: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "minimal_rate", Fraction(self.minimal_rate))
        object.__setattr__(
            self, "spatial_rates", tuple(Fraction(r) for r in self.spatial_rates)
        )
        object.__setattr__(
            self, "temporal_rates", tuple(Fraction(r) for r in self.temporal_rates)
        )


@dataclass(frozen=True)
class GroupStats:
    mean: float
    sd: float
    n: int


@dataclass(frozen=True)
class TripletGaps:
    triplet_id: str
    spatial_gap: float  # mean over the triplet's (minimal - spatial) pairs
    temporal_gap: float


@dataclass(frozen=True)
class GapReport:
    source: str  # "human" | "model"
    groups: dict[str, GroupStats]
    spatial_gap_mean: float
    temporal_gap_mean: float
    per_triplet: tuple[TripletGaps, ...]
    sd_convention: str = "population"


def gap_report(triplets: Sequence[GapTriplet], source: str = "human") -> GapReport:
    """Group means/SDs and mean pairwise gaps minimal-vs-sub-minimal."""
    if not triplets:
        raise ValueError("no triplets")
    for t in triplets:
        if not t.spatial_rates or not t.temporal_rates:
            raise UnpairedKey(
                f"triplet {t.triplet_id} lacks a spatial or temporal counterpart"
            )
    minimal = [t.minimal_rate for t in triplets]
    spatial = [r for t in triplets for r in t.spatial_rates]
    temporal = [r for t in triplets for r in t.temporal_rates]
    spatial_pairs = [t.minimal_rate - r for t in triplets for r in t.spatial_rates]
    temporal_pairs = [t.minimal_rate - r for t in triplets for r in t.temporal_rates]

    def mean(values: list[Fraction]) -> float:
        return float(sum(values) / len(values))

    per_triplet = tuple(
        TripletGaps(
            triplet_id=t.triplet_id,
            spatial_gap=mean([t.minimal_rate - r for r in t.spatial_rates]),
            temporal_gap=mean([t.minimal_rate - r for r in t.temporal_rates]),
        )
        for t in triplets
    )
    groups = {
        "minimal": GroupStats(*population_stats(minimal), n=len(minimal)),
        "spatial_subminimal": GroupStats(*population_stats(spatial), n=len(spatial)),
        "temporal_subminimal": GroupStats(*population_stats(temporal), n=len(temporal)),
    }
    return GapReport(
        source=source,
        groups=groups,
        spatial_gap_mean=mean(spatial_pairs),
        temporal_gap_mean=mean(temporal_pairs),
        per_triplet=per_triplet,
    )


def triplets_from_tree(tree: SearchTree) -> list[GapTriplet]:
    """Build triplets from certified minimal nodes and their children."""
    triplets = []
    for key_str in tree.minimal_keys():
        node = tree.nodes[key_str]
        spatial: list[Fraction] = []
        temporal: list[Fraction] = []
        for edge, child in tree.children(key_str):
            if child.record is None:
                continue
            (spatial if edge.is_spatial else temporal).append(child.record.rate)
        assert node.record is not None
        if not spatial or not temporal:
            raise UnpairedKey(f"minimal node {key_str} lacks recorded sub-minimal versions")
        triplets.append(
            GapTriplet(
                triplet_id=key_str,
                minimal_rate=node.record.rate,
                spatial_rates=tuple(spatial),
                temporal_rates=tuple(temporal),
            )
        )
    return triplets


def triplet_to_doc(triplet: GapTriplet) -> dict:
    return {
        "triplet_id": triplet.triplet_id,
        "minimal_rate": frac_to_pair(triplet.minimal_rate),
        "spatial_rates": [frac_to_pair(r) for r in triplet.spatial_rates],
        "temporal_rates": [frac_to_pair(r) for r in triplet.temporal_rates],
    }


def triplet_from_doc(doc: dict) -> GapTriplet:
    return GapTriplet(
        triplet_id=doc["triplet_id"],
        minimal_rate=frac_from_pair(doc["minimal_rate"]),
        spatial_rates=tuple(frac_from_pair(r) for r in doc["spatial_rates"]),
        temporal_rates=tuple(frac_from_pair(r) for r in doc["temporal_rates"]),
    )


def gap_report_to_doc(report: GapReport) -> dict:
    return {
        "source": report.source,
        "sd_convention": report.sd_convention,
        "groups": {
            name: {"mean": g.mean, "sd": g.sd, "n": g.n} for name, g in report.groups.items()
        },
        "spatial_gap_mean": report.spatial_gap_mean,
        "temporal_gap_mean": report.temporal_gap_mean,
        "per_triplet": [
            {
                "triplet_id": t.triplet_id,
                "spatial_gap": t.spatial_gap,
                "temporal_gap": t.temporal_gap,
            }
            for t in report.per_triplet
        ],
    }


def gap_report_from_doc(doc: dict) -> GapReport:
    return GapReport(
        source=doc["source"],
        sd_convention=doc["sd_convention"],
        groups={
            name: GroupStats(mean=g["mean"], sd=g["sd"], n=g["n"])
            for name, g in doc["groups"].items()
        },
        spatial_gap_mean=doc["spatial_gap_mean"],
        temporal_gap_mean=doc["temporal_gap_mean"],
        per_triplet=tuple(
            TripletGaps(
                triplet_id=t["triplet_id"],
                spatial_gap=t["spatial_gap"],
                temporal_gap=t["temporal_gap"],
            )
            for t in doc["per_triplet"]
        ),
    )


def format_gap_table(report: GapReport) -> str:
    """Plain-text summary table: groups by mean +/- SD."""
    lines = [
        f"recognition rates ({report.source}, SD convention: {report.sd_convention})",
        f"{'group':<22} {'n':>4} {'mean':>7} {'SD':>7}",
    ]
    for name, g in report.groups.items():
        lines.append(f"{name:<22} {g.n:>4} {g.mean:>7.3f} {g.sd:>7.3f}")
    lines.append(f"mean gap minimal-spatial:  {report.spatial_gap_mean:.3f}")
    lines.append(f"mean gap minimal-temporal: {report.temporal_gap_mean:.3f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Average precision and hard negatives


@dataclass(frozen=True)
class ScoredExample:
    key: str
    label: str  # "positive" | "negative"
    model_score: float
    human_rate: Fraction | None = None

    def __post_init__(self) -> None:
        if self.label not in ("positive", "negative"):
            raise ValueError("label must be 'positive' or 'negative'")
        if not 0.0 <= self.model_score <= 1.0:
            raise ValueError("model_score must lie in [0, 1]")

    @property
    def is_positive(self) -> bool:
        return self.label == "positive"


def scored_from_entry(entry: ScoreEntry) -> ScoredExample:
    return ScoredExample(
        key=entry.config_key,
        label=entry.label,
        model_score=entry.model_score,
        human_rate=entry.human_rate,
    )


def average_precision(examples: Sequence[ScoredExample]) -> float:
    """Mean of precision at each positive's rank, descending score order.

    Ties are broken by stable input order.
    """
    if not any(e.is_positive for e in examples):
        raise NoPositives("at least one positive example is required")
    order = sorted(range(len(examples)), key=lambda i: (-examples[i].model_score, i))
    hits = 0
    precisions = []
    for rank, idx in enumerate(order, start=1):
        if examples[idx].is_positive:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def mine_hard_negatives(
    examples: Sequence[ScoredExample],
    cutoff: float | None = None,
    positive_quantile: float | None = None,
) -> list[ScoredExample]:
    """Negatives scored at or above the decision rule, descending score.

    Exactly one rule applies: a fixed score cutoff, or a quantile of the
    positive scores (linearly interpolated).
    """
    if (cutoff is None) == (positive_quantile is None):
        raise ValueError("provide exactly one of cutoff or positive_quantile")
    if positive_quantile is not None:
        positives = sorted(e.model_score for e in examples if e.is_positive)
        if not positives:
            raise NoPositives("quantile rule needs positive examples")
        cutoff = _quantile(positives, positive_quantile)
    assert cutoff is not None
    negatives = [
        (i, e) for i, e in enumerate(examples) if not e.is_positive and e.model_score >= cutoff
    ]
    negatives.sort(key=lambda pair: (-pair[1].model_score, pair[0]))
    return [e for _, e in negatives]


def _quantile(sorted_values: list[float], q: float) -> float:
    """Linear interpolation between order statistics, q in [0, 1]."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    n = len(sorted_values)
    if n == 1:
        return sorted_values[0]
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    weight = pos - lo
    return sorted_values[lo] * (1 - weight) + sorted_values[hi] * weight


# ---------------------------------------------------------------------------
# Dataset assembly


@dataclass(frozen=True)
class DatasetSplit:
    train_positive: tuple[str, ...]
    train_negative: tuple[str, ...]
    test_positive: tuple[str, ...]
    test_negative: tuple[str, ...]
    positive_weight: float
    seed: int

    def to_doc(self) -> dict:
        return {
            "train": {
                "positive": list(self.train_positive),
                "negative": list(self.train_negative),
            },
            "test": {
                "positive": list(self.test_positive),
                "negative": list(self.test_negative),
            },
            "metadata": {
                "positive_weight": self.positive_weight,
                "seed": self.seed,
                "n_train_positive": len(self.train_positive),
                "n_train_negative": len(self.train_negative),
                "n_test_positive": len(self.test_positive),
                "n_test_negative": len(self.test_negative),
            },
        }


def assemble_dataset(
    positives: Sequence[str],
    negatives: Sequence[str],
    train_fraction: float = 0.8,
    seed: int = 0,
) -> DatasetSplit:
    """Deterministic seeded split with class-balance metadata.

    The positive weight (n_negative / n_positive over the training split)
    is emitted for downstream trainers that rebalance classes.
    """
    pos = list(positives)
    neg = list(negatives)
    overlap = set(pos) & set(neg)
    if overlap:
        raise OverlappingKeys(f"keys present in both manifests: {sorted(overlap)[:3]}")
    if len(set(pos)) != len(pos) or len(set(neg)) != len(neg):
        raise OverlappingKeys("duplicate keys within a manifest")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")

    def split(keys: list[str], tag: str) -> tuple[list[str], list[str]]:
        shuffled = sorted(keys)
        random.Random(f"{seed}:{tag}").shuffle(shuffled)
        n_train = round(train_fraction * len(shuffled))
        return shuffled[:n_train], shuffled[n_train:]

    train_pos, test_pos = split(pos, "positive")
    train_neg, test_neg = split(neg, "negative")
    if not train_pos:
        raise ValueError("training split contains no positive examples")
    return DatasetSplit(
        train_positive=tuple(train_pos),
        train_negative=tuple(train_neg),
        test_positive=tuple(test_pos),
        test_negative=tuple(test_neg),
        positive_weight=len(train_neg) / len(train_pos),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Human vs. model comparison


def human_model_comparison(gap_human: GapReport, gap_model: GapReport) -> dict:
    """Per-triplet gap differences (human - model) with sign counts."""
    human = {t.triplet_id: t for t in gap_human.per_triplet}
    model = {t.triplet_id: t for t in gap_model.per_triplet}
    if set(human) != set(model):
        missing = sorted(set(human) ^ set(model))
        raise KeyMismatch(f"reports cover different triplets: {missing[:3]}")
    rows = []
    for triplet_id in sorted(human):
        h, m = human[triplet_id], model[triplet_id]
        rows.append(
            {
                "triplet_id": triplet_id,
                "spatial_gap_difference": h.spatial_gap - m.spatial_gap,
                "temporal_gap_difference": h.temporal_gap - m.temporal_gap,
            }
        )
    spatial_diffs = [r["spatial_gap_difference"] for r in rows]
    temporal_diffs = [r["temporal_gap_difference"] for r in rows]

    def summary(diffs: list[float]) -> dict:
        mean, sd = population_stats(diffs)
        return {
            "mean_difference": mean,
            "sd_difference": sd,
            "human_gap_larger": sum(1 for d in diffs if d > 0),
            "n": len(diffs),
        }

    return {
        "per_triplet": rows,
        "spatial": summary(spatial_diffs),
        "temporal": summary(temporal_diffs),
        "sources": {"human": gap_human.source, "model": gap_model.source},
    }


# ---------------------------------------------------------------------------
# Descriptive significance utilities


def two_proportion_counts(k_a: int, n_a: int, k_b: int, n_b: int) -> dict:
    """Descriptive two-proportion summary; no parametric test is claimed."""
    return {
        "group_a": {"correct": k_a, "n": n_a, "rate": k_a / n_a},
        "group_b": {"correct": k_b, "n": n_b, "rate": k_b / n_b},
        "rate_difference": k_a / n_a - k_b / n_b,
    }


def permutation_test(
    group_a: Sequence[float],
    group_b: Sequence[float],
    n_resamples: int = 10_000,
    seed: int = 0,
) -> dict:
    """Two-sided permutation test on the difference of group means."""
    a = [float(v) for v in group_a]
    b = [float(v) for v in group_b]
    if not a or not b:
        raise ValueError("both groups must be nonempty")
    observed = sum(a) / len(a) - sum(b) / len(b)
    pooled = a + b
    rng = random.Random(seed)
    extreme = 0
    for _ in range(n_resamples):
        rng.shuffle(pooled)
        stat = sum(pooled[: len(a)]) / len(a) - sum(pooled[len(a) :]) / len(b)
        if abs(stat) >= abs(observed) - 1e-12:
            extreme += 1
    return {
        "observed_difference": observed,
        "p_value": (extreme + 1) / (n_resamples + 1),
        "n_resamples": n_resamples,
        "seed": seed,
    }
