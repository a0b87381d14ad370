"""Automatic quality gate for generated images.

A candidate is accepted when its nearest-neighbour distance to the
target-domain feature set is strictly below the median of the target set's
intra-set pairwise distances. Both quantities are recorded on every
decision so either convention can be audited later.

Target sets are small (tens of images), so all distances are computed
exactly by brute force; no approximate index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from genaug.errors import ValidationError
from genaug.iqa import FeatureSet, feature_distance

DistanceFn = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class GateDecision:
    image_id: str
    accepted: bool
    nearest_id: str
    nearest_distance: float
    median_pairwise: float


@dataclass(frozen=True)
class GateSummary:
    total: int
    accepted: int
    median_pairwise: float

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.total if self.total else 0.0


def pairwise_median(target: FeatureSet, metric: DistanceFn = feature_distance) -> float:
    """Median over all n(n-1)/2 unordered pair distances.

    Even pair counts take the midpoint of the two central values.
    """
    n = len(target)
    if n < 2:
        raise ValidationError(f"pairwise median needs >= 2 features, got {n}")
    dists = []
    for i in range(n):
        for j in range(i + 1, n):
            dists.append(metric(target.vectors[i], target.vectors[j]))
    dists.sort()
    mid = len(dists) // 2
    if len(dists) % 2 == 1:
        return dists[mid]
    return (dists[mid - 1] + dists[mid]) / 2.0


def nearest(target: FeatureSet, query: np.ndarray,
            metric: DistanceFn = feature_distance) -> tuple[str, float]:
    """Exact linear-scan nearest neighbour; ties break to the lowest id."""
    if len(target) < 1:
        raise ValidationError("nearest neighbour of an empty set")
    best_id: str | None = None
    best_dist = float("inf")
    for i in range(len(target)):
        d = metric(target.vectors[i], query)
        tid = target.ids[i]
        if d < best_dist or (d == best_dist and (best_id is None or tid < best_id)):
            best_id = tid
            best_dist = d
    assert best_id is not None
    return best_id, best_dist


def quality_gate(target: FeatureSet, query: np.ndarray, query_id: str = "",
                 metric: DistanceFn = feature_distance,
                 median: float | None = None) -> GateDecision:
    """Gate one candidate. Accept iff median_pairwise > nearest_distance."""
    if len(target) < 2:
        raise ValidationError(f"quality gate needs a target set of >= 2 images, "
                              f"got {len(target)}")
    if median is None:
        median = pairwise_median(target, metric)
    nearest_id, nearest_dist = nearest(target, query, metric)
    return GateDecision(
        image_id=query_id,
        accepted=median > nearest_dist,
        nearest_id=nearest_id,
        nearest_distance=nearest_dist,
        median_pairwise=median,
    )


def gate_batch(target: FeatureSet, candidates: FeatureSet,
               metric: DistanceFn = feature_distance,
               ) -> tuple[list[GateDecision], GateSummary]:
    """Gate every candidate against one shared median."""
    if len(target) < 2:
        raise ValidationError(f"quality gate needs a target set of >= 2 images, "
                              f"got {len(target)}")
    median = pairwise_median(target, metric)
    decisions = [
        quality_gate(target, candidates.vectors[i], candidates.ids[i],
                     metric, median=median)
        for i in range(len(candidates))
    ]
    summary = GateSummary(
        total=len(decisions),
        accepted=sum(1 for d in decisions if d.accepted),
        median_pairwise=median,
    )
    return decisions, summary


def decision_to_json(d: GateDecision) -> dict:
    return {
        "image_id": d.image_id,
        "accepted": d.accepted,
        "nearest_id": d.nearest_id,
        "nearest_distance": d.nearest_distance,
        "median_pairwise": d.median_pairwise,
    }
