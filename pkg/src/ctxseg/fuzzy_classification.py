"""Fuzzy membership vectors, confidence tiers and the partition matrix.

Every region carries a membership vector: K degrees in [0, 1] summing to 1,
one per thematic class.  The partition matrix stacks those vectors for all
live regions together with a per-region confidence tier derived from how
decisively the top degree is separated from the rest:

    HCD  high classification degree  -- seed regions, never updated
    MCD  medium                      -- updatable, may spread information
    LCD  low                         -- updatable, never spreads information
"""

from __future__ import annotations

import csv
from enum import IntEnum
from pathlib import Path

import numpy as np

from .knowledge_base import KnowledgeBase

# tier thresholds on the separation coefficient
HCD_THRESHOLD = 0.6
MCD_THRESHOLD = 0.3

# keeps exp() away from a hard underflow to an all-zero vector
_MIN_EXPONENT = -700.0


class Tier(IntEnum):
    LCD = 0
    MCD = 1
    HCD = 2


def classify_region(mean_intensity: float, kb: KnowledgeBase) -> np.ndarray:
    """Membership degrees of a region from its mean intensity (in [0, 1]).

    Normalized Gaussian likelihoods against the knowledge base prototypes;
    the result sums to 1 and every degree is strictly positive.
    """
    mu = np.array([c.prototype_mean for c in kb.classes]) / 255.0
    sigma = np.array([c.prototype_std for c in kb.classes]) / 255.0
    z = -((mean_intensity - mu) ** 2) / (2.0 * sigma**2)
    weights = np.exp(np.maximum(z, _MIN_EXPONENT))
    return weights / weights.sum()


def sorted_degrees(v: np.ndarray) -> np.ndarray:
    """Membership degrees in ascending order (last element is the maximum)."""
    return np.sort(np.asarray(v, dtype=np.float64))


def predominant_class(v: np.ndarray) -> int:
    """Class index of the maximum degree; ties go to the lowest index."""
    return int(np.argmax(v))


def distribution_gaps(v: np.ndarray) -> np.ndarray:
    """The K-1 consecutive differences of the ascending sorted degrees."""
    return np.diff(sorted_degrees(v))


def separation_coefficient(v: np.ndarray) -> float:
    """How decisively the top degree is isolated, in [0, 1].

    The gap directly below the maximum degree, normalized by the largest gap
    anywhere in the sorted distribution.  A uniform vector (all gaps zero) has
    coefficient 0: maximal ambiguity.
    """
    gaps = distribution_gaps(v)
    largest = gaps.max()
    if largest == 0.0:
        return 0.0
    return float(gaps[-1] / largest)


def tier_from_sc(sc: float) -> Tier:
    if sc > HCD_THRESHOLD:
        return Tier.HCD
    if sc >= MCD_THRESHOLD:
        return Tier.MCD
    return Tier.LCD


def tier_of(v: np.ndarray) -> Tier:
    """Confidence tier of a membership vector."""
    return tier_from_sc(separation_coefficient(v))


class PartitionMatrix:
    """Live view of the membership rows and tiers of a graph's regions.

    The graph's regions own the data; this object only orders and exposes it,
    so it never goes stale across sweeps and merges.
    """

    def __init__(self, graph):
        self.graph = graph

    def region_ids(self) -> list[int]:
        return self.graph.live_ids()

    def row(self, region_id: int) -> np.ndarray:
        return self.graph.regions[region_id].membership

    def tier(self, region_id: int) -> Tier:
        return self.graph.regions[region_id].tier

    def rows(self) -> np.ndarray:
        return np.array([self.row(i) for i in self.region_ids()])

    def tiers(self) -> list[Tier]:
        return [self.tier(i) for i in self.region_ids()]

    def tier_counts(self) -> tuple[int, int, int]:
        """(n_hcd, n_mcd, n_lcd) over live regions."""
        tiers = self.tiers()
        return (
            sum(t == Tier.HCD for t in tiers),
            sum(t == Tier.MCD for t in tiers),
            sum(t == Tier.LCD for t in tiers),
        )

    def write_csv(self, path: str | Path) -> None:
        ids = self.region_ids()
        k = len(self.row(ids[0]))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["region_id"] + [f"degree_{j}" for j in range(k)] + ["SC", "tier"])
            for i in ids:
                v = self.row(i)
                writer.writerow(
                    [i] + [repr(float(x)) for x in v]
                    + [repr(separation_coefficient(v)), self.tier(i).name]
                )


def classify_graph(graph, kb: KnowledgeBase, preserve_hcd: bool = False) -> PartitionMatrix:
    """(Re)compute membership vectors and tiers for all live regions.

    With preserve_hcd=True, regions already at HCD keep their current vector:
    seed status acquired through propagation is never lost to a rebuild.
    """
    for i in graph.live_ids():
        region = graph.regions[i]
        if preserve_hcd and region.tier == Tier.HCD:
            continue
        region.membership = classify_region(region.mean_intensity, kb)
        region.tier = tier_of(region.membership)
    return PartitionMatrix(graph)


def focusing(pm: PartitionMatrix) -> set[int]:
    """Seed selection: the ids of all regions currently at HCD."""
    return {i for i in pm.region_ids() if pm.tier(i) == Tier.HCD}
