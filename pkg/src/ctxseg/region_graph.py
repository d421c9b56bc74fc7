"""Region statistics, the adjacency graph, and the merge operation.

The graph is the single source of truth during a segmentation run: region
areas, mean intensities, membership vectors, tiers, adjacency and the pixel
label map are all kept consistent through merges.  Merges and membership
writes must be serialized (single writer); read-only queries between
mutations are safe from any number of threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DeadRegionError, DimensionMismatchError, NotAdjacentError
from .fuzzy_classification import Tier, tier_of


@dataclass
class Region:
    id: int
    area: int
    mean_intensity: float  # in [0, 1]
    membership: np.ndarray | None = None
    tier: Tier | None = None


@dataclass
class MergeRecord:
    survivor: int
    absorbed: int
    iteration: int


@dataclass
class RegionGraph:
    regions: dict[int, Region]
    adjacency: dict[int, set[int]]
    labels: np.ndarray | None = None  # current region id per pixel
    merge_log: list[MergeRecord] = field(default_factory=list)

    def live_ids(self) -> list[int]:
        return sorted(self.regions)

    def is_live(self, region_id: int) -> bool:
        return region_id in self.regions

    def _require_live(self, region_id: int) -> Region:
        try:
            return self.regions[region_id]
        except KeyError:
            raise DeadRegionError(f"region {region_id} is not live") from None

    def neighbors(self, region_id: int) -> set[int]:
        self._require_live(region_id)
        return self.adjacency[region_id]

    @property
    def n_live(self) -> int:
        return len(self.regions)

    def total_area(self) -> int:
        return sum(r.area for r in self.regions.values())


def build_graph(img: np.ndarray, labels: np.ndarray) -> RegionGraph:
    """Build the region adjacency graph of a label map over a gray image.

    Region ids must be contiguous 0..N-1; an edge (i, j) exists iff some pixel
    of i is 4-adjacent to a pixel of j.  Membership vectors stay unset until a
    classification pass fills them in.
    """
    img = np.asarray(img)
    labels = np.asarray(labels, dtype=np.int32)
    if img.shape != labels.shape:
        raise DimensionMismatchError(f"image {img.shape} vs label map {labels.shape}")
    n = int(labels.max()) + 1
    flat = labels.ravel()
    if not np.array_equal(np.unique(flat), np.arange(n)):
        raise ValueError("label ids must be contiguous 0..N-1")

    areas = np.bincount(flat, minlength=n)
    sums = np.bincount(flat, weights=img.ravel() / 255.0, minlength=n)
    means = sums / areas

    adjacency: dict[int, set[int]] = {i: set() for i in range(n)}
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        for u, v in set(zip(a[diff].tolist(), b[diff].tolist())):
            adjacency[u].add(v)
            adjacency[v].add(u)

    regions = {
        i: Region(id=i, area=int(areas[i]), mean_intensity=float(means[i])) for i in range(n)
    }
    return RegionGraph(regions=regions, adjacency=adjacency, labels=labels.copy())


def merge(
    graph: RegionGraph,
    i: int,
    j: int,
    weighted_membership: bool = False,
    iteration: int = 0,
) -> int:
    """Merge two adjacent live regions; the lower id survives.

    The survivor's mean intensity is the area-weighted mean (it stays equal to
    the true mean over the merged pixel set); its membership vector is the
    plain average of the two vectors unless weighted_membership is set.  The
    survivor's tier is recomputed from the new vector.
    """
    a = graph._require_live(i)
    b = graph._require_live(j)
    if i == j or j not in graph.adjacency[i]:
        raise NotAdjacentError(f"regions {i} and {j} share no boundary")
    survivor, absorbed = (a, b) if i < j else (b, a)

    total = survivor.area + absorbed.area
    survivor.mean_intensity = (
        survivor.area * survivor.mean_intensity + absorbed.area * absorbed.mean_intensity
    ) / total
    if survivor.membership is not None and absorbed.membership is not None:
        if weighted_membership:
            mixed = (
                survivor.area * survivor.membership + absorbed.area * absorbed.membership
            ) / total
        else:
            mixed = (survivor.membership + absorbed.membership) / 2.0
        survivor.membership = mixed / mixed.sum()
        survivor.tier = tier_of(survivor.membership)
    survivor.area = total

    absorbed_nbrs = graph.adjacency.pop(absorbed.id)
    for n in absorbed_nbrs:
        graph.adjacency[n].discard(absorbed.id)
        if n != survivor.id:
            graph.adjacency[n].add(survivor.id)
            graph.adjacency[survivor.id].add(n)
    graph.adjacency[survivor.id].discard(survivor.id)
    del graph.regions[absorbed.id]
    if graph.labels is not None:
        graph.labels[graph.labels == absorbed.id] = survivor.id
    graph.merge_log.append(MergeRecord(survivor.id, absorbed.id, iteration))
    return survivor.id


def local_context(graph: RegionGraph, region_id: int) -> list[int]:
    """Information-bearing neighbors (HCD or MCD), in ascending id order.

    LCD neighbors are invisible as information sources but remain update
    targets themselves.
    """
    graph._require_live(region_id)
    return sorted(
        n for n in graph.adjacency[region_id]
        if graph.regions[n].tier in (Tier.HCD, Tier.MCD)
    )


def relabeled_labels(graph: RegionGraph) -> tuple[np.ndarray, list[int]]:
    """Current label map with live ids compacted to 0..N-1 (ascending order)."""
    if graph.labels is None:
        raise ValueError("graph carries no label map")
    ids = graph.live_ids()
    remap = np.zeros(max(ids) + 1, dtype=np.int32)
    for new, old in enumerate(ids):
        remap[old] = new
    return remap[graph.labels], ids


def write_merge_log(graph: RegionGraph, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["survivor", "absorbed", "iteration"])
        for rec in graph.merge_log:
            writer.writerow([rec.survivor, rec.absorbed, rec.iteration])
