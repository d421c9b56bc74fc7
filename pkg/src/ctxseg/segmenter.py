"""Full segmentation pipeline: classify, focus, propagate, merge, defuzzify.

The run alternates two nested loops.  The inner loop repeats focusing /
propagation / conditional merging until membership changes fall below the
convergence threshold; the outer loop then reclassifies every live region
from its (possibly merged) mean intensity and starts over, stopping once an
entire inner loop produced no merge and converged.  Regions at HCD keep their
vectors through reclassification so acquired seed status is never lost.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, ValidationError
from .fuzzy_classification import (
    PartitionMatrix,
    Tier,
    classify_graph,
    focusing,
    predominant_class,
)
from .knowledge_base import KnowledgeBase
from .oversegmentation import slic_oversegment
from .propagation import (
    UpdateParams,
    bhattacharyya_distance,
    has_converged,
    propagate_sweep,
)
from .region_graph import RegionGraph, build_graph, merge

log = logging.getLogger("ctxseg.segmenter")

UNLABELED = 255

TIER_GRAY = {Tier.HCD: 255, Tier.MCD: 128, Tier.LCD: 0}


class DefuzzMode(Enum):
    HCD_ONLY = "hcd-only"
    HCD_AND_MCD = "hcd-and-mcd"


@dataclass(frozen=True)
class SegmenterParams(UpdateParams):
    merge_distance_threshold: float = 0.1
    max_outer_iterations: int = 10
    defuzz_mode: DefuzzMode = DefuzzMode.HCD_AND_MCD
    weighted_merge: bool = False

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 < self.merge_distance_threshold < 1.0:
            raise InvalidParameterError(
                f"merge_distance_threshold must be in (0, 1), "
                f"got {self.merge_distance_threshold}"
            )
        if self.max_outer_iterations < 0:
            raise InvalidParameterError("max_outer_iterations must be >= 0")


@dataclass
class IterationRecord:
    iteration: int
    n_hcd: int
    n_mcd: int
    n_lcd: int
    max_change: float
    n_merges: int


@dataclass
class SegmentationResult:
    label_map: np.ndarray          # per-pixel class id, UNLABELED where excluded
    tier_map: np.ndarray           # per-pixel tier gray level (255/128/0)
    iteration_log: list[IterationRecord]
    final_graph: RegionGraph
    converged: bool
    defuzz_mode: DefuzzMode
    no_seeds: bool = False
    n_initial_regions: int = 0
    partition: PartitionMatrix | None = field(default=None, repr=False)

    @property
    def n_final_regions(self) -> int:
        return self.final_graph.n_live

    @property
    def n_iterations(self) -> int:
        return len(self.iteration_log)


def conditional_merge(
    graph: RegionGraph, pm: PartitionMatrix, params: SegmenterParams, iteration: int = 0
) -> int:
    """Merge adjacent region pairs that agree in predominant class and are
    distributionally close; returns the number of merges performed.

    Candidate pairs are snapshotted at pass start and processed in ascending
    (i, j) order; pairs invalidated by an earlier merge this pass are skipped,
    surviving pairs are evaluated against the current (possibly just merged)
    vectors.
    """
    pairs = [
        (i, j)
        for i in pm.region_ids()
        for j in sorted(graph.adjacency[i])
        if j > i
    ]
    n_merges = 0
    for i, j in pairs:
        if not (graph.is_live(i) and graph.is_live(j)):
            continue
        if j not in graph.adjacency[i]:
            continue
        vi = pm.row(i)
        vj = pm.row(j)
        if predominant_class(vi) != predominant_class(vj):
            continue
        if bhattacharyya_distance(vi, vj) < params.merge_distance_threshold:
            merge(graph, i, j, weighted_membership=params.weighted_merge, iteration=iteration)
            n_merges += 1
    return n_merges


def defuzzify(graph: RegionGraph, pm: PartitionMatrix, mode: DefuzzMode) -> np.ndarray:
    """Crisp per-pixel class map; regions below the accepted tier stay UNLABELED."""
    ids = pm.region_ids()
    if len(pm.row(ids[0])) > UNLABELED - 1:
        raise ValidationError(f"at most {UNLABELED - 1} classes supported")
    accepted = (Tier.HCD,) if mode == DefuzzMode.HCD_ONLY else (Tier.HCD, Tier.MCD)
    lut = np.full(max(ids) + 1, UNLABELED, dtype=np.uint8)
    for i in ids:
        if pm.tier(i) in accepted:
            lut[i] = predominant_class(pm.row(i))
    return lut[graph.labels]


def quality_map(graph: RegionGraph, pm: PartitionMatrix) -> np.ndarray:
    """Per-pixel tier image: HCD regions white, MCD gray, LCD black."""
    ids = pm.region_ids()
    lut = np.zeros(max(ids) + 1, dtype=np.uint8)
    for i in ids:
        lut[i] = TIER_GRAY[pm.tier(i)]
    return lut[graph.labels]


def segment(
    img: np.ndarray,
    kb: KnowledgeBase,
    params: SegmenterParams | None = None,
    labels: np.ndarray | None = None,
    n_superpixels: int = 400,
    compactness: float = 0.1,
) -> SegmentationResult:
    """Run the whole pipeline on a gray image.

    A precomputed over-segmentation can be supplied via `labels`; otherwise
    the image is partitioned into `n_superpixels` superpixels first.  The run
    is deterministic: identical inputs produce identical results.
    """
    if params is None:
        params = SegmenterParams()
    if kb.k > 254:
        raise ValidationError(f"at most 254 classes supported, got {kb.k}")
    if labels is None:
        labels = slic_oversegment(img, n_target=n_superpixels, compactness=compactness)

    graph = build_graph(img, labels)
    n_initial = graph.n_live
    pm = classify_graph(graph, kb)

    iteration_log: list[IterationRecord] = []
    converged = False
    no_seeds = False
    iteration = 0

    if not focusing(pm):
        no_seeds = True
        log.warning("no seed (HCD) region after initial classification; "
                    "returning the initial classification")
    else:
        for outer in range(params.max_outer_iterations):
            if outer:
                classify_graph(graph, kb, preserve_hcd=True)
            merges_this_outer = 0
            inner_converged = False
            for _ in range(params.max_inner_iterations):
                if not focusing(pm) and not no_seeds:
                    no_seeds = True
                    log.warning("seed set became empty at iteration %d", iteration)
                max_change = propagate_sweep(graph, pm, kb, params)
                n_merges = conditional_merge(graph, pm, params, iteration=iteration)
                merges_this_outer += n_merges
                n_hcd, n_mcd, n_lcd = pm.tier_counts()
                iteration_log.append(
                    IterationRecord(iteration, n_hcd, n_mcd, n_lcd, max_change, n_merges)
                )
                log.debug("iteration %d: hcd=%d mcd=%d lcd=%d max_change=%.3g merges=%d",
                          iteration, n_hcd, n_mcd, n_lcd, max_change, n_merges)
                iteration += 1
                if has_converged(max_change, params):
                    inner_converged = True
                    break
            if inner_converged and merges_this_outer == 0:
                converged = True
                break
        log.info("segmentation %s after %d sweeps, %d -> %d regions",
                 "converged" if converged else "stopped",
                 iteration, n_initial, graph.n_live)

    return SegmentationResult(
        label_map=defuzzify(graph, pm, params.defuzz_mode),
        tier_map=quality_map(graph, pm),
        iteration_log=iteration_log,
        final_graph=graph,
        converged=converged,
        defuzz_mode=params.defuzz_mode,
        no_seeds=no_seeds,
        n_initial_regions=n_initial,
        partition=pm,
    )


def write_iteration_log(records: list[IterationRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "n_HCD", "n_MCD", "n_LCD", "max_change", "n_merges"])
        for rec in records:
            writer.writerow(
                [rec.iteration, rec.n_hcd, rec.n_mcd, rec.n_lcd, repr(rec.max_change),
                 rec.n_merges]
            )
