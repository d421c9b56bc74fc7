"""Contextual configuration identification and membership propagation.

Each sweep inspects every updatable region's local context (its HCD/MCD
neighbors), picks one of four contextual configurations, and shifts
membership mass toward the classes that configuration designates.  The shift
is damped by the region's distributional distance to its context: identical
neighborhoods pull hard, alien neighborhoods barely at all.  Sweeps are
synchronous (all updates are computed against the pre-sweep state and applied
at once), so the result does not depend on region enumeration order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    EmptyContextError,
    InvalidParameterError,
    InvalidTargetSetError,
    LengthMismatchError,
)
from .fuzzy_classification import PartitionMatrix, Tier, predominant_class, tier_of
from .knowledge_base import (
    MATCH_POLICIES,
    KnowledgeBase,
    classes_included_in,
    classes_neighboring,
    configuration_subjects,
)
from .region_graph import RegionGraph, local_context


class ContextKind(Enum):
    HOM_SIMILAR = "homogeneous-similar"
    HOM_DISSIMILAR_ALL_HCD = "homogeneous-dissimilar-all-hcd"
    HOM_DISSIMILAR_MIXED = "homogeneous-dissimilar-mixed"
    HETEROGENEOUS = "heterogeneous"


@dataclass(frozen=True)
class ContextCase:
    kind: ContextKind
    lc_classes: frozenset[int]      # predominant classes present in the context
    target_classes: frozenset[int]  # classes whose degrees will increase


@dataclass(frozen=True)
class UpdateParams:
    similarity_threshold: float = 0.1  # normalized intensity units
    convergence_eps: float = 1e-4
    max_inner_iterations: int = 500
    match_policy: str = "exact"
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.similarity_threshold < 1.0:
            raise InvalidParameterError(
                f"similarity_threshold must be in (0, 1), got {self.similarity_threshold}"
            )
        if self.convergence_eps <= 0.0:
            raise InvalidParameterError(
                f"convergence_eps must be > 0, got {self.convergence_eps}"
            )
        if self.max_inner_iterations < 0:
            raise InvalidParameterError("max_inner_iterations must be >= 0")
        if self.match_policy not in MATCH_POLICIES:
            raise InvalidParameterError(
                f"match_policy must be one of {MATCH_POLICIES}, got {self.match_policy!r}"
            )
        if self.threads < 1:
            raise InvalidParameterError("threads must be >= 1")


def bhattacharyya_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Distributional distance sqrt(1 - sum(sqrt(p*q))) between unit-sum vectors.

    Computed as sqrt(0.5 * sum((sqrt(p) - sqrt(q))^2)), which is algebraically
    identical for normalized inputs but exactly zero for p == q instead of
    suffering catastrophic cancellation near zero.  Bounded to [0, 1].
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise LengthMismatchError(f"vector lengths differ: {p.shape} vs {q.shape}")
    diff = np.sqrt(p) - np.sqrt(q)
    return min(float(np.sqrt(0.5 * np.dot(diff, diff))), 1.0)


def context_distance(graph: RegionGraph, region_id: int) -> float:
    """Mean distributional distance from a region to its local context."""
    lc = local_context(graph, region_id)
    return _context_distance_from(graph, region_id, lc)


def _context_distance_from(graph: RegionGraph, region_id: int, lc: list[int]) -> float:
    if not lc:
        raise EmptyContextError(f"region {region_id} has no HCD/MCD neighbor")
    v = graph.regions[region_id].membership
    return sum(bhattacharyya_distance(v, graph.regions[n].membership) for n in lc) / len(lc)


def identify_configuration(
    graph: RegionGraph, region_id: int, kb: KnowledgeBase, params: UpdateParams
) -> ContextCase:
    """Classify a region's local context into one of the four update cases.

    (a) context homogeneous in predominant class and similar in intensity:
        reinforce that class;
    (b) homogeneous, dissimilar, all context regions HCD: reinforce the
        classes the knowledge base declares includable inside the context
        class;
    (c) homogeneous, dissimilar, some context region only MCD: reinforce the
        classes that may neighbor the context class;
    (d) heterogeneous context: reinforce the classes forming a valid
        configuration with the observed context classes.
    """
    lc = local_context(graph, region_id)
    return _identify_from_lc(graph, region_id, lc, kb, params)


def _identify_from_lc(
    graph: RegionGraph, region_id: int, lc: list[int], kb: KnowledgeBase, params: UpdateParams
) -> ContextCase:
    if not lc:
        raise EmptyContextError(f"region {region_id} has no HCD/MCD neighbor")
    pcs = {predominant_class(graph.regions[n].membership) for n in lc}
    lc_classes = frozenset(pcs)
    if len(pcs) == 1:
        c = next(iter(pcs))
        c_name = kb.class_name(c)
        lc_mean = sum(graph.regions[n].mean_intensity for n in lc) / len(lc)
        gap = abs(graph.regions[region_id].mean_intensity - lc_mean)
        if gap <= params.similarity_threshold:
            return ContextCase(ContextKind.HOM_SIMILAR, lc_classes, frozenset({c}))
        if all(graph.regions[n].tier == Tier.HCD for n in lc):
            names = classes_included_in(kb, c_name)
            kind = ContextKind.HOM_DISSIMILAR_ALL_HCD
        else:
            names = classes_neighboring(kb, c_name)
            kind = ContextKind.HOM_DISSIMILAR_MIXED
    else:
        names = configuration_subjects(
            kb, {kb.class_name(c) for c in pcs}, policy=params.match_policy
        )
        kind = ContextKind.HETEROGENEOUS
    return ContextCase(kind, lc_classes, frozenset(kb.class_id(n) for n in names))


def update_membership(v: np.ndarray, targets: frozenset[int] | set[int], d_r: float) -> np.ndarray:
    """Shift membership mass toward the target classes, damped by (1 - d_r).

    Each target class j gains v[j]*(1-d_r)/K while every other class pays
    v[j]*(1-d_r)/(K*(K-1)) for it, so the total is conserved exactly.  Any
    degree driven below zero is clamped and the vector renormalized.
    """
    v = np.asarray(v, dtype=np.float64)
    k = len(v)
    if not 0 < len(targets) < k:
        raise InvalidTargetSetError(
            f"target set must be a non-empty proper subset of the {k} classes"
        )
    idx = np.fromiter(sorted(targets), dtype=np.intp)
    transfer = v[idx] * (1.0 - d_r) / k
    spread = transfer / (k - 1)
    delta = np.full(k, -spread.sum())
    delta[idx] += transfer + spread
    out = v + delta
    if np.any(out < 0.0):
        out = np.clip(out, 0.0, None)
        out /= out.sum()
    return out


def propagate_sweep(
    graph: RegionGraph, pm: PartitionMatrix, kb: KnowledgeBase, params: UpdateParams
) -> float:
    """One synchronous update sweep; returns the largest absolute degree change.

    HCD rows are never touched.  MCD and LCD regions with a non-empty local
    context get their vector updated per their contextual configuration;
    regions whose target set comes out empty (or covers every class) are
    skipped this sweep.  Tiers are recomputed after all updates are applied.
    """
    k = kb.k
    ids = [i for i in pm.region_ids() if pm.tier(i) != Tier.HCD]

    def compute(i: int):
        lc = local_context(graph, i)
        if not lc:
            return None
        case = _identify_from_lc(graph, i, lc, kb, params)
        if not case.target_classes or len(case.target_classes) >= k:
            return None
        d_r = _context_distance_from(graph, i, lc)
        return update_membership(graph.regions[i].membership, case.target_classes, d_r)

    if params.threads > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=params.threads) as pool:
            results = list(pool.map(compute, ids))
    else:
        results = [compute(i) for i in ids]

    max_change = 0.0
    for i, new_v in zip(ids, results):
        if new_v is None:
            continue
        region = graph.regions[i]
        change = float(np.max(np.abs(new_v - region.membership)))
        max_change = max(max_change, change)
        region.membership = new_v
        region.tier = tier_of(new_v)
    return max_change


def has_converged(max_change: float, params: UpdateParams) -> bool:
    return max_change < params.convergence_eps
