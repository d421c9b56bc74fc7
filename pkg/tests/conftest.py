from collections import deque

import numpy as np
import pytest

from ctxseg import Region, RegionGraph, load_mammogram_kb


@pytest.fixture(scope="session")
def mammo_kb():
    return load_mammogram_kb()


def make_graph(memberships, adjacency, intensities=None, areas=None, tiers=None):
    """Hand-build a RegionGraph for unit tests, bypassing build_graph."""
    n = len(memberships)
    intensities = intensities if intensities is not None else [0.5] * n
    areas = areas if areas is not None else [1] * n
    regions = {}
    for i in range(n):
        v = None if memberships[i] is None else np.asarray(memberships[i], dtype=np.float64)
        tier = tiers[i] if tiers is not None else None
        if tier is None and v is not None:
            from ctxseg import tier_of

            tier = tier_of(v)
        regions[i] = Region(id=i, area=areas[i], mean_intensity=intensities[i],
                            membership=v, tier=tier)
    adj = {i: set() for i in range(n)}
    for a, b in adjacency:
        adj[a].add(b)
        adj[b].add(a)
    return RegionGraph(regions=regions, adjacency=adj)


def flood_fill_components(mask):
    """Number of 4-connected components of a boolean mask (independent oracle)."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    h, w = mask.shape
    count = 0
    for sy in range(h):
        for sx in range(w):
            if mask[sy, sx] and not seen[sy, sx]:
                count += 1
                queue = deque([(sy, sx)])
                seen[sy, sx] = True
                while queue:
                    y, x = queue.popleft()
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
    return count


def brute_force_adjacency(labels):
    """Edge set of a label map by scanning every 4-adjacent pixel pair."""
    labels = np.asarray(labels)
    h, w = labels.shape
    edges = set()
    for y in range(h):
        for x in range(w):
            for dy, dx in ((0, 1), (1, 0)):
                ny, nx = y + dy, x + dx
                if ny < h and nx < w and labels[y, x] != labels[ny, nx]:
                    edges.add(frozenset((int(labels[y, x]), int(labels[ny, nx]))))
    return edges


def assert_partition_ok(labels, shape):
    """LabelMap invariants: contiguous ids, full coverage, 4-connected ids."""
    labels = np.asarray(labels)
    assert labels.shape == shape
    ids = np.unique(labels)
    assert ids[0] == 0 and ids[-1] == len(ids) - 1, "ids not contiguous"
    for i in ids:
        assert flood_fill_components(labels == i) == 1, f"region {i} is disconnected"
