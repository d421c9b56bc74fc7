"""Initial partition of the image into small regions, plus PGM raster I/O.

Images are plain 2-D numpy arrays: uint8 (height, width) for gray images,
int32 (height, width) for label maps.  Label maps always carry contiguous
region ids 0..N-1 and every id covers exactly one 4-connected pixel set.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from skimage.measure import label as _connected_components

from .errors import FormatError, InvalidParameterError

SLIC_ITERATIONS = 10


# ---------------------------------------------------------------------------
# PGM I/O (binary P5 only)
# ---------------------------------------------------------------------------

def _read_pgm_raw(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a binary PGM; returns (array, maxval). 16-bit samples are big-endian."""
    data = Path(path).read_bytes()
    if len(data) == 0:
        raise OSError(f"{path}: empty file")
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token:
            raise OSError(f"{path}: truncated header")
        try:
            fields.append(int(token))
        except ValueError:
            raise FormatError(f"{path}: bad header token {token!r}") from None
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: bad dimensions/maxval {width}x{height}/{maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise OSError(f"{path}: truncated pixel payload ({len(payload)} of {need} bytes)")
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return arr, maxval


def read_pgm(path: str | Path) -> np.ndarray:
    """Read an 8-bit binary PGM into a uint8 (height, width) array."""
    arr, maxval = _read_pgm_raw(path)
    if maxval > 255:
        raise FormatError(f"{path}: maxval {maxval} > 255, not an 8-bit image")
    return arr.astype(np.uint8)


def write_pgm(img: np.ndarray, path: str | Path) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("expected a 2-D gray image")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + img.astype(np.uint8).tobytes())


def write_label_map(labels: np.ndarray, path: str | Path) -> None:
    """Write a label map as a 16-bit big-endian PGM (maxval 65535)."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("expected a 2-D label map")
    if labels.min() < 0 or labels.max() > 65535:
        raise ValueError("label ids must fit in 0..65535")
    header = f"P5\n{labels.shape[1]} {labels.shape[0]}\n65535\n".encode()
    Path(path).write_bytes(header + labels.astype(">u2").tobytes())


# ---------------------------------------------------------------------------
# Label-map hygiene
# ---------------------------------------------------------------------------

def _first_occurrence_order(flat_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique ids with the flat index of their first appearance."""
    vals, first = np.unique(flat_ids, return_index=True)
    return vals, first


def split_disconnected(labels: np.ndarray) -> np.ndarray:
    """Relabel so ids are contiguous and each covers one 4-connected component.

    New ids are assigned in ascending original-id order (components of a split
    id ordered by first pixel), so the relabeling is deterministic and
    order-preserving.
    """
    labels = np.asarray(labels)
    # +1 so no value is mistaken for background by the component labeler
    comp = _connected_components(labels.astype(np.int64) + 1, connectivity=1) - 1
    flat_comp = comp.ravel()
    comp_label = np.zeros(int(flat_comp.max()) + 1, dtype=np.int64)
    comp_label[flat_comp] = labels.ravel()
    _, first = _first_occurrence_order(flat_comp)
    order = np.lexsort((first, comp_label))
    remap = np.empty(len(order), dtype=np.int32)
    remap[order] = np.arange(len(order), dtype=np.int32)
    return remap[comp]


def _renumber_row_major(labels: np.ndarray) -> np.ndarray:
    """Make ids contiguous 0..N-1 in row-major first-occurrence order."""
    flat = labels.ravel()
    vals, first = _first_occurrence_order(flat)
    order = np.argsort(first)
    remap = np.empty(int(vals.max()) + 1, dtype=np.int32)
    remap[vals[order]] = np.arange(len(vals), dtype=np.int32)
    return remap[labels]


def ingest_label_map(path: str | Path) -> np.ndarray:
    """Load an externally produced region map (binary PGM of region ids).

    The partition is preserved; ids are renumbered to 0..N-1 and any id whose
    pixels form several disconnected blobs is split into one id per blob.
    """
    arr, _ = _read_pgm_raw(path)
    return split_disconnected(arr.astype(np.int32))


# ---------------------------------------------------------------------------
# SLIC-style superpixels
# ---------------------------------------------------------------------------

def slic_oversegment(img: np.ndarray, n_target: int = 400, compactness: float = 0.1) -> np.ndarray:
    """Partition a gray image into roughly `n_target` compact superpixels.

    Local k-means over (intensity, x, y) with intensity normalized to [0, 1],
    grid-seeded centers and a fixed iteration count, so the result is fully
    deterministic for fixed inputs.  `compactness` weighs the spatial term in
    normalized-intensity units; small values let boundaries follow intensity
    edges closely.
    """
    img = np.asarray(img)
    if img.ndim != 2:
        raise InvalidParameterError("expected a 2-D gray image")
    h, w = img.shape
    if not 1 <= n_target <= h * w:
        raise InvalidParameterError(f"n_target must be in [1, {h * w}], got {n_target}")
    if compactness <= 0:
        raise InvalidParameterError(f"compactness must be > 0, got {compactness}")

    intensity = img.astype(np.float64) / 255.0
    grid_w = max(1, math.ceil(math.sqrt(n_target * w / h)))
    grid_h = max(1, math.ceil(n_target / grid_w))
    n_centers = grid_w * grid_h
    step = math.sqrt(h * w / n_centers)

    cy = np.repeat((np.arange(grid_h) + 0.5) * h / grid_h - 0.5, grid_w)
    cx = np.tile((np.arange(grid_w) + 0.5) * w / grid_w - 0.5, grid_h)
    iy = np.clip(np.floor(cy + 0.5).astype(int), 0, h - 1)
    ix = np.clip(np.floor(cx + 0.5).astype(int), 0, w - 1)
    cint = intensity[iy, ix]

    spatial_w = (compactness / step) ** 2
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    labels = np.zeros((h, w), dtype=np.int32)
    for _ in range(SLIC_ITERATIONS):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        for k in range(n_centers):
            y0 = max(0, int(cy[k] - 2 * step))
            y1 = min(h, int(cy[k] + 2 * step) + 1)
            x0 = max(0, int(cx[k] - 2 * step))
            x1 = min(w, int(cx[k] + 2 * step) + 1)
            di = intensity[y0:y1, x0:x1] - cint[k]
            dy = ys[y0:y1, None] - cy[k]
            dx = xs[None, x0:x1] - cx[k]
            dist = di * di + spatial_w * (dy * dy + dx * dx)
            win_best = best[y0:y1, x0:x1]
            closer = dist < win_best  # strict: ties stay with the lower center index
            win_best[closer] = dist[closer]
            labels[y0:y1, x0:x1][closer] = k

        unassigned = labels < 0
        if unassigned.any():  # pixels outside every search window after center drift
            uy, ux = np.nonzero(unassigned)
            d_all = (
                (intensity[uy, ux][:, None] - cint[None, :]) ** 2
                + spatial_w * ((uy[:, None] - cy[None, :]) ** 2 + (ux[:, None] - cx[None, :]) ** 2)
            )
            labels[uy, ux] = np.argmin(d_all, axis=1)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n_centers).astype(np.float64)
        nonempty = counts > 0
        sum_i = np.bincount(flat, weights=intensity.ravel(), minlength=n_centers)
        sum_y = np.bincount(flat, weights=np.broadcast_to(ys[:, None], (h, w)).ravel(),
                            minlength=n_centers)
        sum_x = np.bincount(flat, weights=np.broadcast_to(xs[None, :], (h, w)).ravel(),
                            minlength=n_centers)
        cint[nonempty] = sum_i[nonempty] / counts[nonempty]
        cy[nonempty] = sum_y[nonempty] / counts[nonempty]
        cx[nonempty] = sum_x[nonempty] / counts[nonempty]

    return _enforce_connectivity(labels)


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Absorb stray disconnected fragments into the largest adjacent region.

    For every superpixel label the largest connected component keeps the
    label; every smaller (orphan) component is merged into the largest
    already-resolved region it touches.  Final ids are contiguous 0..N-1 in
    row-major first-occurrence order.
    """
    comp = split_disconnected(labels)
    n_comp = int(comp.max()) + 1
    flat_comp = comp.ravel()
    sizes = np.bincount(flat_comp, minlength=n_comp).astype(np.int64)
    comp_label = np.zeros(n_comp, dtype=np.int64)
    comp_label[flat_comp] = labels.ravel()

    adj: list[set[int]] = [set() for _ in range(n_comp)]
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        for u, v in set(zip(a[diff].tolist(), b[diff].tolist())):
            adj[u].add(v)
            adj[v].add(u)

    keeper: dict[int, int] = {}
    for c in range(n_comp):
        lab = int(comp_label[c])
        best = keeper.get(lab)
        if best is None or sizes[c] > sizes[best]:
            keeper[lab] = c

    root = np.arange(n_comp)
    area = sizes.copy()
    resolved = np.zeros(n_comp, dtype=bool)
    for c in keeper.values():
        resolved[c] = True
    pending = [c for c in range(n_comp) if not resolved[c]]
    while pending:
        still = []
        for c in pending:
            candidates = sorted({int(root[n]) for n in adj[c] if resolved[n]})
            if not candidates:
                still.append(c)
                continue
            target = max(candidates, key=lambda r: (area[r], -r))
            root[c] = target
            area[target] += sizes[c]
            resolved[c] = True
        if len(still) == len(pending):  # nothing left reachable; keep orphans as-is
            break
        pending = still

    return _renumber_row_major(root[comp])
