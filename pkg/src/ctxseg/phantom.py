"""Synthetic ground-truth phantoms for exercising the pipeline end to end.

Three layouts are available:

  mammo4   4 classes arranged like a mediolateral mammogram: dark background,
           a bright muscle wedge in the top-left corner, a breast disc of
           fatty tissue, and a dense-tissue blob strictly inside the fatty
           region (so dense touches only fatty).
  stripes  n vertical bands, one class each.
  nested   3 classes: background, a ring, and a core inside the ring.

Geometry is jittered by a seeded generator, so every phantom is reproducible
bit for bit from its spec.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, InvalidSpecError
from .knowledge_base import (
    KnowledgeBase,
    SpatialRelations,
    ThematicClass,
    ValidConfiguration,
    write_kb,
)
from .oversegmentation import write_pgm
from .segmenter import UNLABELED

LAYOUTS = ("mammo4", "stripes", "nested")

MAMMO4_CLASS_NAMES = ("Background", "Muscle", "Fatty_tissue", "Dense_tissue")
MAMMO4_DEFAULT_MEANS = (10.0, 220.0, 110.0, 180.0)
NESTED_CLASS_NAMES = ("Background", "Ring", "Core")
NESTED_DEFAULT_MEANS = (20.0, 120.0, 220.0)


@dataclass(frozen=True)
class PhantomSpec:
    width: int = 256
    height: int = 256
    layout: str = "mammo4"
    n_stripes: int = 3
    class_means: tuple[float, ...] | None = None
    noise_std: float = 0.0
    seed: int = 0

    def resolved_means(self) -> tuple[float, ...]:
        if self.class_means is not None:
            return tuple(float(m) for m in self.class_means)
        if self.layout == "mammo4":
            return MAMMO4_DEFAULT_MEANS
        if self.layout == "nested":
            return NESTED_DEFAULT_MEANS
        return tuple(np.linspace(20.0, 235.0, self.n_stripes))

    def class_names(self) -> tuple[str, ...]:
        if self.layout == "mammo4":
            return MAMMO4_CLASS_NAMES
        if self.layout == "nested":
            return NESTED_CLASS_NAMES
        return tuple(f"Stripe_{i}" for i in range(self.n_stripes))


def _validate(spec: PhantomSpec) -> tuple[float, ...]:
    if spec.layout not in LAYOUTS:
        raise InvalidSpecError(f"layout must be one of {LAYOUTS}, got {spec.layout!r}")
    if spec.noise_std < 0:
        raise InvalidSpecError("noise_std must be >= 0")
    means = spec.resolved_means()
    if spec.layout == "mammo4":
        if len(means) != 4:
            raise InvalidSpecError("mammo4 needs exactly 4 class means")
        if min(spec.width, spec.height) < 32:
            raise InvalidSpecError("mammo4 needs at least 32x32 pixels")
    elif spec.layout == "nested":
        if len(means) != 3:
            raise InvalidSpecError("nested needs exactly 3 class means")
        if min(spec.width, spec.height) < 32:
            raise InvalidSpecError("nested needs at least 32x32 pixels")
    else:
        if spec.n_stripes < 2:
            raise InvalidSpecError("stripes needs at least 2 bands")
        if len(means) != spec.n_stripes:
            raise InvalidSpecError(
                f"stripes({spec.n_stripes}) needs {spec.n_stripes} class means"
            )
        if spec.width < 2 * spec.n_stripes:
            raise InvalidSpecError("image too narrow for the requested stripe count")
    if not all(0.0 <= m <= 255.0 for m in means):
        raise InvalidSpecError("class means must lie in [0, 255]")
    return means


def _shrink_until_isolated(inner: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Erode `inner` until its 4-dilation stays within `allowed` (plus itself)."""
    cross = ndimage.generate_binary_structure(2, 1)
    for _ in range(64):
        if not inner.any():
            raise InvalidSpecError("phantom too small: an inner blob vanished")
        halo = ndimage.binary_dilation(inner, structure=cross) & ~inner
        if not (halo & ~allowed).any():
            return inner
        inner = ndimage.binary_erosion(inner, structure=cross)
    raise InvalidSpecError("phantom geometry never isolated the inner blob")


def _layout_mammo4(w: int, h: int, rng: np.random.Generator) -> np.ndarray:
    ny, nx = np.mgrid[0:h, 0:w]
    ny = ny / (h - 1)
    nx = nx / (w - 1)
    disc_r = rng.uniform(0.55, 0.65)
    wedge = rng.uniform(0.75, 0.85)
    blob_cx = rng.uniform(0.28, 0.32)
    blob_cy = rng.uniform(0.72, 0.78)
    blob_r = rng.uniform(0.08, 0.10)

    breast = nx**2 + (ny - 0.5) ** 2 <= disc_r**2
    muscle = nx + ny < wedge
    fatty = breast & ~muscle
    dense = (nx - blob_cx) ** 2 + (ny - blob_cy) ** 2 <= blob_r**2
    dense = _shrink_until_isolated(dense & fatty, fatty)

    truth = np.zeros((h, w), dtype=np.int32)
    truth[fatty] = 2
    truth[muscle] = 1
    truth[dense] = 3
    return truth


def _layout_stripes(w: int, h: int, n: int, rng: np.random.Generator) -> np.ndarray:
    edges = []
    jitter = max(0, w // (6 * n))
    prev = 0
    for i in range(1, n):
        base = round(i * w / n)
        lo = max(prev + 1, base - jitter)
        hi = min(w - (n - i), base + jitter)
        edge = int(rng.integers(lo, hi + 1)) if hi > lo else lo
        edges.append(edge)
        prev = edge
    cols = np.searchsorted(np.array(edges), np.arange(w), side="right")
    return np.broadcast_to(cols, (h, w)).astype(np.int32)


def _layout_nested(w: int, h: int, rng: np.random.Generator) -> np.ndarray:
    ny, nx = np.mgrid[0:h, 0:w]
    ny = ny / (h - 1)
    nx = nx / (w - 1)
    cy = rng.uniform(0.45, 0.55)
    cx = rng.uniform(0.45, 0.55)
    r_outer = rng.uniform(0.30, 0.38)
    r_inner = rng.uniform(0.12, 0.18)
    d2 = (nx - cx) ** 2 + (ny - cy) ** 2
    ring = d2 <= r_outer**2
    core = _shrink_until_isolated(d2 <= r_inner**2, ring)
    truth = np.zeros((h, w), dtype=np.int32)
    truth[ring] = 1
    truth[core] = 2
    return truth


def generate_phantom(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Build (gray image, ground-truth class map) for a phantom spec.

    Deterministic for a fixed spec; pixel noise is Gaussian, truncated to
    [0, 255].
    """
    means = _validate(spec)
    geom_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)
    geom_rng = np.random.default_rng(geom_seq)
    noise_rng = np.random.default_rng(noise_seq)

    if spec.layout == "mammo4":
        truth = _layout_mammo4(spec.width, spec.height, geom_rng)
    elif spec.layout == "nested":
        truth = _layout_nested(spec.width, spec.height, geom_rng)
    else:
        truth = _layout_stripes(spec.width, spec.height, spec.n_stripes, geom_rng)

    img = np.asarray(means)[truth]
    img = img + noise_rng.normal(0.0, spec.noise_std, size=img.shape)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return img, truth


def phantom_kb(spec: PhantomSpec) -> KnowledgeBase:
    """Knowledge base matching a phantom: prototypes set to the class means."""
    means = _validate(spec)
    std = max(spec.noise_std, 1.0)
    names = spec.class_names()
    classes = tuple(
        ThematicClass(i, name, float(m), std) for i, (name, m) in enumerate(zip(names, means))
    )

    if spec.layout == "mammo4":
        bg, mus, fat, dense = names
        neighbors = {
            frozenset((bg, mus)),
            frozenset((bg, fat)),
            frozenset((mus, fat)),
            frozenset((dense, mus)),
            frozenset((dense, fat)),
        }
        inclusions = {(dense, fat)}
        configurations = (
            ValidConfiguration(bg, frozenset((mus, fat))),
            ValidConfiguration(mus, frozenset((bg, fat))),
            ValidConfiguration(fat, frozenset((bg, mus))),
            ValidConfiguration(fat, frozenset((bg, dense))),
            ValidConfiguration(fat, frozenset((mus, dense))),
            ValidConfiguration(fat, frozenset((bg, mus, dense))),
            ValidConfiguration(dense, frozenset((fat,))),
            ValidConfiguration(dense, frozenset((mus, fat))),
        )
    elif spec.layout == "nested":
        bg, ring, core = names
        neighbors = {frozenset((bg, ring)), frozenset((ring, core))}
        inclusions = {(ring, bg), (core, ring)}
        configurations = (
            ValidConfiguration(bg, frozenset((ring,))),
            ValidConfiguration(ring, frozenset((bg,))),
            ValidConfiguration(ring, frozenset((core,))),
            ValidConfiguration(ring, frozenset((bg, core))),
            ValidConfiguration(core, frozenset((ring,))),
        )
    else:
        neighbors = {frozenset((names[i], names[i + 1])) for i in range(len(names) - 1)}
        inclusions = set()
        configurations = []
        for i, name in enumerate(names):
            ctx = {names[j] for j in (i - 1, i + 1) if 0 <= j < len(names)}
            configurations.append(ValidConfiguration(name, frozenset(ctx)))
        configurations = tuple(configurations)

    return KnowledgeBase(
        classes=classes,
        relations=SpatialRelations(frozenset(neighbors), frozenset(inclusions)),
        configurations=configurations,
    )


def write_phantom(spec: PhantomSpec, outdir: str | Path) -> dict[str, Path]:
    """Write image.pgm, truth.pgm and phantom.kb into a directory."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    img, truth = generate_phantom(spec)
    paths = {
        "image": outdir / "image.pgm",
        "truth": outdir / "truth.pgm",
        "kb": outdir / "phantom.kb",
    }
    write_pgm(img, paths["image"])
    write_pgm(truth.astype(np.uint8), paths["truth"])
    write_kb(phantom_kb(spec), paths["kb"])
    return paths


def pixel_accuracy(pred: np.ndarray, truth: np.ndarray, ignore_unlabeled: bool = False) -> float:
    """Fraction of pixels whose predicted class matches the truth.

    With ignore_unlabeled=True, UNLABELED pixels leave the denominator; an
    empty denominator counts as 1.0 (vacuously correct).
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionMismatchError(f"prediction {pred.shape} vs truth {truth.shape}")
    if ignore_unlabeled:
        mask = pred != UNLABELED
        if not mask.any():
            return 1.0
        return float(np.mean(pred[mask] == truth[mask]))
    return float(np.mean(pred == truth))
