"""Validity masks, sparsification and mixed-domain sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeMismatchError

from .scenes import SceneConfig, generate_scene, lidar_rows, sample_sparsity_pattern, semi_dense_mask

DOMAINS = ("synthetic", "real")


def _check_same_shape(*arrays, names):
    shapes = [a.shape[:2] for a in arrays]
    if len(set(shapes)) != 1:
        desc = ", ".join(f"{n}={s}" for n, s in zip(names, shapes))
        raise ShapeMismatchError(f"shape mismatch: {desc}")


def validity_mask(depth: np.ndarray) -> np.ndarray:
    """1 where ``depth`` holds a measurement, 0 where it is exactly zero."""
    return np.asarray(depth) != 0


def sparsify(dense: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep ``dense`` where ``mask`` is set and zero it elsewhere."""
    dense = np.asarray(dense)
    mask = np.asarray(mask)
    _check_same_shape(dense, mask, names=("dense", "mask"))
    return np.where(mask.astype(bool), dense, np.zeros((), dtype=dense.dtype))


@dataclass(frozen=True)
class Sample:
    rgb: np.ndarray  # HxWx3 float32 in [0, 1]
    sparse_gt: np.ndarray  # HxW meters
    dense_gt: np.ndarray  # HxW meters
    dense_mask: np.ndarray  # HxW bool
    domain: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.sparse_gt.shape


def make_sample(
    scene: tuple[np.ndarray, np.ndarray],
    domain: str,
    pattern: np.ndarray,
    real_holes: np.ndarray | None = None,
) -> Sample:
    rgb, dense = scene
    if domain not in DOMAINS:
        raise ValueError(f"domain must be one of {DOMAINS}, got {domain!r}")
    _check_same_shape(rgb, dense, pattern, names=("rgb", "depth", "pattern"))
    pattern = np.asarray(pattern, dtype=bool)

    if domain == "synthetic":
        return Sample(rgb, sparsify(dense, pattern), dense, validity_mask(dense), domain)

    if real_holes is None:
        raise ValueError("real samples need a real_holes mask")
    _check_same_shape(dense, real_holes, names=("depth", "real_holes"))
    holes = np.asarray(real_holes, dtype=bool)
    # the current scan is part of the accumulated ground truth
    sparse = sparsify(dense, pattern & holes)
    return Sample(rgb, sparse, sparsify(dense, holes), holes, domain)


def toy_sample(
    seed: int,
    domain: str = "synthetic",
    height: int = 64,
    width: int = 64,
    density: float = 0.04,
    holes_density: float = 0.30,
    **scene_kwargs,
) -> Sample:
    """One fully procedural sample; the building block for toy datasets."""
    style = "synthetic" if domain == "synthetic" else "pseudo_real"
    cfg = SceneConfig(
        seed=seed, height=height, width=width, sparsity_density=density, domain_style=style, **scene_kwargs
    )
    rgb, depth = generate_scene(cfg)
    pattern = sample_sparsity_pattern(seed + 1_000_003, height, width, density, rows=lidar_rows(cfg))
    if domain == "synthetic":
        return make_sample((rgb, depth), domain, pattern)
    holes = semi_dense_mask(seed + 2_000_003, depth, holes_density) | (pattern & (depth != 0))
    return make_sample((rgb, depth), domain, pattern, holes)


def toy_dataset(
    count: int, synthetic_ratio: float = 0.5, seed: int = 0, **kwargs
) -> list[Sample]:
    """``round(count * synthetic_ratio)`` synthetic samples, then real ones."""
    n_syn = int(round(count * synthetic_ratio))
    return [
        toy_sample(seed * 100_003 + i, "synthetic" if i < n_syn else "real", **kwargs)
        for i in range(count)
    ]


@dataclass(frozen=True)
class Batch:
    rgb: np.ndarray  # Bx3xHxW
    sparse: np.ndarray  # Bx1xHxW meters
    dense: np.ndarray  # Bx1xHxW meters
    mask: np.ndarray  # Bx1xHxW bool
    domains: tuple[str, ...]

    @classmethod
    def collate(cls, samples: Sequence[Sample]) -> "Batch":
        if not samples:
            raise ValueError("cannot collate an empty batch")
        _check_same_shape(*(s.sparse_gt for s in samples), names=[f"sample{i}" for i in range(len(samples))])
        return cls(
            rgb=np.stack([s.rgb.transpose(2, 0, 1) for s in samples]).astype(np.float32),
            sparse=np.stack([s.sparse_gt[None] for s in samples]).astype(np.float32),
            dense=np.stack([s.dense_gt[None] for s in samples]).astype(np.float32),
            mask=np.stack([s.dense_mask[None] for s in samples]).astype(bool),
            domains=tuple(s.domain for s in samples),
        )

    def __len__(self):
        return len(self.domains)

    @property
    def is_real(self) -> np.ndarray:
        return np.array([d == "real" for d in self.domains])


def mixed_batch(
    dataset: Sequence[Sample],
    batch_size: int,
    synthetic_ratio: float = 0.5,
    seed: int | np.random.Generator = 0,
) -> Batch:
    """Draw each slot's domain independently, then a sample from that pool."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    if not 0.0 <= synthetic_ratio <= 1.0:
        raise ValueError(f"synthetic_ratio must lie in [0, 1], got {synthetic_ratio}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pools = {d: [s for s in dataset if s.domain == d] for d in DOMAINS}
    if synthetic_ratio > 0 and not pools["synthetic"]:
        raise ValueError("synthetic_ratio > 0 but the dataset has no synthetic samples")
    if synthetic_ratio < 1 and not pools["real"]:
        raise ValueError("synthetic_ratio < 1 but the dataset has no real samples")

    picks = []
    for syn in rng.random(batch_size) < synthetic_ratio:
        pool = pools["synthetic" if syn else "real"]
        picks.append(pool[int(rng.integers(len(pool)))])
    return Batch.collate(picks)
