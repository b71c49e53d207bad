"""KITTI-style depth PNGs and on-disk dataset layout.

Depth maps are single-channel 16-bit PNGs holding ``round(meters * 256)``,
with 0 meaning "no measurement". A dataset root looks like::

    root/
      manifest.txt      # "id,domain" per line, no header
      rgb/<id>.png      # 8-bit RGB
      sparse/<id>.png   # 16-bit depth
      dense/<id>.png    # 16-bit depth
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .samples import DOMAINS, Sample, validity_mask

DEPTH_SCALE = 256.0
MAX_RAW = 65535
MAX_DEPTH = MAX_RAW / DEPTH_SCALE
MANIFEST = "manifest.txt"


class DepthFormatError(ValueError):
    """A file does not follow the 16-bit single-channel depth convention."""


class EmptyDatasetError(ValueError):
    pass


def load_depth_png(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such depth file: {path}")
    with Image.open(path) as im:
        bands = im.getbands()
        if len(bands) != 1:
            raise DepthFormatError(f"{path}: expected 1 channel, found {len(bands)} ({im.mode})")
        if im.mode not in ("I;16", "I;16B", "I;16L"):
            raise DepthFormatError(f"{path}: expected 16-bit depth, found mode {im.mode}")
        raw = np.array(im, dtype=np.uint16)
    return raw.astype(np.float32) / np.float32(DEPTH_SCALE)


def depth_to_raw(depth: np.ndarray) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(depth)):
        raise ValueError("depth contains non-finite values")
    if depth.min(initial=0.0) < 0:
        raise ValueError("depth contains negative values")
    if depth.max(initial=0.0) > MAX_DEPTH:
        raise ValueError(f"depth {depth.max():.3f} m exceeds the 16-bit range ({MAX_DEPTH:.3f} m)")
    return np.clip(np.round(depth * DEPTH_SCALE), 0, MAX_RAW).astype(np.uint16)


def save_depth_png(depth: np.ndarray, path) -> None:
    raw = depth_to_raw(depth)
    if raw.ndim != 2:
        raise ValueError(f"depth must be HxW, got shape {raw.shape}")
    Image.fromarray(raw).save(path, format="PNG")


def quantize_depth(depth: np.ndarray) -> np.ndarray:
    """What a depth map becomes after a PNG round trip."""
    return depth_to_raw(depth).astype(np.float32) / np.float32(DEPTH_SCALE)


def load_rgb_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.array(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def save_rgb_png(rgb: np.ndarray, path) -> None:
    arr = np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def fit_mask(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    """Crop (centered) or zero-pad ``mask`` to ``height x width``."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros((height, width), dtype=bool)
    h, w = mask.shape
    sh, dh = max((h - height) // 2, 0), max((height - h) // 2, 0)
    sw, dw = max((w - width) // 2, 0), max((width - w) // 2, 0)
    ch, cw = min(h, height), min(w, width)
    out[dh : dh + ch, dw : dw + cw] = mask[sh : sh + ch, sw : sw + cw]
    return out


def read_manifest(path) -> list[tuple[str, str]]:
    entries = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or parts[1] not in DOMAINS:
            raise ValueError(f"{path}:{n}: expected 'id,domain', got {line!r}")
        entries.append((parts[0], parts[1]))
    return entries


def write_manifest(path, entries: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sid, domain in entries:
            fh.write(f"{sid},{domain}\n")


def save_dataset(samples: Sequence[Sample], root, ids: Sequence[str] | None = None) -> list[str]:
    root = Path(root)
    for sub in ("rgb", "sparse", "dense"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    ids = list(ids) if ids is not None else [f"{i:06d}" for i in range(len(samples))]
    for sid, s in zip(ids, samples):
        save_rgb_png(s.rgb, root / "rgb" / f"{sid}.png")
        save_depth_png(s.sparse_gt, root / "sparse" / f"{sid}.png")
        save_depth_png(s.dense_gt, root / "dense" / f"{sid}.png")
    write_manifest(root / MANIFEST, [(sid, s.domain) for sid, s in zip(ids, samples)])
    return ids


def load_dataset(root=None) -> list[Sample]:
    """Read every sample listed in ``root/manifest.txt``.

    ``root`` defaults to ``$DEPTHDUET_DATA_ROOT``. The dense mask is the
    validity of the dense depth file.
    """
    if root is None:
        root = os.environ.get("DEPTHDUET_DATA_ROOT")
        if root is None:
            raise ValueError("no dataset root given and DEPTHDUET_DATA_ROOT is unset")
    root = Path(root)
    manifest = root / MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"no manifest at {manifest}")
    samples = []
    for sid, domain in read_manifest(manifest):
        rgb = load_rgb_png(root / "rgb" / f"{sid}.png")
        sparse = load_depth_png(root / "sparse" / f"{sid}.png")
        dense = load_depth_png(root / "dense" / f"{sid}.png")
        samples.append(Sample(rgb, sparse, dense, validity_mask(dense), domain))
    if not samples:
        raise EmptyDatasetError(f"dataset at {root} is empty")
    return samples
