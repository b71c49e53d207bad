"""Procedural road scenes in two visual domains.

A scene is a pinhole camera above a flat ground plane, populated with
fronto-parallel box occluders. The same geometry is rendered either in a
clean "synthetic" style or in a "pseudo_real" style (different palette,
sensor noise, blur), so the two domains are distribution-distinct while
sharing exact depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

DOMAIN_STYLES = ("synthetic", "pseudo_real")
PATTERN_STYLES = ("scanline", "uniform")

# camera constants shared by every scene
CAM_HEIGHT = 1.65
HORIZON_FRACTION = 0.4
SKY_BAND_FRACTION = 0.2
MAX_DENSITY = 0.999


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    height: int = 64
    width: int = 64
    d_min: float = 1.0
    d_max: float = 80.0
    object_count_range: tuple[int, int] = (1, 4)
    sparsity_density: float = 0.04
    domain_style: str = "synthetic"

    def __post_init__(self):
        if self.height < 16 or self.width < 16:
            raise ValueError(f"scene must be at least 16x16, got {self.height}x{self.width}")
        if not self.d_min < self.d_max:
            raise ValueError(f"d_min ({self.d_min}) must be below d_max ({self.d_max})")
        if not 0.0 < self.sparsity_density < 1.0:
            raise ValueError(f"sparsity_density must lie in (0, 1), got {self.sparsity_density}")
        lo, hi = self.object_count_range
        if lo < 0 or hi < lo:
            raise ValueError(f"bad object_count_range {self.object_count_range}")
        if self.domain_style not in DOMAIN_STYLES:
            raise ValueError(f"domain_style must be one of {DOMAIN_STYLES}, got {self.domain_style!r}")

    @property
    def focal(self) -> float:
        return float(self.width)

    @property
    def horizon(self) -> float:
        return HORIZON_FRACTION * self.height

    @property
    def sky_rows(self) -> int:
        return int(SKY_BAND_FRACTION * self.height)


def ground_plane_depth(cfg: SceneConfig) -> np.ndarray:
    """Unclamped ground depth per row (inf at or above the horizon), float64."""
    rows = np.arange(cfg.height, dtype=np.float64) + 0.5
    offset = rows - cfg.horizon
    with np.errstate(divide="ignore"):
        depth = np.where(offset > 0, CAM_HEIGHT * cfg.focal / offset, np.inf)
    return depth


def _place_boxes(cfg: SceneConfig, rng: np.random.Generator):
    n = int(rng.integers(cfg.object_count_range[0], cfg.object_count_range[1] + 1))
    boxes = []
    for _ in range(n):
        z = float(rng.uniform(max(cfg.d_min * 3, 4.0), min(cfg.d_max * 0.5, 40.0)))
        lateral = float(rng.uniform(-0.45, 0.45)) * z
        width = float(rng.uniform(1.5, 4.5))
        tall = float(rng.uniform(1.2, 4.0))
        colour = rng.uniform(0.15, 0.95, size=3)
        boxes.append((z, lateral, width, tall, colour))
    # painter's order: far to near so near boxes overwrite
    boxes.sort(key=lambda b: -b[0])
    return boxes


def generate_scene(cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """Render ``(rgb, depth)`` for ``cfg``.

    ``rgb`` is float32 HxWx3 in [0, 1]; ``depth`` is float32 HxW meters with
    0 marking sky and anything beyond ``d_max``. Pure function of ``cfg``.
    """
    rng = np.random.default_rng(cfg.seed)
    h, w = cfg.height, cfg.width
    rows = np.arange(h, dtype=np.float64)[:, None] + 0.5
    cols = np.arange(w, dtype=np.float64)[None, :] + 0.5
    cx = w / 2.0

    ground = np.broadcast_to(ground_plane_depth(cfg)[:, None], (h, w)).copy()
    depth = ground.copy()
    label = np.where(np.isfinite(ground), 1, 0)  # 0 sky, 1 ground, 2+ box index

    colours = []
    for i, (z, lateral, bw, tall, colour) in enumerate(_place_boxes(cfg, rng)):
        left = cx + cfg.focal * (lateral - bw / 2) / z
        right = cx + cfg.focal * (lateral + bw / 2) / z
        bottom = cfg.horizon + cfg.focal * CAM_HEIGHT / z
        top = max(cfg.horizon + cfg.focal * (CAM_HEIGHT - tall) / z, cfg.sky_rows)
        face = (cols >= left) & (cols < right) & (rows >= top) & (rows < bottom)
        face = face & (z < depth)
        depth[face] = z
        label[face] = 2 + i
        colours.append(colour)

    depth[~np.isfinite(depth)] = 0.0
    depth[depth > cfg.d_max] = 0.0
    depth[(depth > 0) & (depth < cfg.d_min)] = cfg.d_min
    depth[: cfg.sky_rows] = 0.0

    rgb = _render(cfg, rng, depth, label, colours, rows, cols)
    return rgb, depth.astype(np.float32)


def _render(cfg, rng, depth, label, colours, rows, cols):
    h, w = depth.shape
    rgb = np.empty((h, w, 3), dtype=np.float64)

    sky_t = np.clip(rows / max(cfg.horizon, 1.0), 0, 1)
    sky = np.stack([0.35 + 0.4 * sky_t, 0.55 + 0.3 * sky_t, 0.9 + 0.0 * sky_t], axis=-1)
    rgb[:] = np.broadcast_to(sky, (h, 1, 3))

    # ground texture: lane stripes and checker in world coordinates
    gmask = label == 1
    z = np.where(gmask, np.where(depth > 0, depth, cfg.d_max), 1.0)
    world_x = (cols - w / 2.0) * z / cfg.focal
    stripe = (np.abs(np.mod(world_x + 1.75, 3.5) - 1.75) < 0.12).astype(np.float64)
    checker = (np.floor(z / 4.0) % 2) * 0.06
    tone = 0.38 + checker + 0.45 * stripe
    rgb[gmask] = np.stack([tone, tone, tone * 0.95], axis=-1)[gmask]

    for i, colour in enumerate(colours):
        m = label == 2 + i
        if not m.any():
            continue
        rgb[m] = colour
        # darker bottom edge reads as a contact shadow
        rgb[m] *= (0.75 + 0.25 * (1 - (rows / h))).repeat(w, axis=1)[m][:, None]

    # depth fog
    fog = np.clip(np.where(depth > 0, depth, cfg.d_max) / cfg.d_max, 0, 1)[..., None]
    rgb = rgb * (1 - 0.5 * fog) + 0.5 * fog * np.array([0.7, 0.75, 0.8])

    if cfg.domain_style == "pseudo_real":
        mix = np.array([[0.85, 0.12, 0.03], [0.10, 0.80, 0.10], [0.05, 0.25, 0.70]])
        rgb = rgb @ mix.T
        rgb = np.clip(rgb, 0, 1) ** 0.8 * np.array([1.05, 0.95, 0.82])
        rgb = ndimage.gaussian_filter(rgb, sigma=(0.7, 0.7, 0))
        rgb = rgb + rng.normal(0.0, 0.03, size=rgb.shape)
    return np.clip(rgb, 0.0, 1.0).astype(np.float32)


def sample_sparsity_pattern(
    generator_seed: int,
    height: int,
    width: int,
    density: float = 0.04,
    style: str = "scanline",
    rows: tuple[int, int] | None = None,
) -> np.ndarray:
    """Boolean validity pattern with ``density`` expected valid pixels.

    ``scanline`` mimics a spinning LiDAR: a fixed set of evenly spaced beam
    rows inside ``rows`` (default: the whole image), each sampling every
    other column, with per-frame point dropout and occasional one-row
    vertical jitter. ``uniform`` is i.i.d. Bernoulli over the whole image.
    The density is always relative to the full ``height * width``.
    """
    if not (0.0 < density < 1.0 or density == 1.0):
        raise ValueError(f"density must lie in (0, 1), got {density}")
    density = min(density, MAX_DENSITY)
    if style not in PATTERN_STYLES:
        raise ValueError(f"style must be one of {PATTERN_STYLES}, got {style!r}")
    rng = np.random.default_rng(generator_seed)

    if style == "uniform":
        return rng.random((height, width)) < density

    start, stop = rows if rows is not None else (0, height)
    span = stop - start
    stride = 2
    wanted = density * height * width
    slots = width // stride
    n_beams = int(np.ceil(wanted / (0.9 * slots)))
    if n_beams < 1 or n_beams * 3 > span:
        # beams would touch each other; no scanline structure left to imitate
        return rng.random((height, width)) < density
    keep = wanted / (n_beams * slots)

    beam_rows = start + np.floor((np.arange(n_beams) + 0.5) * span / n_beams).astype(int)
    mask = np.zeros((height, width), dtype=bool)
    for j, r in enumerate(beam_rows):
        c = np.arange(j % stride, stride * slots, stride)
        c = c[rng.random(c.size) < keep]
        jitter = rng.choice([-1, 0, 1], size=c.size, p=[0.05, 0.9, 0.05])
        rr = np.clip(r + jitter, start, stop - 1)
        mask[rr, c] = True
    return mask


def lidar_rows(cfg: SceneConfig) -> tuple[int, int]:
    """Row interval where the ground lies within ``[d_min, d_max]``."""
    ground = ground_plane_depth(cfg)
    hit = np.nonzero(ground <= cfg.d_max)[0]
    return int(hit[0]), cfg.height


def semi_dense_mask(
    generator_seed: int,
    depth: np.ndarray,
    density: float = 0.30,
    band_fraction: float = HORIZON_FRACTION,
) -> np.ndarray:
    """Holes pattern imitating accumulated-scan ground truth.

    The upper ``band_fraction`` of rows is never valid. Below it, pixels are
    kept by smoothed noise thresholding so that missing regions come in blobs,
    and only where ``depth`` has a measurement.
    """
    rng = np.random.default_rng(generator_seed)
    h, w = depth.shape
    band = int(np.ceil(band_fraction * h))
    noise = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma=1.5)
    lower = noise[band:]
    target = min(density * h / max(h - band, 1), 1.0)
    if lower.size:
        thresh = np.quantile(lower, 1.0 - target) if target < 1.0 else -np.inf
    mask = np.zeros((h, w), dtype=bool)
    if lower.size:
        mask[band:] = lower >= thresh
    return mask & (depth != 0)
