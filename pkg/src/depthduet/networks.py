"""Sparse generator, dense generator and conditional discriminators.

Every generator is U-shaped: ``depth_levels`` stride-2 encoder stages, a
mirrored transposed-conv decoder, and channel concatenation from each
encoder stage into the decoder stage at the same resolution. Outputs are
normalized depth in [0, 1] (multiply by ``d_max`` for meters).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from .errors import ShapeMismatchError

LEAKY_SLOPE = 0.2
# "clamp" can emit exact zeros, which a sigmoid never does
OUTPUT_ACTIVATIONS = ("sigmoid", "clamp")


@dataclass(frozen=True)
class NetworkConfig:
    base_width: int = 16
    depth_levels: int = 4
    leaky_slope: float = LEAKY_SLOPE
    use_residual_encoder: bool = False
    input_channels: int = 3
    output_channels: int = 1
    skip_connections: bool = True
    output_activation: str = "sigmoid"

    def __post_init__(self):
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        if self.depth_levels < 1:
            raise ValueError(f"depth_levels must be >= 1, got {self.depth_levels}")
        if self.base_width < 1:
            raise ValueError(f"base_width must be >= 1, got {self.base_width}")

    def width(self, level: int) -> int:
        return self.base_width * 2 ** min(level, 3)

    @property
    def factor(self) -> int:
        return 2**self.depth_levels

    def to_dict(self) -> dict:
        return asdict(self)


def _down(c_in, c_out, slope, norm=True):
    layers = [nn.Conv2d(c_in, c_out, 4, stride=2, padding=1, bias=not norm)]
    if norm:
        layers.append(nn.BatchNorm2d(c_out))
    layers.append(nn.LeakyReLU(slope))
    return nn.Sequential(*layers)


def _up(c_in, c_out, slope):
    return nn.Sequential(
        nn.ConvTranspose2d(c_in, c_out, 4, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(c_out),
        nn.LeakyReLU(slope),
    )


class ResidualBlock(nn.Module):
    """``x + conv-bn-lrelu-conv-bn(x)``; the identity when the convs are zero."""

    def __init__(self, channels: int, slope: float = LEAKY_SLOPE):
        super().__init__()
        self.branch = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(channels),
            nn.LeakyReLU(slope),
            nn.Conv2d(channels, channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(channels),
        )

    def forward(self, x):
        return x + self.branch(x)


class Network(nn.Module):
    """Common base: config echo, divisibility check, parameter count."""

    def __init__(self, cfg: NetworkConfig, kind: str):
        super().__init__()
        self.cfg = cfg
        self.kind = kind

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    @property
    def mode(self) -> str:
        return "train" if self.training else "eval"

    def _check_input(self, x: torch.Tensor):
        if x.dim() != 4 or x.shape[1] != self.cfg.input_channels:
            raise ShapeMismatchError(
                f"{self.kind} expects Bx{self.cfg.input_channels}xHxW input, got {tuple(x.shape)}"
            )
        h, w = x.shape[-2:]
        f = self.cfg.factor
        if h % f or w % f:
            raise ShapeMismatchError(f"{self.kind}: input {h}x{w} not divisible by 2^{self.cfg.depth_levels}={f}")


class UNetGenerator(Network):
    def __init__(self, cfg: NetworkConfig, kind: str = "generator"):
        super().__init__(cfg, kind)
        L, s = cfg.depth_levels, cfg.leaky_slope

        c_in = cfg.input_channels
        if cfg.use_residual_encoder:
            self.stem = nn.Sequential(
                nn.Conv2d(c_in, cfg.width(0), 3, padding=1, bias=False),
                nn.BatchNorm2d(cfg.width(0)),
                nn.LeakyReLU(s),
            )
            c_in = cfg.width(0)
        else:
            self.stem = nn.Identity()

        enc = []
        for i in range(L):
            stage = [ResidualBlock(c_in, s)] if cfg.use_residual_encoder else []
            stage.append(_down(c_in, cfg.width(i), s))
            enc.append(nn.Sequential(*stage))
            c_in = cfg.width(i)
        self.encoder = nn.ModuleList(enc)

        dec = []
        for j in range(L - 1, 0, -1):
            dec.append(_up(self._dec_in(j), cfg.width(j - 1), s))
        self.decoder = nn.ModuleList(dec)
        self.head = nn.ConvTranspose2d(self._dec_in(0), cfg.output_channels, 4, stride=2, padding=1)

    def _dec_in(self, j: int) -> int:
        # stage j consumes the level-j feature map; below the bottleneck it is
        # the previous decoder output concatenated with encoder level j
        c = self.cfg.width(j)
        if j < self.cfg.depth_levels - 1 and self.cfg.skip_connections:
            c *= 2
        return c

    def forward(self, x):
        self._check_input(x)
        h = self.stem(x)
        feats = []
        for stage in self.encoder:
            h = stage(h)
            feats.append(h)
        L = self.cfg.depth_levels
        for k, stage in enumerate(self.decoder):
            j = L - 1 - k
            if j < L - 1 and self.cfg.skip_connections:
                h = torch.cat([h, feats[j]], dim=1)
            h = stage(h)
        if L > 1 and self.cfg.skip_connections:
            h = torch.cat([h, feats[0]], dim=1)
        out = self.head(h)
        if self.cfg.output_activation == "clamp":
            return out.clamp(0.0, 1.0)
        return torch.sigmoid(out)


class Discriminator(Network):
    """Conditional DCGAN-style critic over ``cat(rgb, depth)``.

    Returns one probability per sample; ``logits`` exposes the raw score.
    """

    def __init__(self, cfg: NetworkConfig):
        super().__init__(cfg, "discriminator")
        s = cfg.leaky_slope
        layers = []
        c_in = cfg.input_channels
        for i in range(cfg.depth_levels):
            layers.append(_down(c_in, cfg.width(i), s, norm=i > 0))
            c_in = cfg.width(i)
        self.features = nn.Sequential(*layers)
        self.head = nn.Conv2d(c_in, 1, 3, padding=1)

    def logits(self, rgb, depth):
        x = torch.cat([rgb, depth], dim=1)
        self._check_input(x)
        return self.head(self.features(x)).mean(dim=(1, 2, 3))

    def forward(self, rgb, depth):
        return torch.sigmoid(self.logits(rgb, depth))


def build_sparse_generator(cfg: NetworkConfig | None = None) -> UNetGenerator:
    cfg = cfg or NetworkConfig()
    if cfg.input_channels != 3 or cfg.output_channels != 1:
        raise ValueError("the sparse generator maps 3 RGB channels to 1 depth channel")
    return UNetGenerator(cfg, "sparse generator")


def build_dense_generator(cfg: NetworkConfig | None = None) -> UNetGenerator:
    cfg = cfg or NetworkConfig(input_channels=1, use_residual_encoder=True)
    if cfg.input_channels != 1 or cfg.output_channels != 1:
        raise ValueError("the dense generator maps 1 sparse depth channel to 1 dense channel")
    if not cfg.use_residual_encoder:
        raise ValueError("the dense generator requires use_residual_encoder=True")
    return UNetGenerator(cfg, "dense generator")


def build_discriminator(cfg: NetworkConfig | None = None) -> Discriminator:
    cfg = cfg or NetworkConfig(input_channels=4)
    if cfg.input_channels != 4:
        raise ValueError("the discriminator sees RGB concatenated with depth (4 channels)")
    return Discriminator(cfg)


def forward_full(sg: nn.Module, dg: nn.Module, x: torch.Tensor, d_max: float = 80.0):
    """``(SG(x), DG(SG(x)))`` in meters."""
    sparse = sg(x)
    dense = dg(sparse)
    return sparse * d_max, dense * d_max
