"""Reconstruction, adversarial and smoothness objectives.

All depth tensors are ``Bx1xHxW`` normalized to [0, 1]; RGB is ``Bx3xHxW``.
L1 terms are per-pixel means (per valid pixel for the masked variant) so the
weights do not depend on resolution.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import torch

from .errors import ShapeMismatchError

EPS = 1e-7


class NonFiniteLossError(FloatingPointError):
    def __init__(self, component: str, step: int | None = None):
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"loss component {component!r} is not finite{where}")
        self.component = component
        self.step = step


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def rec_sg_loss(pred: torch.Tensor, y_s: torch.Tensor) -> torch.Tensor:
    """Mean absolute error against sparse ground truth, zeros included."""
    _same_shape(pred, y_s, "rec_sg_loss")
    return (pred - y_s).abs().mean()


def rec_dg_loss_synthetic(pred: torch.Tensor, y_d: torch.Tensor) -> torch.Tensor:
    _same_shape(pred, y_d, "rec_dg_loss_synthetic")
    return (pred - y_d).abs().mean()


def rec_dg_loss_real(pred: torch.Tensor, y_d: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """``sum |M * pred - y_d| / max(1, sum M)``."""
    _same_shape(pred, y_d, "rec_dg_loss_real")
    _same_shape(pred, mask, "rec_dg_loss_real")
    m = mask.to(pred.dtype)
    if torch.any((y_d != 0) & (m == 0)):
        raise ValueError("rec_dg_loss_real: ground truth is nonzero where the mask is 0")
    return (m * pred - y_d).abs().sum() / m.sum().clamp(min=1.0)


def rec_dg_loss(pred, y_d, mask, is_real) -> torch.Tensor:
    """Per-sample reconstruction averaged over a mixed batch.

    Synthetic samples use the unmasked error, real samples the masked one.
    """
    _same_shape(pred, y_d, "rec_dg_loss")
    m = mask.to(pred.dtype)
    is_real = torch.as_tensor(is_real, dtype=torch.bool, device=pred.device)
    syn = (pred - y_d).abs().flatten(1).mean(1)
    real = (m * pred - y_d).abs().flatten(1).sum(1) / m.flatten(1).sum(1).clamp(min=1.0)
    return torch.where(is_real, real, syn).mean()


def d_loss_from_probs(p_real: torch.Tensor, p_fake: torch.Tensor) -> torch.Tensor:
    p_real = p_real.clamp(EPS, 1 - EPS)
    p_fake = p_fake.clamp(EPS, 1 - EPS)
    return -(torch.log(p_real) + torch.log1p(-p_fake)).mean()


def g_loss_from_probs(p_fake: torch.Tensor) -> torch.Tensor:
    return -torch.log(p_fake.clamp(EPS, 1 - EPS)).mean()


def _finite(t, what):
    if not torch.all(torch.isfinite(t)):
        raise NonFiniteLossError(what)
    return t


def adversarial_d_loss(d, x, y_real, y_fake) -> torch.Tensor:
    """Discriminator cross-entropy; the fake branch is detached from the generator."""
    p_real = _finite(d(x, y_real), "discriminator output (real)")
    p_fake = _finite(d(x, y_fake.detach()), "discriminator output (fake)")
    return d_loss_from_probs(p_real, p_fake)


def adversarial_g_loss(d_s, d_r, x, y_fake, is_real) -> torch.Tensor:
    """Non-saturating generator loss, summed over the domains present.

    Synthetic samples are judged by ``d_s``, real ones by ``d_r``; each
    domain contributes the batch mean of ``-log D(x, fake)`` over its samples.
    """
    is_real = torch.as_tensor(is_real, dtype=torch.bool, device=y_fake.device)
    total = y_fake.new_zeros(())
    for d, sel in ((d_s, ~is_real), (d_r, is_real)):
        if sel.any():
            p = _finite(d(x[sel], y_fake[sel]), "discriminator output (generator pass)")
            total = total + g_loss_from_probs(p)
    return total


def _diffs(t, periodic):
    if periodic:
        return torch.roll(t, -1, dims=-1) - t, torch.roll(t, -1, dims=-2) - t
    return t[..., :, 1:] - t[..., :, :-1], t[..., 1:, :] - t[..., :-1, :]


def smoothness_loss(pred, x, edge_sign: float = -1.0, periodic: bool = False) -> torch.Tensor:
    """Edge-aware first-order smoothness of ``pred``.

    ``mean(|d_h pred| * exp(s*|d_h I|)) + mean(|d_v pred| * exp(s*|d_v I|))``
    with forward differences, ``I`` the channel-mean of ``x`` and ``s`` the
    ``edge_sign`` (-1 damps smoothing across image edges, +1 is the literal
    positive-exponent form). ``periodic`` wraps the differences around.
    """
    if pred.shape[-2:] != x.shape[-2:] or pred.shape[0] != x.shape[0]:
        raise ShapeMismatchError(f"smoothness_loss: shape mismatch {tuple(pred.shape)} vs {tuple(x.shape)}")
    intensity = x.mean(dim=1, keepdim=True)
    dph, dpv = _diffs(pred, periodic)
    dih, div = _diffs(intensity, periodic)
    wh = torch.exp(edge_sign * dih.abs())
    wv = torch.exp(edge_sign * div.abs())
    return (dph.abs() * wh).mean() + (dpv.abs() * wv).mean()


@dataclass(frozen=True)
class LossWeights:
    lambda_rec_sg: float = 150.0
    lambda_rec_dg: float = 100.0
    lambda_adv: float = 10.0
    lambda_s: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def scaled(self, factor: float) -> "LossWeights":
        return LossWeights(*(factor * getattr(self, f.name) for f in fields(self)))


GENERATOR_TERMS = {
    "rec_sg": "lambda_rec_sg",
    "rec_dg": "lambda_rec_dg",
    "adv_g": "lambda_adv",
    "smooth": "lambda_s",
}


@dataclass(frozen=True)
class LossReport:
    rec_sg: float = 0.0
    rec_dg: float = 0.0
    adv_g: float = 0.0
    adv_d_s: float = 0.0
    adv_d_r: float = 0.0
    smooth: float = 0.0
    total: float = 0.0

    CSV_HEADER = ("step", "rec_sg", "rec_dg", "adv_g", "adv_d_s", "adv_d_r", "smooth", "total")

    def csv_row(self, step: int) -> list:
        return [step, *(repr(float(v)) for v in asdict(self).values())]

    def as_dict(self) -> dict:
        return asdict(self)


def combine(components: dict, weights: LossWeights):
    """Weighted sum of the generator-side terms (missing terms count as 0)."""
    total = 0.0
    for name, lam in GENERATOR_TERMS.items():
        if name in components:
            total = total + getattr(weights, lam) * components[name]
    return total


def total_loss(components: dict, weights: LossWeights = LossWeights()) -> LossReport:
    """Check every component is finite and build the report.

    ``components`` maps names from ``LossReport`` (minus ``total``) to scalars
    or 0-d tensors.
    """
    values = {}
    for name, v in components.items():
        if name not in LossReport.CSV_HEADER[1:-1]:
            raise KeyError(f"unknown loss component {name!r}")
        v = float(v.detach()) if torch.is_tensor(v) else float(v)
        if not math.isfinite(v):
            raise NonFiniteLossError(name)
        values[name] = v
    return LossReport(**values, total=float(combine(values, weights)))
