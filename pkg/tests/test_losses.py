import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from depthduet import losses as L
from depthduet.errors import ShapeMismatchError
from depthduet.networks import NetworkConfig, build_discriminator

from oracles import gradient_check, smoothness_reference


def t(a):
    return torch.tensor(a, dtype=torch.float64)[None, None]


class ConstD(torch.nn.Module):
    """Stand-in critic returning fixed probabilities."""

    def __init__(self, real=0.5, fake=0.5):
        super().__init__()
        self.real, self.fake = real, fake

    def forward(self, x, y):
        p = self.real if bool(y.sum() > 0) else self.fake
        return torch.full((y.shape[0],), p, dtype=y.dtype)


# --- reconstruction ---------------------------------------------------------------


def test_rec_sg_examples():
    y = t([[0.0, 0.0], [0.7, 0.8]])
    assert L.rec_sg_loss(y, y) == 0
    assert L.rec_sg_loss(y + 0.1, y).item() == pytest.approx(0.1)
    pred = t([[0.2, 0.0], [0.5, 1.0]])
    # |0.2| + 0 + |-0.2| + |0.2| over 4 pixels
    assert L.rec_sg_loss(pred, y).item() == pytest.approx(0.15, abs=1e-15)


def test_rec_dg_synthetic_examples():
    y = t([[0.1, 0.9], [0.4, 0.0]])
    assert L.rec_dg_loss_synthetic(y, y) == 0
    pred = t([[0.3, 0.9], [0.1, 0.5]])
    assert L.rec_dg_loss_synthetic(pred, y).item() == pytest.approx((0.2 + 0 + 0.3 + 0.5) / 4, abs=1e-15)


def test_rec_dg_real_examples():
    pred, y, m = t([[0.5, 0.5]]), t([[0.3, 0.0]]), t([[1.0, 0.0]])
    assert L.rec_dg_loss_real(pred, y, m).item() == pytest.approx(0.2, abs=1e-15)
    assert L.rec_dg_loss_real(pred, torch.zeros_like(y), torch.zeros_like(m)) == 0


def test_rec_dg_real_reduces_to_synthetic():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = torch.tensor(rng.random((2, 1, 8, 8)))
        y = torch.tensor(rng.random((2, 1, 8, 8)))
        assert L.rec_dg_loss_real(p[:1], y[:1], torch.ones_like(p[:1])) == L.rec_dg_loss_synthetic(p[:1], y[:1])


def test_rec_dg_real_consistency_error():
    with pytest.raises(ValueError, match="nonzero where the mask is 0"):
        L.rec_dg_loss_real(t([[0.5, 0.5]]), t([[0.3, 0.2]]), t([[1.0, 0.0]]))


def test_rec_dg_mixed_batch_is_per_sample_mean():
    rng = np.random.default_rng(1)
    p = torch.tensor(rng.random((2, 1, 4, 4)))
    m = torch.tensor(rng.random((2, 1, 4, 4)) < 0.5)
    y = torch.tensor(rng.random((2, 1, 4, 4))) * m
    mixed = L.rec_dg_loss(p, y, m, [False, True])
    expect = (L.rec_dg_loss_synthetic(p[:1], y[:1]) + L.rec_dg_loss_real(p[1:], y[1:], m[1:])) / 2
    assert mixed.item() == pytest.approx(expect.item(), rel=1e-14)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        L.rec_sg_loss(torch.zeros(1, 1, 2, 2), torch.zeros(1, 1, 2, 3))
    with pytest.raises(ShapeMismatchError):
        L.smoothness_loss(torch.zeros(1, 1, 2, 2), torch.zeros(1, 3, 2, 3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_masked_loss_ignores_unmasked_pixels(seed):
    rng = np.random.default_rng(seed)
    m = torch.tensor(rng.random((1, 1, 6, 6)) < 0.4)
    y = torch.tensor(rng.random((1, 1, 6, 6))) * m
    p = torch.tensor(rng.random((1, 1, 6, 6)))
    q = torch.where(m, p, torch.tensor(rng.normal(0, 100, (1, 1, 6, 6))))
    assert L.rec_dg_loss_real(p, y, m) == L.rec_dg_loss_real(q, y, m)


# --- adversarial --------------------------------------------------------------------


def test_d_loss_values():
    half = torch.tensor([0.5])
    assert L.d_loss_from_probs(half, half).item() == pytest.approx(2 * math.log(2))
    perfect = L.d_loss_from_probs(torch.tensor([1 - 1e-7], dtype=torch.float64), torch.tensor([1e-7], dtype=torch.float64))
    assert perfect.item() == pytest.approx(2e-7, rel=1e-3)
    p = L.d_loss_from_probs(torch.tensor([0.9], dtype=torch.float64), torch.tensor([0.1], dtype=torch.float64))
    assert p.item() == pytest.approx(-2 * math.log(0.9), abs=1e-12)
    assert p.item() == pytest.approx(0.2107, abs=1e-4)


def test_d_loss_clamps_extremes():
    v = L.d_loss_from_probs(torch.tensor([0.0]), torch.tensor([1.0]))
    assert torch.isfinite(v)


def test_g_loss_values():
    assert L.g_loss_from_probs(torch.tensor([0.5])).item() == pytest.approx(math.log(2))
    assert L.g_loss_from_probs(torch.tensor([1 - 1e-7], dtype=torch.float64)).item() < 1e-6


def test_g_loss_sums_domains():
    y = torch.ones(2, 1, 4, 4)
    x = torch.zeros(2, 3, 4, 4)
    v = L.adversarial_g_loss(ConstD(fake=0.5, real=0.5), ConstD(fake=0.25, real=0.25), x, y, [False, True])
    assert v.item() == pytest.approx(math.log(2) + math.log(4), abs=1e-6)
    assert v.item() == pytest.approx(2.0794, abs=1e-4)
    only_syn = L.adversarial_g_loss(ConstD(0.5, 0.5), ConstD(0.25, 0.25), x, y, [False, False])
    assert only_syn.item() == pytest.approx(math.log(2), abs=1e-6)


def test_d_loss_blocks_generator_gradient():
    d = build_discriminator(NetworkConfig(base_width=4, depth_levels=2, input_channels=4))
    x = torch.rand(2, 3, 8, 8)
    fake = torch.rand(2, 1, 8, 8, requires_grad=True)
    L.adversarial_d_loss(d, x, torch.rand(2, 1, 8, 8), fake).backward()
    assert fake.grad is None
    assert any(p.grad is not None for p in d.parameters())


# --- smoothness ------------------------------------------------------------------------


def test_smoothness_constant_prediction():
    x = torch.rand(1, 3, 5, 7)
    assert L.smoothness_loss(torch.full((1, 1, 5, 7), 0.3), x) == 0


def test_smoothness_ramp():
    s = 0.07
    ramp = (torch.arange(6.0) * s).expand(1, 1, 4, 6)
    x = torch.full((1, 3, 4, 6), 0.5)
    assert L.smoothness_loss(ramp, x).item() == pytest.approx(s, rel=1e-6)


@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_smoothness_enumeration(sign):
    pred = np.array([[0.1, 0.5, 0.2], [0.9, 0.4, 0.4]])
    img = np.random.default_rng(4).random((2, 3, 3))
    got = L.smoothness_loss(
        torch.tensor(pred)[None, None], torch.tensor(img).permute(2, 0, 1)[None], edge_sign=sign
    ).item()
    assert got == pytest.approx(smoothness_reference(pred, img, sign), rel=1e-12)


def test_smoothness_edge_weighting_direction():
    # a depth step aligned with an image edge is cheaper under the default sign
    pred = torch.zeros(1, 1, 4, 4)
    pred[..., 2:] = 1.0
    x = torch.zeros(1, 3, 4, 4)
    x[..., 2:] = 1.0
    flat = torch.zeros(1, 3, 4, 4)
    assert L.smoothness_loss(pred, x) < L.smoothness_loss(pred, flat)
    assert L.smoothness_loss(pred, x, edge_sign=1.0) > L.smoothness_loss(pred, flat, edge_sign=1.0)


def test_smoothness_translation_invariance():
    rng = np.random.default_rng(2)
    pred = torch.tensor(rng.random((1, 1, 8, 8)))
    x = torch.tensor(rng.random((1, 3, 8, 8)))
    base = L.smoothness_loss(pred, x, periodic=True)
    for dy, dx in [(1, 0), (0, 3), (5, 2)]:
        moved = L.smoothness_loss(torch.roll(pred, (dy, dx), (2, 3)), torch.roll(x, (dy, dx), (2, 3)), periodic=True)
        assert moved.item() == pytest.approx(base.item(), rel=1e-12)
    # forward differences: interior-only shift of a padded image keeps the value
    big_p = torch.zeros(1, 1, 12, 12, dtype=torch.float64)
    big_x = torch.zeros(1, 3, 12, 12, dtype=torch.float64)
    big_p[..., 2:10, 2:10] = pred
    big_x[..., 2:10, 2:10] = x
    a = L.smoothness_loss(big_p, big_x)
    b = L.smoothness_loss(torch.roll(big_p, (1, 1), (2, 3)), torch.roll(big_x, (1, 1), (2, 3)))
    assert a.item() == pytest.approx(b.item(), rel=1e-12)


# --- total ---------------------------------------------------------------------------------


def test_default_weights():
    w = L.LossWeights()
    assert (w.lambda_rec_sg, w.lambda_rec_dg, w.lambda_adv, w.lambda_s) == (150, 100, 10, 1)


def test_total_loss_arithmetic():
    assert L.total_loss({"rec_sg": 0, "rec_dg": 0, "adv_g": 0, "smooth": 0}).total == 0
    r = L.total_loss({"rec_sg": 0.1, "rec_dg": 0.2, "adv_g": 0.3, "smooth": 0.4})
    assert r.total == pytest.approx(15 + 20 + 3 + 0.4, abs=1e-12)
    assert (r.rec_sg, r.rec_dg, r.adv_g, r.smooth) == (0.1, 0.2, 0.3, 0.4)


def test_total_loss_names_bad_component():
    with pytest.raises(L.NonFiniteLossError, match="adv_g"):
        L.total_loss({"rec_sg": 0.1, "adv_g": float("nan")})
    with pytest.raises(KeyError):
        L.total_loss({"perceptual": 1.0})


@given(st.lists(st.floats(0, 10), min_size=4, max_size=4), st.floats(0.1, 10))
def test_total_scale_linearity(vals, k):
    comps = dict(zip(("rec_sg", "rec_dg", "adv_g", "smooth"), vals))
    base = L.total_loss(comps).total
    assert base >= 0
    assert L.total_loss(comps, L.LossWeights().scaled(k)).total == pytest.approx(k * base, rel=1e-12, abs=1e-12)


def test_weights_must_be_non_negative():
    with pytest.raises(ValueError):
        L.LossWeights(lambda_adv=-1)


def test_report_csv_row():
    r = L.LossReport(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 7.0)
    assert L.LossReport.CSV_HEADER == ("step", "rec_sg", "rec_dg", "adv_g", "adv_d_s", "adv_d_r", "smooth", "total")
    row = r.csv_row(3)
    assert row[0] == 3 and [float(v) for v in row[1:]] == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 7.0]


# --- gradients (quick version; the acceptance module runs the full suite) ---------


def test_rec_sg_gradient_spot_check():
    rng = np.random.default_rng(0)
    y = torch.tensor(rng.random((1, 1, 8, 8)))
    p = (y + torch.tensor(rng.choice([-1, 1], (1, 1, 8, 8)) * rng.uniform(0.01, 0.2, (1, 1, 8, 8)))).requires_grad_()
    res = gradient_check(lambda: L.rec_sg_loss(p, y), p, n_coords=5)
    assert max(r[3] for r in res) < 1e-4
