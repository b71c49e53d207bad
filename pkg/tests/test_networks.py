import pytest
import torch

from depthduet.checkpoint import (
    FORMAT_VERSION,
    CheckpointError,
    CheckpointVersionError,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from depthduet.errors import ShapeMismatchError
from depthduet.networks import (
    NetworkConfig,
    ResidualBlock,
    build_dense_generator,
    build_discriminator,
    build_sparse_generator,
    forward_full,
)

SMALL = dict(base_width=4, depth_levels=3)


def sg(**kw):
    return build_sparse_generator(NetworkConfig(**{**SMALL, **kw}))


def dg(**kw):
    return build_dense_generator(NetworkConfig(**{**SMALL, "input_channels": 1, "use_residual_encoder": True, **kw}))


def disc(**kw):
    return build_discriminator(NetworkConfig(**{**SMALL, "input_channels": 4, **kw}))


@pytest.mark.parametrize("h,w", [(16, 16), (32, 64), (64, 64)])
def test_generator_shapes_and_range(h, w):
    torch.manual_seed(0)
    out = sg()(torch.rand(2, 3, h, w))
    assert out.shape == (2, 1, h, w)
    assert out.min() >= 0 and out.max() <= 1
    dense = dg()(out.detach())
    assert dense.shape == (2, 1, h, w)


def test_default_depth_is_four_levels():
    g = build_sparse_generator()
    assert g.cfg.depth_levels == 4 and g.cfg.base_width == 16
    assert g(torch.rand(1, 3, 64, 64)).shape == (1, 1, 64, 64)
    with pytest.raises(ShapeMismatchError, match="16"):
        g(torch.rand(1, 3, 40, 64))


def test_wrong_channels():
    with pytest.raises(ShapeMismatchError):
        sg()(torch.rand(1, 1, 16, 16))
    with pytest.raises(ValueError):
        build_dense_generator(NetworkConfig(input_channels=3, use_residual_encoder=True))
    with pytest.raises(ValueError):
        build_dense_generator(NetworkConfig(input_channels=1))


def test_leaky_slope():
    acts = [m for m in sg().modules() if isinstance(m, torch.nn.LeakyReLU)]
    assert acts and all(a.negative_slope == 0.2 for a in acts)


def test_skip_connections_add_exact_parameter_count():
    # each skip adds width(j) input channels to a 4x4 transposed conv
    for L in (2, 3, 4):
        cfg = NetworkConfig(base_width=4, depth_levels=L)
        expected = 0
        for j in range(L - 1):
            c_out = 1 if j == 0 else cfg.width(j - 1)
            expected += 16 * cfg.width(j) * c_out
        with_skip = sg(depth_levels=L).parameter_count
        without = sg(depth_levels=L, skip_connections=False).parameter_count
        assert with_skip - without == expected


def test_residual_block_identity_with_zero_convs():
    blk = ResidualBlock(5)
    for m in blk.modules():
        if isinstance(m, torch.nn.Conv2d):
            torch.nn.init.zeros_(m.weight)
    blk.eval()
    x = torch.randn(2, 5, 6, 6)
    assert torch.equal(blk(x), x)


def test_discriminator_zero_weights_gives_half():
    d = disc()
    with torch.no_grad():
        for p in d.parameters():
            p.zero_()
    p = d(torch.rand(3, 3, 16, 16), torch.rand(3, 1, 16, 16))
    assert p.shape == (3,)
    assert torch.equal(p, torch.full((3,), 0.5))


def test_discriminators_do_not_share_parameters():
    a, b = disc(), disc()
    ids_a = {id(p) for p in a.parameters()}
    assert ids_a.isdisjoint(id(p) for p in b.parameters())


def test_eval_mode_is_deterministic_and_batch_independent():
    torch.manual_seed(3)
    g = sg()
    g.train()
    g(torch.rand(4, 3, 16, 16))  # populate running stats
    g.eval()
    x = torch.rand(3, 3, 16, 16)
    full = g(x)
    assert torch.equal(full, g(x))
    single = g(x[1:2])
    assert torch.allclose(full[1:2], single, atol=1e-6)
    assert g.mode == "eval"


def test_forward_full_meters():
    torch.manual_seed(0)
    a, b = sg().eval(), dg().eval()
    x = torch.rand(1, 3, 16, 16)
    sparse, dense = forward_full(a, b, x, d_max=80.0)
    assert torch.allclose(sparse, a(x) * 80)
    assert torch.allclose(dense, b(a(x)) * 80)


def test_clamp_activation_emits_exact_zeros():
    g = sg(output_activation="clamp")
    with torch.no_grad():
        g.head.bias.fill_(-10.0)
    assert torch.count_nonzero(g.eval()(torch.rand(1, 3, 16, 16))) == 0
    with pytest.raises(ValueError):
        NetworkConfig(output_activation="tanh")


def test_checkpoint_round_trip_is_bitwise(tmp_path):
    torch.manual_seed(5)
    nets = {"sg": sg(), "dg": dg(), "d_s": disc()}
    opt = torch.optim.Adam(nets["sg"].parameters(), lr=1e-3)
    x = torch.rand(2, 3, 16, 16)
    nets["sg"](x).mean().backward()
    opt.step()
    for n in nets.values():
        n.eval()
    path = tmp_path / "m.pt"
    save_checkpoint(nets, {"sg": opt.state_dict()}, path, step=7, config={"seed": 5})
    loaded, opt_state, payload = load_checkpoint(path)
    assert payload["step"] == 7 and payload["config"] == {"seed": 5}
    for n in loaded.values():
        n.eval()
    assert torch.equal(loaded["sg"](x), nets["sg"](x))
    s = torch.rand(2, 1, 16, 16)
    assert torch.equal(loaded["dg"](s), nets["dg"](s))
    assert torch.equal(loaded["d_s"](x, s), nets["d_s"](x, s))
    assert opt_state["sg"]["state"][0]["step"] == opt.state_dict()["state"][0]["step"]
    assert not (tmp_path / "m.pt.tmp").exists()


def test_checkpoint_version_mismatch(tmp_path):
    path = tmp_path / "m.pt"
    save_checkpoint({"sg": sg()}, {}, path)
    payload = read_checkpoint(path)
    payload["format_version"] = FORMAT_VERSION + 1
    torch.save(payload, path)
    with pytest.raises(CheckpointVersionError, match=str(FORMAT_VERSION + 1)):
        load_checkpoint(path)


def test_checkpoint_garbage(tmp_path):
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.pt")
