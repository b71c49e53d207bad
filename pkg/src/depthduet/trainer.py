"""Joint adversarial training of the two-stage generator."""

from __future__ import annotations

import csv
import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from . import losses as L
from .checkpoint import load_checkpoint, save_checkpoint
from .networks import (
    NetworkConfig,
    build_dense_generator,
    build_discriminator,
    build_sparse_generator,
)
from .samples import Batch, Sample, mixed_batch

log = logging.getLogger(__name__)

# presets for the ablation grid: single network vs full, loss subsets, real-only data
ABLATIONS = {
    "full": {},
    "sn_l1": {"single_network": True, "disable_adv": True, "disable_smooth": True},
    "sn_l1_adv": {"single_network": True, "disable_smooth": True},
    "sn_ac": {"single_network": True},
    "fn_r": {"real_only": True},
    "fn_l1": {"disable_adv": True, "disable_smooth": True},
}


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 4
    learning_rate: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    lambda_rec_sg: float = 150.0
    lambda_rec_dg: float = 100.0
    lambda_adv: float = 10.0
    lambda_s: float = 1.0
    synthetic_ratio: float = 0.5
    seed: int = 0
    single_network: bool = False
    disable_adv: bool = False
    disable_smooth: bool = False
    real_only: bool = False
    base_width: int = 16
    depth_levels: int = 4
    d_min: float = 1.0
    d_max: float = 80.0
    edge_sign: float = -1.0
    mask_fake_for_real_d: bool = True
    sg_activation: str = "clamp"
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        for b in ("adam_beta1", "adam_beta2"):
            if not 0.0 < getattr(self, b) < 1.0:
                raise ValueError(f"{b} must lie in (0, 1)")
        if not 0.0 <= self.synthetic_ratio <= 1.0:
            raise ValueError("synthetic_ratio must lie in [0, 1]")
        self.weights  # validates the lambdas

    @property
    def weights(self) -> L.LossWeights:
        return L.LossWeights(self.lambda_rec_sg, self.lambda_rec_dg, self.lambda_adv, self.lambda_s)

    @property
    def effective_synthetic_ratio(self) -> float:
        return 0.0 if self.real_only else self.synthetic_ratio

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def with_ablation(self, name: str) -> "TrainConfig":
        if name not in ABLATIONS:
            raise KeyError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
        flags = dict.fromkeys(("single_network", "disable_adv", "disable_smooth", "real_only"), False)
        flags.update(ABLATIONS[name])
        return replace(self, **flags)

    def network_configs(self) -> dict[str, NetworkConfig]:
        base = NetworkConfig(base_width=self.base_width, depth_levels=self.depth_levels)
        return {
            "sg": replace(base, input_channels=3, output_activation=self.sg_activation),
            "dg": replace(base, input_channels=1, use_residual_encoder=True),
            "d": replace(base, input_channels=4),
        }


@dataclass
class TrainState:
    config: TrainConfig
    sg: torch.nn.Module
    dg: torch.nn.Module | None
    d_s: torch.nn.Module
    d_r: torch.nn.Module
    optimizers: dict = field(default_factory=dict)
    step: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    @property
    def nets(self) -> dict:
        nets = {"sg": self.sg, "d_s": self.d_s, "d_r": self.d_r}
        if self.dg is not None:
            nets["dg"] = self.dg
        return nets

    @property
    def generators(self) -> dict:
        return {k: v for k, v in self.nets.items() if k in ("sg", "dg")}

    def train(self):
        for n in self.nets.values():
            n.train()

    def eval(self):
        for n in self.nets.values():
            n.eval()


def init_state(config: TrainConfig) -> TrainState:
    torch.manual_seed(config.seed)
    cfgs = config.network_configs()
    sg = build_sparse_generator(cfgs["sg"])
    dg = None if config.single_network else build_dense_generator(cfgs["dg"])
    d_s = build_discriminator(cfgs["d"])
    d_r = build_discriminator(cfgs["d"])
    state = TrainState(config, sg, dg, d_s, d_r, rng=np.random.default_rng(config.seed))
    state.optimizers = _make_optimizers(state)
    return state


def _make_optimizers(state: TrainState) -> dict:
    c = state.config
    return {
        name: torch.optim.Adam(net.parameters(), lr=c.learning_rate, betas=(c.adam_beta1, c.adam_beta2))
        for name, net in state.nets.items()
    }


def batch_tensors(batch: Batch, d_max: float, dtype=torch.float32) -> dict:
    return {
        "rgb": torch.as_tensor(batch.rgb, dtype=dtype),
        "sparse": torch.as_tensor(batch.sparse, dtype=dtype) / d_max,
        "dense": torch.as_tensor(batch.dense, dtype=dtype) / d_max,
        "mask": torch.as_tensor(batch.mask),
        "is_real": torch.as_tensor(batch.is_real),
    }


def generate(state: TrainState, rgb: torch.Tensor):
    """Training-mode forward: ``(sparse_pred, dense_pred)``, normalized.

    With ``single_network`` the sparse prediction is ``None``.
    """
    if state.dg is None:
        return None, state.sg(rgb)
    sparse = state.sg(rgb)
    return sparse, state.dg(sparse)


def _fake_for_d(state, dense_pred, t):
    if state.config.mask_fake_for_real_d:
        keep = t["mask"].to(dense_pred.dtype)
        masked = dense_pred * keep
        sel = t["is_real"].view(-1, 1, 1, 1)
        return torch.where(sel, masked, dense_pred)
    return dense_pred


def generator_components(state: TrainState, t: dict, sparse_pred, dense_pred) -> dict:
    c = state.config
    comps = {}
    comps["rec_sg"] = (
        L.rec_sg_loss(sparse_pred, t["sparse"]) if sparse_pred is not None else dense_pred.new_zeros(())
    )
    comps["rec_dg"] = L.rec_dg_loss(dense_pred, t["dense"], t["mask"], t["is_real"])
    if c.disable_adv:
        comps["adv_g"] = dense_pred.new_zeros(())
    else:
        fake = _fake_for_d(state, dense_pred, t)
        comps["adv_g"] = L.adversarial_g_loss(state.d_s, state.d_r, t["rgb"], fake, t["is_real"])
    if c.disable_smooth:
        comps["smooth"] = dense_pred.new_zeros(())
    else:
        comps["smooth"] = L.smoothness_loss(dense_pred, t["rgb"], edge_sign=c.edge_sign)
    return comps


def generator_objective(state: TrainState, t: dict):
    """Weighted generator loss for one batch, without any parameter update."""
    sparse_pred, dense_pred = generate(state, t["rgb"])
    comps = generator_components(state, t, sparse_pred, dense_pred)
    return L.combine(comps, state.config.weights), comps


def _check(value, name, step):
    if not torch.isfinite(value).all():
        raise L.NonFiniteLossError(name, step)


def train_step(state: TrainState, batch: Batch) -> L.LossReport:
    """One discriminator update per domain present, then one generator update."""
    try:
        return _train_step(state, batch)
    except L.NonFiniteLossError as exc:
        if exc.step is not None:
            raise
        raise L.NonFiniteLossError(exc.component, state.step) from exc


def _train_step(state: TrainState, batch: Batch) -> L.LossReport:
    c = state.config
    state.train()
    t = batch_tensors(batch, c.d_max, dtype=next(state.sg.parameters()).dtype)
    is_real = t["is_real"]

    sparse_pred, dense_pred = generate(state, t["rgb"])

    d_losses = {"adv_d_s": 0.0, "adv_d_r": 0.0}
    if not c.disable_adv:
        fake = _fake_for_d(state, dense_pred, t).detach()
        for name, key, sel in (("d_s", "adv_d_s", ~is_real), ("d_r", "adv_d_r", is_real)):
            if not sel.any():
                continue
            d, opt = getattr(state, name), state.optimizers[name]
            opt.zero_grad(set_to_none=True)
            loss_d = L.adversarial_d_loss(d, t["rgb"][sel], t["dense"][sel], fake[sel])
            _check(loss_d, key, state.step)
            loss_d.backward()
            opt.step()
            d_losses[key] = loss_d.detach()

    comps = generator_components(state, t, sparse_pred, dense_pred)
    for name, v in comps.items():
        _check(v, name, state.step)
    total = L.combine(comps, c.weights)
    for name in state.generators:
        state.optimizers[name].zero_grad(set_to_none=True)
    total.backward()
    for name in state.generators:
        state.optimizers[name].step()
    # generator pass leaves gradients on the critics; drop them
    for name in ("d_s", "d_r"):
        state.optimizers[name].zero_grad(set_to_none=True)

    state.step += 1
    return L.total_loss({**comps, **d_losses}, c.weights)


def train(
    config: TrainConfig,
    dataset: Sequence[Sample],
    state: TrainState | None = None,
    out_dir=None,
    log_every: int = 0,
) -> tuple[TrainState, list[L.LossReport]]:
    """Run ``config.steps`` steps; optionally write ``loss.csv`` and checkpoints.

    Passing ``state`` continues training it (its config is replaced by
    ``config`` but networks, optimizers, step and sampler RNG carry over).
    """
    ratio = config.effective_synthetic_ratio
    domains = {s.domain for s in dataset}
    if not dataset:
        raise ValueError("training dataset is empty")
    if ratio > 0 and "synthetic" not in domains:
        raise ValueError(f"synthetic_ratio={ratio} but the dataset has no synthetic samples")
    if ratio < 1 and "real" not in domains:
        raise ValueError(f"synthetic_ratio={ratio} but the dataset has no real samples")

    if state is None:
        state = init_state(config)
    else:
        state.config = config
        for opt in state.optimizers.values():
            for g in opt.param_groups:
                g["lr"] = config.learning_rate
                g["betas"] = (config.adam_beta1, config.adam_beta2)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    trace = []
    for _ in range(config.steps):
        batch = mixed_batch(dataset, config.batch_size, ratio, state.rng)
        report = train_step(state, batch)
        trace.append(report)
        if log_every and state.step % log_every == 0:
            log.info("step %d total %.4f rec_dg %.4f", state.step, report.total, report.rec_dg)
        if out is not None and config.checkpoint_every and state.step % config.checkpoint_every == 0:
            save_state(state, out / f"ckpt_{state.step:06d}.pt")

    if out is not None:
        first = state.step - len(trace) + 1
        write_trace_csv(out / "loss.csv", trace, first_step=first)
        save_state(state, out / "last.pt")
    return state, trace


def write_trace_csv(path, trace: Sequence[L.LossReport], first_step: int = 1) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(L.LossReport.CSV_HEADER)
        for i, r in enumerate(trace):
            w.writerow(r.csv_row(first_step + i))


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty loss trace")
    return {k: np.array([float(r[k]) for r in rows]) for k in L.LossReport.CSV_HEADER}


def save_state(state: TrainState, path) -> None:
    save_checkpoint(
        state.nets,
        {k: o.state_dict() for k, o in state.optimizers.items()},
        path,
        step=state.step,
        config=asdict(state.config),
        extra={"rng": state.rng.bit_generator.state},
    )


def load_state(path) -> TrainState:
    nets, opt_state, payload = load_checkpoint(path)
    config = TrainConfig(**payload["config"])
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["extra"]["rng"]
    state = TrainState(config, nets["sg"], nets.get("dg"), nets["d_s"], nets["d_r"], step=payload["step"], rng=rng)
    state.optimizers = _make_optimizers(state)
    for name, opt in state.optimizers.items():
        opt.load_state_dict(opt_state[name])
    return state


@contextmanager
def _eval_mode(state):
    modes = {k: n.training for k, n in state.nets.items()}
    state.eval()
    try:
        with torch.no_grad():
            yield
    finally:
        for k, n in state.nets.items():
            n.train(modes[k])


def _as_batch(arr: np.ndarray, channels_last: bool) -> tuple[np.ndarray, bool]:
    arr = np.asarray(arr, dtype=np.float32)
    single = arr.ndim == (3 if channels_last else 2)
    if single:
        arr = arr[None]
    if channels_last:
        arr = arr.transpose(0, 3, 1, 2)
    else:
        arr = arr[:, None]
    return arr, single


def _dtype(state):
    return next(state.sg.parameters()).dtype


def infer_complete(state: TrainState, sparse: np.ndarray) -> np.ndarray:
    """Dense depth (meters) from sparse depth (meters), HxW or BxHxW."""
    if state.dg is None:
        raise ValueError("a single-network model has no completion stage")
    arr, single = _as_batch(sparse, channels_last=False)
    with _eval_mode(state):
        x = torch.as_tensor(arr, dtype=_dtype(state)) / state.config.d_max
        out = (state.dg(x) * state.config.d_max)[:, 0].numpy()
    return out[0] if single else out


def infer_sparse(state: TrainState, rgb: np.ndarray) -> np.ndarray:
    """Sparse-generator output in meters from RGB, HxWx3 or BxHxWx3."""
    arr, single = _as_batch(rgb, channels_last=True)
    with _eval_mode(state):
        out = (state.sg(torch.as_tensor(arr, dtype=_dtype(state))) * state.config.d_max)[:, 0].numpy()
    return out[0] if single else out


def infer_estimate(state: TrainState, rgb: np.ndarray) -> np.ndarray:
    """Dense depth (meters) from RGB alone."""
    if state.dg is None:
        return infer_sparse(state, rgb)
    return infer_complete(state, infer_sparse(state, rgb))
