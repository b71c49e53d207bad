"""Single-file checkpoints: version, config echo, tensors, optimizer state."""

from __future__ import annotations

import pickle
import zipfile
from pathlib import Path

import torch

from .networks import NetworkConfig, build_dense_generator, build_discriminator, build_sparse_generator

FORMAT_VERSION = 1

BUILDERS = {
    "sparse generator": build_sparse_generator,
    "dense generator": build_dense_generator,
    "discriminator": build_discriminator,
}


class CheckpointError(RuntimeError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def save_checkpoint(nets: dict, optimizer_state: dict, path, step: int = 0, config: dict | None = None,
                    extra: dict | None = None) -> None:
    """Write ``nets`` (name -> Network) and optimizer state dicts to ``path``.

    The write goes through a temporary file so a crash never leaves a
    half-written checkpoint behind.
    """
    payload = {
        "format_version": FORMAT_VERSION,
        "step": int(step),
        "config": dict(config or {}),
        "networks": {
            name: {"kind": net.kind, "cfg": net.cfg.to_dict(), "state": net.state_dict()}
            for name, net in nets.items()
        },
        "optimizers": {name: opt for name, opt in optimizer_state.items()},
        "extra": dict(extra or {}),
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def read_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint at {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except (pickle.UnpicklingError, zipfile.BadZipFile, RuntimeError, EOFError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointError(f"{path}: not a depthduet checkpoint")
    if payload["format_version"] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint format {payload['format_version']}, expected {FORMAT_VERSION}"
        )
    return payload


def load_checkpoint(path):
    """Rebuild networks from ``path``; returns ``(nets, optimizer_state, payload)``."""
    payload = read_checkpoint(path)
    nets = {}
    for name, entry in payload["networks"].items():
        net = BUILDERS[entry["kind"]](NetworkConfig(**entry["cfg"]))
        net.load_state_dict(entry["state"])
        nets[name] = net
    return nets, payload["optimizers"], payload
