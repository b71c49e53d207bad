"""``depthduet`` command line: gen-data, train, estimate, complete, eval, plot."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path


from . import config as C
from .checkpoint import CheckpointError, CheckpointVersionError
from .errors import ConfigError, ShapeMismatchError
from .io import (
    DepthFormatError,
    EmptyDatasetError,
    load_dataset,
    load_depth_png,
    load_rgb_png,
    quantize_depth,
    read_manifest,
    save_dataset,
    save_depth_png,
)
from .losses import NonFiniteLossError
from .metrics import EmptyEvaluationError, evaluate, nearest_neighbor_complete
from .samples import toy_dataset
from .trainer import ABLATIONS, TrainConfig, infer_complete, infer_sparse, load_state, read_trace_csv, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SHAPE = 4
EXIT_VERSION = 5
EXIT_EMPTY = 6
EXIT_IO = 7
EXIT_DIVERGED = 8

EPILOG = f"""\
exit codes:
  {EXIT_OK}  success
  {EXIT_USAGE}  bad command line usage
  {EXIT_CONFIG}  invalid or unknown config key
  {EXIT_SHAPE}  image/network shape mismatch
  {EXIT_VERSION}  checkpoint format version mismatch
  {EXIT_EMPTY}  empty dataset (or nothing to evaluate)
  {EXIT_IO}  missing/unreadable/malformed file
  {EXIT_DIVERGED}  training produced a non-finite loss

environment:
  DEPTHDUET_DATA_ROOT  default dataset root for train and eval
"""


def _settings(args, cls, **fixed):
    values = C.read_config_file(args.config) if args.config else {}
    values.update(C.parse_overrides(args.overrides))
    if getattr(args, "seed", None) is not None:
        values["seed"] = str(args.seed)
    return C.build(cls, values, **fixed)


def _data_root(args) -> Path:
    root = args.input or os.environ.get("DEPTHDUET_DATA_ROOT")
    if not root:
        raise ConfigError("no dataset given: pass --input or set DEPTHDUET_DATA_ROOT")
    return Path(root)


def cmd_gen_data(args):
    cfg = _settings(args, C.GenConfig)
    samples = toy_dataset(
        cfg.count,
        synthetic_ratio=cfg.synthetic_ratio,
        seed=cfg.seed,
        height=cfg.height,
        width=cfg.width,
        density=cfg.density,
        holes_density=cfg.holes_density,
        d_min=cfg.d_min,
        d_max=cfg.d_max,
        object_count_range=(cfg.object_min, cfg.object_max),
    )
    save_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")


def cmd_train(args):
    fixed = {}
    if args.steps is not None:
        fixed["steps"] = args.steps
    cfg = _settings(args, TrainConfig, **fixed)
    if args.ablation:
        cfg = cfg.with_ablation(args.ablation)
    dataset = load_dataset(_data_root(args))
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    state, trace = train(cfg, dataset, out_dir=args.out, log_every=100)
    print(f"trained {state.step} steps; final total {trace[-1].total:.5f}; outputs in {args.out}")


def _state(args):
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required")
    return load_state(args.checkpoint)


def cmd_estimate(args):
    state = _state(args)
    rgb = load_rgb_png(args.input)
    out = Path(args.out)
    if state.dg is None:
        save_depth_png(infer_sparse(state, rgb), out)
        return
    # the dense result is computed from the PNG-quantized sparse map so that
    # `complete` on the written sparse file reproduces it exactly
    sparse = quantize_depth(infer_sparse(state, rgb))
    sparse_out = Path(args.sparse_out) if args.sparse_out else out.with_name(out.stem + "_sparse.png")
    save_depth_png(sparse, sparse_out)
    save_depth_png(infer_complete(state, sparse), out)


def cmd_complete(args):
    state = _state(args)
    save_depth_png(infer_complete(state, load_depth_png(args.input)), args.out)


def cmd_eval(args):
    root = _data_root(args)
    dataset = load_dataset(root)
    ids = [sid for sid, _ in read_manifest(root / "manifest.txt")]
    chosen = [x for x in (args.checkpoint, args.baseline, args.predictions) if x]
    if len(chosen) != 1:
        raise ConfigError("eval needs exactly one of --checkpoint, --baseline, --predictions")
    if args.checkpoint:
        model = load_state(args.checkpoint)
    elif args.baseline:
        model = nearest_neighbor_complete
    else:
        model = [load_depth_png(Path(args.predictions) / f"{sid}.png") for sid in ids]
    report = evaluate(model, dataset, args.task, ids=ids, csv_path=args.out)
    print(", ".join(f"{k}={v:.6g}" for k, v in report.aggregate.items()))


def cmd_plot(args):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    trace = read_trace_csv(args.input)
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.5))
    for key in ("rec_sg", "rec_dg", "smooth"):
        axes[0].plot(trace["step"], trace[key], label=key, lw=0.8)
    axes[0].set_yscale("log")
    axes[0].set_xlabel("step")
    axes[0].legend()
    for key in ("adv_g", "adv_d_s", "adv_d_r"):
        axes[1].plot(trace["step"], trace[key], label=key, lw=0.8)
    axes[1].set_xlabel("step")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="depthduet",
        description="Two-stage depth estimation / completion: data, training, inference, evaluation.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")

    def verb(name, func, help_):
        sp = sub.add_parser(name, help=help_, epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=func)
        return sp

    def keyed(sp, keys):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        sp.add_argument("overrides", nargs="*", metavar="KEY=VALUE", help=f"config overrides; keys: {', '.join(keys)}")

    sp = verb("gen-data", cmd_gen_data, "write a procedural dual-domain dataset")
    keyed(sp, C.GenConfig.__dataclass_fields__)
    sp.add_argument("--out", required=True, help="dataset root to create")

    sp = verb("train", cmd_train, "train the model on a dataset directory")
    keyed(sp, TrainConfig.keys())
    sp.add_argument("--input", help="dataset root (default $DEPTHDUET_DATA_ROOT)")
    sp.add_argument("--out", required=True, help="run directory for checkpoints and loss.csv")
    sp.add_argument("--steps", type=int, help="override the step count")
    sp.add_argument("--ablation", choices=sorted(ABLATIONS), help="apply an ablation preset")

    sp = verb("estimate", cmd_estimate, "RGB PNG -> dense depth PNG (also writes the sparse stage)")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--input", required=True, help="RGB PNG")
    sp.add_argument("--out", required=True, help="dense depth PNG")
    sp.add_argument("--sparse-out", help="sparse-stage depth PNG (default <out>_sparse.png)")

    sp = verb("complete", cmd_complete, "sparse depth PNG -> dense depth PNG")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--input", required=True, help="sparse depth PNG")
    sp.add_argument("--out", required=True, help="dense depth PNG")

    sp = verb("eval", cmd_eval, "score a model, baseline or prediction folder on a dataset")
    sp.add_argument("--input", help="dataset root (default $DEPTHDUET_DATA_ROOT)")
    sp.add_argument("--task", choices=("estimation", "completion"), required=True)
    sp.add_argument("--checkpoint")
    sp.add_argument("--baseline", choices=("nn",), help="nearest-neighbour completion baseline")
    sp.add_argument("--predictions", help="folder of <id>.png depth predictions")
    sp.add_argument("--out", required=True, help="metrics CSV")

    sp = verb("plot", cmd_plot, "loss curves from a loss CSV")
    sp.add_argument("--input", required=True, help="loss.csv from train")
    sp.add_argument("--out", required=True, help="image file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    except ShapeMismatchError as exc:
        return _fail(EXIT_SHAPE, f"shape error: {exc}")
    except CheckpointVersionError as exc:
        return _fail(EXIT_VERSION, f"version error: {exc}")
    except (EmptyDatasetError, EmptyEvaluationError) as exc:
        return _fail(EXIT_EMPTY, f"empty dataset: {exc}")
    except NonFiniteLossError as exc:
        return _fail(EXIT_DIVERGED, f"training diverged: {exc}")
    except (OSError, DepthFormatError, CheckpointError) as exc:
        return _fail(EXIT_IO, f"file error: {exc}")
    except KeyError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, f"invalid setting: {exc}")
    return EXIT_OK


def _fail(code: int, msg: str) -> int:
    print(f"depthduet: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
