"""Depth estimation and completion metrics, baselines and evaluation."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ShapeMismatchError
from .samples import Sample

TASKS = ("estimation", "completion")


class EmptyEvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class EstimationMetrics:
    abs_rel: float
    sq_rel: float
    rmse_m: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float


@dataclass(frozen=True)
class CompletionMetrics:
    rmse_mm: float
    mae_mm: float


def _valid_pairs(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    valid = gt > 0
    if not valid.any():
        raise EmptyEvaluationError("ground truth has no valid pixels")
    return pred[valid], gt[valid]


def estimation_metrics(pred, gt, d_min: float = 1.0, d_max: float = 80.0) -> EstimationMetrics:
    """Standard monocular-depth error and accuracy measures.

    Only pixels with ``gt > 0`` count; predictions are clamped to
    ``[d_min, d_max]`` first so the log and ratio terms are defined.
    """
    p, g = _valid_pairs(pred, gt)
    p = np.clip(p, d_min, d_max)
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return EstimationMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rmse_m=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
    )


def completion_metrics(pred, gt) -> CompletionMetrics:
    p, g = _valid_pairs(pred, gt)
    diff = p - g
    return CompletionMetrics(
        rmse_mm=float(1000.0 * np.sqrt(np.mean(diff**2))),
        mae_mm=float(1000.0 * np.mean(np.abs(diff))),
    )


def nearest_neighbor_complete(sparse) -> np.ndarray:
    """Fill every pixel with the depth of its nearest measured pixel.

    Distance is Euclidean in pixel units; ties go to the smaller row, then
    the smaller column.
    """
    sparse = np.asarray(sparse)
    h, w = sparse.shape
    pts = np.argwhere(sparse != 0)  # row-major, so already in tie-break order
    if len(pts) == 0:
        raise EmptyEvaluationError("sparse input has no valid pixels")
    grid = np.indices((h, w)).reshape(2, -1).T
    k = min(16, len(pts))
    tree = cKDTree(pts)
    _, idx = tree.query(grid, k=k)
    idx = idx.reshape(len(grid), k)

    # exact integer distances; the row-major point index breaks ties
    d2 = ((pts[idx] - grid[:, None, :]) ** 2).sum(-1)
    best = d2.min(axis=1, keepdims=True)
    tied = d2 == best
    choice = np.where(tied, idx, len(pts)).min(axis=1)

    # if every one of the k candidates ties, more equidistant points may exist
    if k < len(pts):
        crowded = np.nonzero(tied.all(axis=1))[0]
        for i in crowded:
            near = tree.query_ball_point(grid[i], np.sqrt(best[i, 0]) + 1e-9)
            near = [j for j in near if ((pts[j] - grid[i]) ** 2).sum() == best[i, 0]]
            choice[i] = min(near)

    return sparse[tuple(pts[choice].T)].reshape(h, w)


nearest_neighbor_complete.tasks = ("completion",)


@dataclass
class MetricsReport:
    task: str
    per_sample: list = field(default_factory=list)
    ids: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    sample_count: int = 0
    valid_pixels: int = 0

    @property
    def columns(self) -> tuple[str, ...]:
        cls = EstimationMetrics if self.task == "estimation" else CompletionMetrics
        return tuple(f.name for f in fields(cls))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("id", *self.columns))
            for sid, m in zip(self.ids, self.per_sample):
                d = asdict(m)
                w.writerow((sid, *(repr(d[c]) for c in self.columns)))
            w.writerow(("aggregate", *(repr(self.aggregate[c]) for c in self.columns)))


def _predictor(model, task: str, n: int) -> Callable[[int, Sample], np.ndarray]:
    from .trainer import TrainState, infer_complete, infer_estimate

    if isinstance(model, TrainState):
        if task == "estimation":
            return lambda i, s: infer_estimate(model, s.rgb)
        if model.dg is None:
            raise ValueError("a single-network model cannot run the completion task")
        return lambda i, s: infer_complete(model, s.sparse_gt)

    if isinstance(model, (list, tuple)):
        if len(model) != n:
            raise ValueError(f"{len(model)} predictions for {n} samples")
        return lambda i, s: model[i]

    supported = getattr(model, "tasks", TASKS)
    if task not in supported:
        raise ValueError(f"{getattr(model, '__name__', model)!r} does not support the {task} task")
    if task == "estimation":
        return lambda i, s: model(s.rgb)
    return lambda i, s: model(s.sparse_gt)


def evaluate(
    model,
    dataset: Sequence[Sample],
    task: str,
    ids: Sequence[str] | None = None,
    csv_path=None,
    d_min: float = 1.0,
    d_max: float = 80.0,
) -> MetricsReport:
    """Run ``model`` on every sample and score it against the dense ground truth.

    ``model`` is a ``TrainState``, a callable taking the task input (RGB
    for estimation, sparse depth for completion) and returning meters, or a
    list of precomputed predictions aligned with ``dataset``. Callables may
    declare a ``tasks`` attribute to restrict what they support.
    Ground truth is restricted to its validity mask; samples without any
    valid pixel are skipped.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    if not dataset:
        raise EmptyEvaluationError("evaluation dataset is empty")
    predict = _predictor(model, task, len(dataset))
    ids = list(ids) if ids is not None else [f"{i:06d}" for i in range(len(dataset))]

    report = MetricsReport(task)
    for i, (sid, s) in enumerate(zip(ids, dataset)):
        gt = np.where(s.dense_mask, s.dense_gt, 0.0)
        if not np.any(gt > 0):
            continue
        pred = predict(i, s)
        if task == "estimation":
            m = estimation_metrics(pred, gt, d_min, d_max)
        else:
            m = completion_metrics(pred, gt)
        report.per_sample.append(m)
        report.ids.append(sid)
        report.valid_pixels += int(np.count_nonzero(gt > 0))
    report.sample_count = len(report.per_sample)
    if not report.sample_count:
        raise EmptyEvaluationError("no sample has valid ground truth")
    report.aggregate = {
        c: float(np.mean([getattr(m, c) for m in report.per_sample])) for c in report.columns
    }
    if csv_path is not None:
        report.write_csv(csv_path)
    return report
