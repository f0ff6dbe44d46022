"""Detection metrics (FPR95, AUROC, AUPR), multi-label mAP, and the
head-removal tail curve.

ID is the positive class throughout: a higher score means "more ID". All
metrics are rank statistics, invariant under strictly increasing score
transforms.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import MultiLabelDataset, as_matrix, ensure_finite, format_float
from .errors import DataError, EmptyInputError, ParameterError, ShapeError

__all__ = [
    "DetectionReport",
    "TailPoint",
    "TailCurve",
    "auroc",
    "fpr_at_tpr",
    "aupr",
    "mean_average_precision",
    "average_precision_per_class",
    "detection_report",
    "tail_curve",
    "save_report",
    "save_tail_curve_csv",
]


def _as_scores(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInputError(f"{name} scores are empty")
    ensure_finite(arr, name)
    return arr


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group average."""
    uniq, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    below = np.concatenate(([0], np.cumsum(counts)[:-1]))
    group_rank = below + (counts + 1) / 2.0
    return group_rank[inverse]


def auroc(id_scores, ood_scores) -> float:
    """P(id > ood) + 0.5 * P(id == ood) over all ID/OOD pairs.

    Computed via the rank-sum identity, which matches exhaustive pair
    counting exactly (ranks are integers or half-integers).
    """
    ids = _as_scores(id_scores, "id")
    oods = _as_scores(ood_scores, "ood")
    n_id, n_ood = ids.size, oods.size
    ranks = _average_ranks(np.concatenate([ids, oods]))
    u = ranks[:n_id].sum() - n_id * (n_id + 1) / 2.0
    return float(u / (n_id * n_ood))


def fpr_at_tpr(id_scores, ood_scores, tpr_target: float = 0.95) -> float:
    """OOD fraction above the most conservative threshold reaching the TPR.

    The threshold is the largest gamma with mean(id >= gamma) >= tpr_target;
    gamma always exists because the minimum ID score gives TPR 1.
    """
    if not 0 < tpr_target <= 1:
        raise ParameterError(f"tpr_target must be in (0, 1], got {tpr_target}")
    ids = _as_scores(id_scores, "id")
    oods = _as_scores(ood_scores, "ood")
    candidates = np.unique(ids)
    sorted_ids = np.sort(ids)
    ge_counts = ids.size - np.searchsorted(sorted_ids, candidates, side="left")
    tpr = ge_counts / ids.size
    valid = candidates[tpr >= tpr_target]
    gamma = valid.max()
    return float(np.mean(oods >= gamma))


def aupr(id_scores, ood_scores) -> float:
    """Area under precision-recall with ID positive, step interpolation.

    Thresholds are the distinct scores in descending order (ties grouped);
    the area is sum over thresholds of (recall step) * precision.
    """
    ids = _as_scores(id_scores, "id")
    oods = _as_scores(ood_scores, "ood")
    thresholds = np.unique(np.concatenate([ids, oods]))[::-1]
    sorted_ids = np.sort(ids)
    sorted_oods = np.sort(oods)
    tp = ids.size - np.searchsorted(sorted_ids, thresholds, side="left")
    fp = oods.size - np.searchsorted(sorted_oods, thresholds, side="left")
    recall = tp / ids.size
    precision = tp / np.maximum(tp + fp, 1)
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(((recall - prev_recall) * precision).sum())


def average_precision_per_class(scores, labels, skip_empty: bool = False):
    """Per-class AP; ranking ties broken by lower sample index.

    Classes without a positive raise DataError unless skip_empty, in which
    case their AP is NaN (and they are excluded from mAP).
    """
    s = as_matrix(scores, "scores")
    y = np.asarray(labels)
    if y.shape != s.shape:
        raise ShapeError(f"labels shape {y.shape} != scores shape {s.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be exactly 0 or 1")
    n, c = s.shape
    if n == 0 or c == 0:
        raise EmptyInputError(f"scores are empty (shape {s.shape})")
    aps = np.full(c, np.nan)
    for j in range(c):
        order = np.argsort(-s[:, j], kind="stable")
        pos = y[order, j].astype(np.float64)
        n_pos = pos.sum()
        if n_pos == 0:
            if skip_empty:
                continue
            raise DataError(f"class {j} has no positive sample")
        precision_at = np.cumsum(pos) / np.arange(1, n + 1)
        aps[j] = precision_at[pos == 1].mean()
    return aps


def mean_average_precision(scores, labels, skip_empty: bool = False) -> float:
    """Mean over classes of average precision (ID classification quality)."""
    aps = average_precision_per_class(scores, labels, skip_empty=skip_empty)
    valid = aps[~np.isnan(aps)]
    if valid.size == 0:
        raise DataError("no class has a positive sample")
    return float(valid.mean())


@dataclass
class DetectionReport:
    fpr95: float
    auroc: float
    aupr: float
    n_id: int
    n_ood: int
    score_kind: str = "unspecified"


def detection_report(
    id_scores, ood_scores, score_kind: str = "unspecified", tpr_target: float = 0.95
) -> DetectionReport:
    """Bundle FPR@tpr, AUROC and AUPR for one score function."""
    ids = _as_scores(id_scores, "id")
    oods = _as_scores(ood_scores, "ood")
    return DetectionReport(
        fpr95=fpr_at_tpr(ids, oods, tpr_target),
        auroc=auroc(ids, oods),
        aupr=aupr(ids, oods),
        n_id=ids.size,
        n_ood=oods.size,
        score_kind=score_kind,
    )


@dataclass
class TailPoint:
    removed_head_classes: int
    remaining_id_samples: int
    fpr95: float
    auroc: float


@dataclass
class TailCurve:
    points: list[TailPoint]


def tail_curve(
    d_in_test: MultiLabelDataset,
    id_scores,
    ood_scores,
    steps: int,
    train_class_counts=None,
    tpr_target: float = 0.95,
) -> TailCurve:
    """Detection quality as head classes are removed one by one.

    Classes are ranked by descending positive count (training counts when
    supplied, else this dataset's own); point x drops every ID sample whose
    label set touches the top-x classes and re-evaluates the survivors
    against the full OOD pool. Point 0 reproduces the global metrics
    bit-exactly. Stops early once no ID sample remains.
    """
    if d_in_test.labels is None:
        raise DataError(f"dataset '{d_in_test.name}' must be labeled")
    ids = _as_scores(id_scores, "id")
    oods = _as_scores(ood_scores, "ood")
    if ids.size != d_in_test.n:
        raise ShapeError(
            f"{ids.size} id scores for {d_in_test.n} dataset rows"
        )
    if steps < 0:
        raise ParameterError(f"steps must be >= 0, got {steps}")
    counts = (
        d_in_test.class_counts
        if train_class_counts is None
        else np.asarray(train_class_counts)
    )
    if counts.shape[0] != d_in_test.num_classes:
        raise ShapeError(
            f"{counts.shape[0]} class counts for {d_in_test.num_classes} classes"
        )
    ranking = np.argsort(-counts, kind="stable")

    points = []
    for x in range(min(steps, d_in_test.num_classes) + 1):
        keep = d_in_test.labels[:, ranking[:x]].sum(axis=1) == 0
        remaining = ids[keep]
        if remaining.size == 0:
            break
        points.append(
            TailPoint(
                removed_head_classes=x,
                remaining_id_samples=int(remaining.size),
                fpr95=fpr_at_tpr(remaining, oods, tpr_target),
                auroc=auroc(remaining, oods),
            )
        )
    return TailCurve(points=points)


def save_report(report: DetectionReport, path, extra: dict | None = None):
    payload = asdict(report)
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def save_tail_curve_csv(curve: TailCurve, path):
    """Plot-ready CSV: x, fpr95, auroc."""
    lines = ["x,fpr95,auroc"]
    for p in curve.points:
        lines.append(
            f"{p.removed_head_classes},{format_float(p.fpr95)},{format_float(p.auroc)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
