"""Inference-time OOD score functions and the thresholded ID/OOD decision.

Every score maps a row of C logits to one real; higher means more
in-distribution. Scores are pure and stateless.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import as_matrix, ensure_finite, format_float, softplus
from .errors import EmptyInputError, ParameterError, ShapeError

__all__ = [
    "ScoreKind",
    "Decision",
    "ScoreVector",
    "joint_energy",
    "max_energy",
    "max_logit",
    "msp",
    "score_dataset",
    "decide",
    "score_histogram",
    "save_scores",
    "load_scores",
    "save_histogram",
]


class ScoreKind(str, Enum):
    MAX_LOGIT = "max_logit"
    MSP = "msp"
    MAX_ENERGY = "max_energy"
    JOINT_ENERGY = "joint_energy"


class Decision(str, Enum):
    ID = "ID"
    OOD = "OOD"


@dataclass(frozen=True)
class ScoreVector:
    """One score per sample of a named dataset."""

    values: np.ndarray
    kind: ScoreKind
    source: str = ""

    def __len__(self) -> int:
        return len(self.values)


def _as_logit_row(logits) -> np.ndarray:
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-D logit row, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError("logit row is empty")
    ensure_finite(arr, "logits")
    return arr


def joint_energy(logits) -> float:
    """Sum of label-wise energies log(1 + exp(f_i)) over all classes."""
    return float(softplus(_as_logit_row(logits)).sum())


def max_energy(logits) -> float:
    """Largest single label-wise energy log(1 + exp(f_i))."""
    return float(softplus(_as_logit_row(logits)).max())


def max_logit(logits) -> float:
    """Largest raw logit."""
    return float(_as_logit_row(logits).max())


def msp(logits) -> float:
    """Maximum softmax probability over the C logits (max-subtracted)."""
    arr = _as_logit_row(logits)
    e = np.exp(arr - arr.max())
    return float(e.max() / e.sum())


_ROW_SCORES = {
    ScoreKind.MAX_LOGIT: max_logit,
    ScoreKind.MSP: msp,
    ScoreKind.MAX_ENERGY: max_energy,
    ScoreKind.JOINT_ENERGY: joint_energy,
}


def score_dataset(logits, kind: ScoreKind, source: str = "") -> ScoreVector:
    """Apply a score function row-wise, preserving sample order."""
    kind = ScoreKind(kind)
    m = as_matrix(logits, "logits")
    if m.shape[0] == 0:
        return ScoreVector(values=np.empty(0), kind=kind, source=source)
    if m.shape[1] == 0:
        raise ShapeError("logit matrix has zero columns")
    ensure_finite(m, "logits")
    if kind is ScoreKind.MAX_LOGIT:
        values = m.max(axis=1)
    elif kind is ScoreKind.MAX_ENERGY:
        values = softplus(m).max(axis=1)
    elif kind is ScoreKind.JOINT_ENERGY:
        values = softplus(m).sum(axis=1)
    else:
        e = np.exp(m - m.max(axis=1, keepdims=True))
        values = e.max(axis=1) / e.sum(axis=1)
    return ScoreVector(values=values, kind=kind, source=source)


def decide(score: float, gamma: float) -> Decision:
    """ID iff score >= gamma (the boundary counts as ID)."""
    if not (np.isfinite(score) and np.isfinite(gamma)):
        raise ParameterError("score and gamma must be finite")
    return Decision.ID if score >= gamma else Decision.OOD


def score_histogram(scores, bins: int):
    """Equal-width histogram over [min, max]; counts sum to the sample count.

    Returns (edges, counts) with len(edges) == bins + 1. A degenerate
    min == max range is widened by 0.5 on both sides (numpy convention).
    """
    values = scores.values if isinstance(scores, ScoreVector) else np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("cannot histogram an empty score vector")
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return edges, counts


def save_scores(sv: ScoreVector, path):
    lines = ["sample_index,score"]
    for i, v in enumerate(sv.values):
        lines.append(f"{i},{format_float(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_scores(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.empty(0)
    return data[:, 1]


def save_histogram(edges: np.ndarray, counts: np.ndarray, path):
    lines = ["bin_left,bin_right,count"]
    for j in range(len(counts)):
        lines.append(
            f"{format_float(edges[j])},{format_float(edges[j + 1])},{int(counts[j])}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
