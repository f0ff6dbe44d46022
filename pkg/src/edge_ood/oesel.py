"""Outlier-exposure dataset selection via singular-spectrum distance.

A candidate OE set is scored by drawing equal-size batch pairs from the ID
set and the candidate, extracting penultimate features with a fixed model,
and comparing the top-k singular values of the two feature matrices. The
candidate with the smallest mean distance wins.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import MultiLabelDataset, as_matrix, svd_singular_values
from .errors import DataError, EmptyInputError, ParameterError, ShapeError
from .model import MlpModel, _CyclingSampler

__all__ = [
    "DilationReport",
    "dilation_distance",
    "mean_dilation",
    "select_oe",
    "save_reports",
    "load_reports",
]


@dataclass
class DilationReport:
    """Per-candidate distance audit for OE selection."""

    candidate: str
    distances: list[float]
    mean_distance: float
    k_svd: int
    batch_size: int
    num_batches: int
    feature_model: str = "unspecified"

    def __post_init__(self):
        if self.distances and not np.isclose(
            self.mean_distance, float(np.mean(self.distances)), atol=1e-12
        ):
            raise DataError(
                f"report for '{self.candidate}': mean_distance does not equal "
                "the mean of the per-pair distances"
            )


def dilation_distance(id_features, oe_features, k_svd: int) -> float:
    """Frobenius distance between the top-k singular spectra of two batches.

    Both feature matrices must have the same number of rows (equal batch
    sizes keep the spectra comparable).
    """
    a = as_matrix(id_features, "id features")
    b = as_matrix(oe_features, "candidate features")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(
            f"batch sizes differ: {a.shape[0]} id rows vs {b.shape[0]} candidate rows"
        )
    limit = min(min(a.shape), min(b.shape))
    if not 1 <= k_svd <= limit:
        raise ParameterError(
            f"k_svd must be in [1, {limit}] for shapes {a.shape} and {b.shape}, "
            f"got {k_svd}"
        )
    s_id = svd_singular_values(a)[:k_svd]
    s_oe = svd_singular_values(b)[:k_svd]
    return float(np.sqrt(((s_id - s_oe) ** 2).sum()))


def mean_dilation(
    id_set: MultiLabelDataset,
    oe_set: MultiLabelDataset,
    model: MlpModel,
    batch_size: int = 64,
    num_batches: int = 16,
    k_svd: int | None = None,
    seed: int = 0,
    feature_model: str = "unspecified",
) -> DilationReport:
    """Mean dilation distance over seeded equal-size batch pairs.

    Batches are drawn without replacement within a pass of each set
    (reshuffling on wrap-around). Features come from the supplied model's
    penultimate layer; record which model that was via ``feature_model``.
    """
    if batch_size < 1 or num_batches < 1:
        raise ParameterError("batch_size and num_batches must be >= 1")
    if id_set.n < batch_size or oe_set.n < batch_size:
        raise DataError(
            f"both datasets need >= {batch_size} rows "
            f"(id has {id_set.n}, candidate has {oe_set.n})"
        )
    if k_svd is None:
        k_svd = min(batch_size, model.hidden_dim)

    ss = np.random.SeedSequence(seed)
    seed_id, seed_oe = ss.spawn(2)
    id_sampler = _CyclingSampler(id_set.n, np.random.default_rng(seed_id))
    oe_sampler = _CyclingSampler(oe_set.n, np.random.default_rng(seed_oe))

    distances = []
    for _ in range(num_batches):
        h_id, _ = model.forward(id_set.features[id_sampler.take(batch_size)])
        h_oe, _ = model.forward(oe_set.features[oe_sampler.take(batch_size)])
        distances.append(dilation_distance(h_id, h_oe, k_svd))
    return DilationReport(
        candidate=oe_set.name,
        distances=distances,
        mean_distance=float(np.mean(distances)),
        k_svd=k_svd,
        batch_size=batch_size,
        num_batches=num_batches,
        feature_model=feature_model,
    )


def select_oe(reports: list[DilationReport]) -> str:
    """Candidate with the smallest mean distance; ties go to the first name."""
    if not reports:
        raise EmptyInputError("select_oe needs at least one report")
    best = min(reports, key=lambda r: (r.mean_distance, r.candidate))
    return best.candidate


def save_reports(reports: list[DilationReport], path):
    payload = [asdict(r) for r in reports]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_reports(path) -> list[DilationReport]:
    payload = json.loads(Path(path).read_text())
    return [DilationReport(**item) for item in payload]
