"""Shared numeric kernels and data containers.

Matrices are plain 2-D float64 numpy arrays in row-major order: rows are
samples, columns are features / classes / logits. All kernels here are pure
functions over immutable inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    EmptyInputError,
    NumericError,
    ShapeError,
)

__all__ = [
    "sigmoid",
    "softplus",
    "matmul",
    "svd_singular_values",
    "jacobi_svd",
    "MultiLabelDataset",
    "save_dataset",
    "load_dataset",
    "as_matrix",
    "ensure_finite",
    "format_float",
]

# softplus switches to the x + log1p(exp(-x)) form above this point;
# exp(30) is still comfortably representable so both branches stay live.
_SOFTPLUS_SWITCH = 30.0

_SVD_TOL = 1e-12
_SVD_MAX_SWEEPS = 100


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, raising ShapeError otherwise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def ensure_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    """Raise NumericError if any entry is NaN or infinite."""
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NumericError(f"{name} contains {bad} non-finite entries")
    return arr


def sigmoid(x):
    """Numerically stable logistic 1 / (1 + exp(-x)).

    Accepts scalars or arrays; no overflow for |x| up to 1e3 and beyond
    (saturates to 0.0 / 1.0 once the complement underflows in float64).
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def softplus(x):
    """Numerically stable log(1 + exp(x)).

    For x > 30 uses the x + log1p(exp(-x)) form (relative error < 1e-12);
    below that evaluates log1p(exp(x)) directly. exp underflow makes the
    result saturate to exactly 0.0 for x < ~-745.
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    big = arr > _SOFTPLUS_SWITCH
    out[big] = arr[big] + np.log1p(np.exp(-arr[big]))
    out[~big] = np.log1p(np.exp(arr[~big]))
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def jacobi_svd(m, tol: float = _SVD_TOL, max_sweeps: int = _SVD_MAX_SWEEPS):
    """Full SVD via cyclic one-sided Jacobi rotations.

    Returns (u, s, vt) with m == u @ diag(s) @ vt and s sorted descending.
    Convergence means every column pair of the working matrix is orthogonal
    to within ``tol`` relative to the column norms.
    """
    m = as_matrix(m, "svd input")
    if m.size == 0:
        raise EmptyInputError("svd input is empty")
    ensure_finite(m, "svd input")

    transposed = m.shape[0] < m.shape[1]
    a = (m.T if transposed else m).copy()
    n = a.shape[1]
    v = np.eye(n)

    converged = False
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                col_p = a[:, p]
                col_q = a[:, q]
                apq = float(col_p @ col_q)
                app = float(col_p @ col_p)
                aqq = float(col_q @ col_q)
                denom = np.sqrt(app * aqq)
                if denom == 0.0 or abs(apq) <= tol * denom:
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                a[:, p] = new_p
                a[:, q] = new_q
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            converged = True
            break
    if not converged:
        norms = np.linalg.norm(a, axis=0)
        gram = a.T @ a
        off = np.abs(gram - np.diag(np.diag(gram))).max()
        raise NumericError(
            f"SVD did not converge in {max_sweeps} sweeps "
            f"(max off-diagonal {off:.3e}, column norms in "
            f"[{norms.min():.3e}, {norms.max():.3e}])"
        )

    sing = np.linalg.norm(a, axis=0)
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    a = a[:, order]
    v = v[:, order]
    u = np.zeros_like(a)
    nonzero = sing > 0
    u[:, nonzero] = a[:, nonzero] / sing[nonzero]
    if transposed:
        return v, sing, u.T
    return u, sing, v.T


def svd_singular_values(m) -> np.ndarray:
    """Singular values of m, sorted descending (one-sided Jacobi)."""
    _, sing, _ = jacobi_svd(m)
    return sing


@dataclass
class MultiLabelDataset:
    """Feature matrix plus optional binary label matrix.

    ``class_counts`` is always derived from the label columns; it is kept
    as a field so serialized datasets can be cross-checked on load.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray | None = None
    class_counts: np.ndarray | None = field(default=None)
    seed: int | None = None

    def __post_init__(self):
        self.features = as_matrix(self.features, f"{self.name} features")
        ensure_finite(self.features, f"{self.name} features")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 2:
                raise ShapeError(
                    f"{self.name} labels must be 2-D, got shape {labels.shape}"
                )
            if labels.shape[0] != self.features.shape[0]:
                raise ShapeError(
                    f"{self.name}: {self.features.shape[0]} feature rows vs "
                    f"{labels.shape[0]} label rows"
                )
            if not np.all((labels == 0) | (labels == 1)):
                raise DataError(f"{self.name} labels must be exactly 0 or 1")
            self.labels = labels.astype(np.int64)
            counts = self.labels.sum(axis=0)
            if self.class_counts is not None and not np.array_equal(
                np.asarray(self.class_counts), counts
            ):
                raise DataError(
                    f"{self.name}: provided class_counts disagree with label sums"
                )
            self.class_counts = counts
        else:
            self.class_counts = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return 0 if self.labels is None else self.labels.shape[1]


def format_float(v: float) -> str:
    """Shortest decimal string that round-trips the float64 exactly."""
    return repr(float(v))


def save_dataset(ds: MultiLabelDataset, directory, extra_meta: dict | None = None):
    """Write features.csv, labels.csv (if labeled) and meta.json.

    The CSV cells use round-trip float formatting so a rerun with the same
    inputs produces byte-identical files.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    header = ",".join(f"f{j}" for j in range(ds.dim))
    lines = [header]
    for row in ds.features:
        lines.append(",".join(format_float(v) for v in row))
    (directory / "features.csv").write_text("\n".join(lines) + "\n")

    if ds.labels is not None:
        header = ",".join(f"c{j}" for j in range(ds.num_classes))
        lines = [header]
        for row in ds.labels:
            lines.append(",".join(str(int(v)) for v in row))
        (directory / "labels.csv").write_text("\n".join(lines) + "\n")

    meta = {
        "name": ds.name,
        "rows": ds.n,
        "cols": ds.dim,
        "C": ds.num_classes,
        "seed": ds.seed,
    }
    if extra_meta:
        meta.update(extra_meta)
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_dataset(directory) -> MultiLabelDataset:
    """Read a dataset directory written by ``save_dataset``."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    features_path = directory / "features.csv"
    if not features_path.is_file():
        raise DataError(f"no features.csv in {directory}")
    features = np.loadtxt(features_path, delimiter=",", skiprows=1, ndmin=2)

    labels = None
    labels_path = directory / "labels.csv"
    if labels_path.is_file():
        labels = np.loadtxt(labels_path, delimiter=",", skiprows=1, ndmin=2)

    name = directory.name
    seed = None
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text())
        name = meta.get("name", name)
        seed = meta.get("seed")
        if meta.get("rows") != features.shape[0] or meta.get("cols") != features.shape[1]:
            raise DataError(
                f"{directory}: meta.json declares shape "
                f"({meta.get('rows')}, {meta.get('cols')}) but features.csv "
                f"has {features.shape}"
            )
        if labels is not None and meta.get("C") != labels.shape[1]:
            raise DataError(
                f"{directory}: meta.json declares C={meta.get('C')} but "
                f"labels.csv has {labels.shape[1]} columns"
            )
    return MultiLabelDataset(name=name, features=features, labels=labels, seed=seed)
