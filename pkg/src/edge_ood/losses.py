"""The three training loss terms and their combination, with exact gradients.

Gradients are taken with respect to the logits and reported per source:
``grad_id`` matches the ID logit batch, ``grad_oe`` the outlier-exposure
batch. A loss that does not touch a source leaves that block None.

Conventions pinned here:
  * bottom-k selection breaks energy ties by lower row index;
  * a hinge sitting exactly at zero is inactive (zero gradient);
  * the bottom-k reference is computed per mini-batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_matrix, ensure_finite, sigmoid, softplus
from .errors import DataError, EmptyInputError, ParameterError, ShapeError

__all__ = [
    "EdgeWeights",
    "LossValue",
    "loss_id",
    "loss_conf",
    "bottom_k_energy",
    "loss_gap",
    "loss_edge",
]


@dataclass(frozen=True)
class EdgeWeights:
    """Weights of the combined objective: id + alpha*conf + beta*gap."""

    alpha: float
    beta: float
    margin: float
    k: int

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.margin < 0:
            raise ParameterError("alpha, beta and margin must be >= 0")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class LossValue:
    """Scalar loss plus its gradient blocks (one per logit source)."""

    value: float
    grad_id: np.ndarray | None = None
    grad_oe: np.ndarray | None = None


def _check_batch(logits, name: str) -> np.ndarray:
    m = as_matrix(logits, name)
    if m.shape[0] == 0 or m.shape[1] == 0:
        raise EmptyInputError(f"{name} batch is empty (shape {m.shape})")
    ensure_finite(m, name)
    return m


def loss_id(logits, labels) -> LossValue:
    """Per-class binary cross-entropy, averaged over classes and samples.

    Uses the softplus form softplus(f) - y*f per entry, which is exact and
    overflow-free for saturated logits.
    """
    f = _check_batch(logits, "id logits")
    y = np.asarray(labels)
    if y.shape != f.shape:
        raise ShapeError(f"labels shape {y.shape} != logits shape {f.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be exactly 0 or 1")
    y = y.astype(np.float64)
    n, c = f.shape
    value = float((softplus(f) - y * f).sum() / (n * c))
    grad = (sigmoid(f) - y) / (n * c)
    return LossValue(value=value, grad_id=grad)


def loss_conf(oe_logits) -> LossValue:
    """-log(1 - sigma(f)) on every class of every OE sample.

    Each term equals softplus(f), so the gradient sigma(f)/(C*batch) is
    entrywise non-negative: minimizing only pushes OE logits down.
    """
    f = _check_batch(oe_logits, "oe logits")
    n, c = f.shape
    value = float(softplus(f).sum() / (n * c))
    grad = sigmoid(f) / (n * c)
    return LossValue(value=value, grad_oe=grad)


def bottom_k_energy(id_logits, k: int):
    """Mean of the k smallest per-row joint energies in the batch.

    Returns (value, indices) where indices are the selected rows in
    ascending-energy order, ties broken by lower row index.
    """
    f = _check_batch(id_logits, "id logits")
    n = f.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    energies = softplus(f).sum(axis=1)
    order = np.argsort(energies, kind="stable")
    selected = order[:k]
    return float(energies[selected].mean()), selected


def loss_gap(id_logits, oe_logits, k: int, margin: float) -> LossValue:
    """Hinge on the gap between each OE joint energy and the ID bottom-k mean.

    value = mean over OE rows of [E(oe) - E_bottom_k(id) + margin]_+.
    Gradients: sigma(f)/n_oe on active OE rows; -(a/k)*sigma(f) on the k
    selected ID rows, where a is the active fraction of the OE batch.
    """
    if margin < 0:
        raise ParameterError(f"margin must be >= 0, got {margin}")
    f_id = _check_batch(id_logits, "id logits")
    f_oe = _check_batch(oe_logits, "oe logits")
    ek, selected = bottom_k_energy(f_id, k)
    oe_energy = softplus(f_oe).sum(axis=1)
    hinge = oe_energy - ek + margin
    active = hinge > 0
    n_oe = f_oe.shape[0]
    value = float(np.where(active, hinge, 0.0).mean())

    grad_oe = np.zeros_like(f_oe)
    grad_oe[active] = sigmoid(f_oe[active]) / n_oe
    grad_id = np.zeros_like(f_id)
    active_fraction = float(active.sum()) / n_oe
    if active_fraction > 0:
        grad_id[selected] = -(active_fraction / k) * sigmoid(f_id[selected])
    return LossValue(value=value, grad_id=grad_id, grad_oe=grad_oe)


def loss_edge(id_logits, labels, oe_logits, w: EdgeWeights) -> LossValue:
    """id + alpha*conf + beta*gap, gradients assembled per source block."""
    lid = loss_id(id_logits, labels)
    lconf = loss_conf(oe_logits)
    lgap = loss_gap(id_logits, oe_logits, w.k, w.margin)
    value = lid.value + w.alpha * lconf.value + w.beta * lgap.value
    grad_id = lid.grad_id + w.beta * lgap.grad_id
    grad_oe = w.alpha * lconf.grad_oe + w.beta * lgap.grad_oe
    return LossValue(value=value, grad_id=grad_id, grad_oe=grad_oe)
