"""Two-layer multi-label classifier and the unknown-aware training loop.

The model is x -> h = relu(x @ w1 + b1) -> logits = h @ w_cls + b_cls.
Training runs plain SGD with momentum and weight decay; the gap-loss weight
beta is forced to 0 for epochs before the transform epoch. Everything is
deterministic given the config seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import MultiLabelDataset, as_matrix, ensure_finite
from .errors import ConfigError, DataError, NumericError, ParameterError, ShapeError
from .losses import EdgeWeights, loss_conf, loss_gap, loss_id

__all__ = [
    "MlpModel",
    "ParamGrads",
    "EdgeConfig",
    "EpochRecord",
    "TrainHistory",
    "init_model",
    "train_edge",
    "save_checkpoint",
    "load_checkpoint",
    "save_history",
]


@dataclass
class ParamGrads:
    w1: np.ndarray
    b1: np.ndarray
    w_cls: np.ndarray
    b_cls: np.ndarray


@dataclass
class MlpModel:
    w1: np.ndarray      # (d, d1)
    b1: np.ndarray      # (d1,)
    w_cls: np.ndarray   # (d1, C)
    b_cls: np.ndarray   # (C,)

    @property
    def dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w_cls.shape[1]

    def forward(self, x):
        """Return (penultimate features, logits) for a batch of inputs."""
        x = as_matrix(x, "model input")
        if x.shape[1] != self.dim:
            raise ShapeError(
                f"model expects {self.dim} input columns, got {x.shape[1]}"
            )
        features = np.maximum(x @ self.w1 + self.b1, 0.0)
        logits = features @ self.w_cls + self.b_cls
        return features, logits

    def backward(self, x, grad_logits) -> ParamGrads:
        """Parameter gradients for an upstream gradient on the logits.

        The rectifier subgradient at exactly 0 is taken as 0.
        """
        x = as_matrix(x, "model input")
        g = as_matrix(grad_logits, "upstream gradient")
        if x.shape[1] != self.dim:
            raise ShapeError(
                f"model expects {self.dim} input columns, got {x.shape[1]}"
            )
        if g.shape != (x.shape[0], self.num_classes):
            raise ShapeError(
                f"upstream gradient shape {g.shape} does not match "
                f"({x.shape[0]}, {self.num_classes})"
            )
        pre = x @ self.w1 + self.b1
        h = np.maximum(pre, 0.0)
        gw_cls = h.T @ g
        gb_cls = g.sum(axis=0)
        dh = g @ self.w_cls.T
        dpre = dh * (pre > 0)
        gw1 = x.T @ dpre
        gb1 = dpre.sum(axis=0)
        return ParamGrads(w1=gw1, b1=gb1, w_cls=gw_cls, b_cls=gb_cls)

    def parameters(self):
        return [self.w1, self.b1, self.w_cls, self.b_cls]


@dataclass
class EdgeConfig:
    """All training hyper-parameters."""

    alpha: float = 0.0
    beta: float = 0.0
    margin: float = 2.0
    k: int = 8
    epochs: int = 14
    transform_epoch: int = 7
    batch_size: int = 128
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    d1: int = 16

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.margin < 0:
            raise ConfigError("alpha, beta and margin must be >= 0")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.transform_epoch <= self.epochs:
            raise ConfigError(
                f"transform_epoch must be in [0, epochs], got {self.transform_epoch}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.batch_size < self.k:
            raise ConfigError(
                f"batch_size ({self.batch_size}) must be >= k ({self.k})"
            )
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.d1 < 1:
            raise ConfigError(f"d1 must be >= 1, got {self.d1}")

    @property
    def weights(self) -> EdgeWeights:
        return EdgeWeights(self.alpha, self.beta, self.margin, self.k)


@dataclass
class EpochRecord:
    epoch: int
    loss_id: float
    loss_conf: float
    loss_gap: float
    total: float
    beta_effective: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


def init_model(dim: int, d1: int, num_classes: int, rng: np.random.Generator) -> MlpModel:
    """Symmetric uniform init scaled by 1/sqrt(fan_in)."""
    bound1 = 1.0 / np.sqrt(dim)
    bound2 = 1.0 / np.sqrt(d1)
    return MlpModel(
        w1=rng.uniform(-bound1, bound1, size=(dim, d1)),
        b1=rng.uniform(-bound1, bound1, size=d1),
        w_cls=rng.uniform(-bound2, bound2, size=(d1, num_classes)),
        b_cls=rng.uniform(-bound2, bound2, size=num_classes),
    )


class _CyclingSampler:
    """Yields shuffled index blocks, reshuffling whenever a pass completes."""

    def __init__(self, n: int, rng: np.random.Generator):
        self._n = n
        self._rng = rng
        self._order = rng.permutation(n)
        self._pos = 0

    def take(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            if self._pos == self._n:
                self._order = self._rng.permutation(self._n)
                self._pos = 0
            grab = min(count - filled, self._n - self._pos)
            out[filled : filled + grab] = self._order[self._pos : self._pos + grab]
            self._pos += grab
            filled += grab
        return out


def train_edge(
    d_in: MultiLabelDataset, d_oe: MultiLabelDataset, cfg: EdgeConfig
) -> tuple[MlpModel, TrainHistory]:
    """Run the full training loop and return the model plus epoch history.

    Each step draws one ID batch (seeded shuffle, partial batches smaller
    than k are dropped) and one OE batch of the same size (cycled
    independently of ID epoch boundaries). Epochs before transform_epoch
    use beta_effective = 0 and skip the gap loss entirely; its history
    column is 0 for those epochs.
    """
    if d_in.labels is None:
        raise DataError(f"ID dataset '{d_in.name}' must be labeled")
    if d_oe.n == 0:
        raise DataError(f"OE dataset '{d_oe.name}' is empty")
    if cfg.k > d_in.n:
        raise ParameterError(f"k ({cfg.k}) exceeds ID dataset size ({d_in.n})")

    ss = np.random.SeedSequence(cfg.seed)
    seed_init, seed_id, seed_oe = ss.spawn(3)
    rng_init = np.random.default_rng(seed_init)
    rng_id = np.random.default_rng(seed_id)
    oe_sampler = _CyclingSampler(d_oe.n, np.random.default_rng(seed_oe))

    model = init_model(d_in.dim, cfg.d1, d_in.num_classes, rng_init)
    velocity = [np.zeros_like(p) for p in model.parameters()]

    history = TrainHistory()
    for epoch in range(cfg.epochs):
        beta_eff = 0.0 if epoch < cfg.transform_epoch else cfg.beta
        perm = rng_id.permutation(d_in.n)
        sums = np.zeros(4)
        steps = 0
        for start in range(0, d_in.n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            if idx.size < cfg.k:
                continue
            xb = d_in.features[idx]
            yb = d_in.labels[idx]
            oe_idx = oe_sampler.take(idx.size)
            xo = d_oe.features[oe_idx]

            _, f_id = model.forward(xb)
            _, f_oe = model.forward(xo)
            lid = loss_id(f_id, yb)
            lconf = loss_conf(f_oe)
            grad_id = lid.grad_id
            grad_oe = cfg.alpha * lconf.grad_oe
            gap_value = 0.0
            if beta_eff > 0:
                lgap = loss_gap(f_id, f_oe, cfg.k, cfg.margin)
                gap_value = lgap.value
                grad_id = grad_id + beta_eff * lgap.grad_id
                grad_oe = grad_oe + beta_eff * lgap.grad_oe
            total = lid.value + cfg.alpha * lconf.value + beta_eff * gap_value
            if not np.isfinite(total):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, step {steps}: "
                    f"id={lid.value}, conf={lconf.value}, gap={gap_value}"
                )

            pg_id = model.backward(xb, grad_id)
            pg_oe = model.backward(xo, grad_oe)
            params = model.parameters()
            grads = [
                pg_id.w1 + pg_oe.w1,
                pg_id.b1 + pg_oe.b1,
                pg_id.w_cls + pg_oe.w_cls,
                pg_id.b_cls + pg_oe.b_cls,
            ]
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v += g + cfg.weight_decay * p
                p -= cfg.learning_rate * v

            sums += (lid.value, lconf.value, gap_value, total)
            steps += 1
        if steps == 0:
            raise ParameterError(
                f"epoch {epoch} produced no usable batches "
                f"(n={d_in.n}, batch_size={cfg.batch_size}, k={cfg.k})"
            )
        for p in model.parameters():
            ensure_finite(p, "model parameters")
        means = sums / steps
        history.records.append(
            EpochRecord(
                epoch=epoch,
                loss_id=means[0],
                loss_conf=means[1],
                loss_gap=means[2],
                total=means[3],
                beta_effective=beta_eff,
            )
        )
    return model, history


_PARAM_NAMES = ("w1", "b1", "w_cls", "b_cls")


def save_checkpoint(model: MlpModel, cfg: EdgeConfig, path):
    """JSON checkpoint: shapes, flat full-precision parameters, config."""
    payload = {
        "format": "edge-ood-checkpoint-v1",
        "shapes": {n: list(getattr(model, n).shape) for n in _PARAM_NAMES},
        "params": {n: getattr(model, n).ravel().tolist() for n in _PARAM_NAMES},
        "config": asdict(cfg),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path) -> tuple[MlpModel, EdgeConfig]:
    payload = json.loads(Path(path).read_text())
    try:
        arrays = {
            n: np.asarray(payload["params"][n], dtype=np.float64).reshape(
                payload["shapes"][n]
            )
            for n in _PARAM_NAMES
        }
        cfg = EdgeConfig(**payload["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid checkpoint {path}: {exc}") from exc
    return MlpModel(**arrays), cfg


def save_history(history: TrainHistory, path):
    lines = ["epoch,loss_id,loss_conf,loss_gap,total,beta_effective"]
    for r in history.records:
        lines.append(
            f"{r.epoch},{r.loss_id!r},{r.loss_conf!r},{r.loss_gap!r},"
            f"{r.total!r},{r.beta_effective!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
