"""Deterministic synthetic long-tailed multi-label data generator.

Geometry: each ID class gets a prototype on a sphere of radius
``prototype_scale``; a sample is Gaussian noise around the mean of its
positive-class prototypes. Class frequencies decay like
(class_index + 1) ** -zipf_exponent. Outlier prototypes (separate sets for
the exposure and test pools) live on a sphere of radius
``prototype_scale + oe_shift`` and are rejected until every one sits more
than 2 * noise_sigma away from every ID prototype.

All randomness flows from numpy's PCG64 generator seeded off ``seed`` via
SeedSequence spawning, so identical specs reproduce identical bytes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import MultiLabelDataset
from .errors import ConfigError, DataError, GenerationError

__all__ = ["SynthSpec", "generate", "class_frequency_profile"]

_DISJOINT_RETRIES = 100


@dataclass
class SynthSpec:
    """Knobs of the synthetic benchmark (defaults are the acceptance setup)."""

    C: int = 20
    d: int = 32
    n_train: int = 8000
    n_test: int = 2000
    n_oe: int = 2000
    n_ood: int = 2000
    zipf_exponent: float = 1.2
    prototype_scale: float = 4.0
    noise_sigma: float = 0.6
    cooccur_prob: float = 0.3
    oe_shift: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.C < 1 or self.d < 1:
            raise ConfigError("C and d must be >= 1")
        for name in ("n_train", "n_test", "n_oe", "n_ood"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.zipf_exponent < 0:
            raise ConfigError("zipf_exponent must be >= 0")
        if self.prototype_scale <= 0:
            raise ConfigError("prototype_scale must be > 0")
        if self.noise_sigma <= 0:
            raise ConfigError("noise_sigma must be > 0")
        if not 0 <= self.cooccur_prob <= 1:
            raise ConfigError("cooccur_prob must be in [0, 1]")
        if self.oe_shift < 0:
            raise ConfigError("oe_shift must be >= 0")


def _sphere_points(rng: np.random.Generator, count: int, dim: int, radius: float):
    v = rng.normal(size=(count, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return radius * v / norms


def _outlier_prototypes(
    rng: np.random.Generator,
    id_protos: np.ndarray,
    count: int,
    radius: float,
    min_dist: float,
):
    dim = id_protos.shape[1]
    for _ in range(_DISJOINT_RETRIES):
        protos = _sphere_points(rng, count, dim, radius)
        deltas = protos[:, None, :] - id_protos[None, :, :]
        if np.linalg.norm(deltas, axis=2).min() > min_dist:
            return protos
    raise GenerationError(
        f"could not place {count} outlier prototypes at distance > {min_dist} "
        f"from the ID prototypes after {_DISJOINT_RETRIES} attempts; "
        "increase oe_shift or lower noise_sigma"
    )


def _zipf_probs(c: int, exponent: float) -> np.ndarray:
    weights = (np.arange(c) + 1.0) ** (-exponent)
    return weights / weights.sum()


def _draw_id(
    rng: np.random.Generator, spec: SynthSpec, protos: np.ndarray, n: int, name: str
) -> MultiLabelDataset:
    probs = _zipf_probs(spec.C, spec.zipf_exponent)
    primary = rng.choice(spec.C, size=n, p=probs)
    labels = np.zeros((n, spec.C), dtype=np.int64)
    labels[np.arange(n), primary] = 1
    coins = rng.random(n) < spec.cooccur_prob
    for i in np.flatnonzero(coins):
        rest = probs.copy()
        rest[primary[i]] = 0.0
        secondary = rng.choice(spec.C, p=rest / rest.sum())
        labels[i, secondary] = 1
    centers = (labels @ protos) / labels.sum(axis=1, keepdims=True)
    features = centers + rng.normal(0.0, spec.noise_sigma, size=(n, spec.d))
    return MultiLabelDataset(name=name, features=features, labels=labels, seed=spec.seed)


def _draw_outliers(
    rng: np.random.Generator, spec: SynthSpec, protos: np.ndarray, n: int, name: str
) -> MultiLabelDataset:
    which = rng.integers(0, protos.shape[0], size=n)
    features = protos[which] + rng.normal(0.0, spec.noise_sigma, size=(n, spec.d))
    return MultiLabelDataset(name=name, features=features, labels=None, seed=spec.seed)


def generate(spec: SynthSpec):
    """Build (d_in_train, d_in_test, d_oe, d_ood) from one spec.

    The exposure and test-OOD pools use different prototype sets and
    different random streams, so the two never share samples.
    """
    ss = np.random.SeedSequence(spec.seed)
    (
        s_proto_id,
        s_proto_oe,
        s_proto_ood,
        s_train,
        s_test,
        s_oe,
        s_ood,
    ) = ss.spawn(7)

    id_protos = _sphere_points(
        np.random.default_rng(s_proto_id), spec.C, spec.d, spec.prototype_scale
    )
    out_radius = spec.prototype_scale + spec.oe_shift
    min_dist = 2.0 * spec.noise_sigma
    oe_protos = _outlier_prototypes(
        np.random.default_rng(s_proto_oe), id_protos, spec.C, out_radius, min_dist
    )
    ood_protos = _outlier_prototypes(
        np.random.default_rng(s_proto_ood), id_protos, spec.C, out_radius, min_dist
    )

    d_in_train = _draw_id(
        np.random.default_rng(s_train), spec, id_protos, spec.n_train, "in_train"
    )
    d_in_test = _draw_id(
        np.random.default_rng(s_test), spec, id_protos, spec.n_test, "in_test"
    )
    d_oe = _draw_outliers(np.random.default_rng(s_oe), spec, oe_protos, spec.n_oe, "oe")
    d_ood = _draw_outliers(
        np.random.default_rng(s_ood), spec, ood_protos, spec.n_ood, "ood"
    )
    return d_in_train, d_in_test, d_oe, d_ood


def class_frequency_profile(ds: MultiLabelDataset):
    """(counts, class_ids) with counts sorted descending, ties by class id."""
    if ds.labels is None:
        raise DataError(f"dataset '{ds.name}' has no labels")
    counts = ds.class_counts
    order = np.argsort(-counts, kind="stable")
    return counts[order], order


def spec_to_meta(spec: SynthSpec) -> dict:
    """Spec echo for meta.json files."""
    return {"synth_spec": asdict(spec)}
