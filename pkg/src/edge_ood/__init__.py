"""Energy-gap toolkit for multi-label out-of-distribution detection.

Modules:
  core     numeric kernels (sigmoid, softplus, matmul, Jacobi SVD) and the
           dataset container with its CSV/JSON directory format
  scoring  OOD score functions and the thresholded decision
  losses   the three training loss terms with exact logit gradients
  model    two-layer classifier, training loop, checkpoints
  oesel    outlier-exposure selection via singular-spectrum distance
  metrics  FPR95 / AUROC / AUPR, multi-label mAP, tail curve
  synth    deterministic long-tailed synthetic benchmark generator
  cli      reproducible command-line pipelines with manifests
"""

__version__ = "0.1.0"

from .core import MultiLabelDataset, load_dataset, save_dataset, sigmoid, softplus
from .errors import (
    ConfigError,
    DataError,
    EdgeOodError,
    EmptyInputError,
    GenerationError,
    NumericError,
    ParameterError,
    ShapeError,
)
from .losses import EdgeWeights, LossValue, bottom_k_energy, loss_conf, loss_edge, loss_gap, loss_id
from .metrics import (
    DetectionReport,
    TailCurve,
    aupr,
    auroc,
    detection_report,
    fpr_at_tpr,
    mean_average_precision,
    tail_curve,
)
from .model import EdgeConfig, MlpModel, TrainHistory, init_model, train_edge
from .oesel import DilationReport, dilation_distance, mean_dilation, select_oe
from .scoring import (
    Decision,
    ScoreKind,
    ScoreVector,
    decide,
    joint_energy,
    max_energy,
    max_logit,
    msp,
    score_dataset,
    score_histogram,
)
from .synth import SynthSpec, class_frequency_profile, generate

__all__ = [
    "__version__",
    "MultiLabelDataset",
    "load_dataset",
    "save_dataset",
    "sigmoid",
    "softplus",
    "EdgeOodError",
    "ShapeError",
    "ParameterError",
    "EmptyInputError",
    "DataError",
    "NumericError",
    "ConfigError",
    "GenerationError",
    "EdgeWeights",
    "LossValue",
    "loss_id",
    "loss_conf",
    "loss_gap",
    "loss_edge",
    "bottom_k_energy",
    "EdgeConfig",
    "MlpModel",
    "TrainHistory",
    "init_model",
    "train_edge",
    "DilationReport",
    "dilation_distance",
    "mean_dilation",
    "select_oe",
    "DetectionReport",
    "TailCurve",
    "auroc",
    "fpr_at_tpr",
    "aupr",
    "mean_average_precision",
    "detection_report",
    "tail_curve",
    "ScoreKind",
    "Decision",
    "ScoreVector",
    "joint_energy",
    "max_energy",
    "max_logit",
    "msp",
    "score_dataset",
    "score_histogram",
    "decide",
    "SynthSpec",
    "generate",
    "class_frequency_profile",
]
