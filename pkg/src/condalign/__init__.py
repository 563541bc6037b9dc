"""Conditional-distribution alignment for unsupervised domain adaptation.

Kernel-based conditional-discrepancy loss with analytic gradients,
mutual-information regularization with a partial-label-space variant,
confidence-thresholded pseudo-labeling, and a hand-differentiated MLP
trainer covering both the standard and partial adaptation procedures.
"""

from .backend import active_backend
from .cmmd import CmmdResult, cmmd_from_grams, cmmd_loss
from .data import (
    DomainDataset,
    batch_sampler,
    load_csv,
    make_partial_target,
    make_shifted_clusters,
    save_csv,
)
from .kernels import (
    DEFAULT_BANDWIDTHS,
    KernelSpec,
    LabeledBatch,
    gaussian_mixture_kernel,
    gram,
    gram_gradient,
    label_gram,
)
from .linalg import matmul, solve_spd, trace_product
from .mlp import (
    AdamState,
    MlpModel,
    adam_step,
    backward,
    cross_entropy,
    forward,
    init_mlp,
    load_checkpoint,
    save_checkpoint,
    softmax,
)
from .mutual_info import conditional_entropy_loss, entropy, mi_loss, partial_mi_loss
from .pseudo import select_pseudo_labels
from .trainer import StepMetrics, TrainConfig, TrainResult, adapt_step, evaluate, pretrain, train

__version__ = "0.1.0"

__all__ = [
    "active_backend",
    "CmmdResult",
    "cmmd_from_grams",
    "cmmd_loss",
    "DomainDataset",
    "batch_sampler",
    "load_csv",
    "make_partial_target",
    "make_shifted_clusters",
    "save_csv",
    "DEFAULT_BANDWIDTHS",
    "KernelSpec",
    "LabeledBatch",
    "gaussian_mixture_kernel",
    "gram",
    "gram_gradient",
    "label_gram",
    "matmul",
    "solve_spd",
    "trace_product",
    "AdamState",
    "MlpModel",
    "adam_step",
    "backward",
    "cross_entropy",
    "forward",
    "init_mlp",
    "load_checkpoint",
    "save_checkpoint",
    "softmax",
    "conditional_entropy_loss",
    "entropy",
    "mi_loss",
    "partial_mi_loss",
    "select_pseudo_labels",
    "StepMetrics",
    "TrainConfig",
    "TrainResult",
    "adapt_step",
    "evaluate",
    "pretrain",
    "train",
    "__version__",
]
