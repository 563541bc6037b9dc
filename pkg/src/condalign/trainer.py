"""Training orchestration: source pre-training, then joint adaptation.

Each adaptation step forwards one batch per domain, pseudo-labels the
confident target rows, and assembles one composite update: cross-entropy
on the source, conditional-discrepancy alignment between the source batch
and the selected target rows, and the mutual-information regularizer on
the full target batch. The partial mode swaps in the capped
mutual-information loss; ablation flags drop individual terms.
"""

import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .cmmd import cmmd_loss
from .data import DomainDataset, batch_sampler
from .errors import ConfigError
from .kernels import KernelSpec, LabeledBatch
from .mlp import (
    AdamState,
    MlpModel,
    adam_step,
    backward,
    cross_entropy,
    forward,
    init_mlp,
)
from .mutual_info import conditional_entropy_loss, mi_loss, partial_mi_loss
from .pseudo import select_pseudo_labels

__all__ = [
    "TrainConfig",
    "StepMetrics",
    "TrainResult",
    "pretrain",
    "adapt_step",
    "train",
    "evaluate",
    "metrics_to_dict",
]

log = logging.getLogger("condalign")

MODES = ("uda", "partial")


@dataclass
class TrainConfig:
    """Scalar hyper-parameters of a full run (defaults per protocol)."""

    lambda0: float = 0.1  # conditional-discrepancy weight
    lambda1: float = 0.2  # mutual-information weight
    gamma0: float = 0.95  # pseudo-label confidence threshold
    gamma1: float = 1.5  # marginal-entropy cap (partial mode)
    reg_lambda: float = 1e-3
    batch_n: int = 32
    pretrain_epochs: int = 20
    adapt_steps: int = 2000
    lr_feature: float = 2e-4
    lr_classifier: float = 2e-4
    seed: int = 0
    mode: str = "uda"
    no_cmmd: bool = False
    no_marginal_entropy: bool = False
    use_true_labels: bool = False
    hidden_dims: tuple = (64, 64)
    early_stop: bool = False
    log_every: int = 10
    eval_every: int = 50

    def __post_init__(self):
        if self.lambda0 < 0 or self.lambda1 < 0:
            raise ConfigError("lambda0 and lambda1 must be >= 0")
        if not 0.0 < self.gamma0 < 1.0:
            raise ConfigError("gamma0 must be in (0, 1)")
        if not self.gamma1 > 0:
            raise ConfigError("gamma1 must be > 0")
        if not self.reg_lambda > 0:
            raise ConfigError("reg_lambda must be > 0")
        if self.batch_n < 2:
            raise ConfigError("batch_n must be >= 2")
        if self.pretrain_epochs < 0 or self.adapt_steps < 0:
            raise ConfigError("epoch/step counts must be >= 0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.log_every < 1 or self.eval_every < 1:
            raise ConfigError("log_every and eval_every must be >= 1")
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(reg_lambda=self.reg_lambda)


@dataclass
class StepMetrics:
    step: int
    loss_sc: float
    loss_cmmd: float
    loss_mi: float
    loss_total: float
    pseudo_count: int
    pseudo_accuracy: float
    target_accuracy: float


METRIC_FIELDS = [f.name for f in fields(StepMetrics)]


def metrics_to_dict(m: StepMetrics) -> dict:
    """JSON-safe dict in declaration order (NaN becomes null)."""
    out = {}
    for name in METRIC_FIELDS:
        v = getattr(m, name)
        if isinstance(v, float) and math.isnan(v):
            v = None
        out[name] = v
    return out


@dataclass
class TrainResult:
    model: MlpModel
    metrics: list
    summary: dict


def _one_hot(labels: np.ndarray, class_count: int) -> np.ndarray:
    out = np.zeros((labels.size, class_count))
    out[np.arange(labels.size), labels] = 1.0
    return out


def pretrain(model: MlpModel, source: DomainDataset, cfg: TrainConfig) -> MlpModel:
    """Cross-entropy training on the labeled source domain, in place."""
    if np.any(source.labels < 0):
        raise ConfigError("pretraining requires a fully labeled source domain")
    if cfg.pretrain_epochs == 0:
        return model
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    state = AdamState.for_model(model)
    y_all = source.one_hot()
    for _ in range(cfg.pretrain_epochs):
        order = rng.permutation(source.size)
        for start in range(0, source.size, cfg.batch_n):
            idx = order[start : start + cfg.batch_n]
            trace = forward(model, source.x[idx])
            _, grad_probs = cross_entropy(trace.probs, y_all[idx])
            grads = backward(model, trace, grad_probs=grad_probs)
            adam_step(model, grads, state, cfg.lr_classifier, cfg.lr_classifier)
    return model


def adapt_step(
    model: MlpModel,
    state: AdamState,
    spec: KernelSpec,
    x_s: np.ndarray,
    y_s: np.ndarray,
    x_t: np.ndarray,
    cfg: TrainConfig,
    y_t_true=None,
    step: int = 0,
) -> StepMetrics:
    """One joint optimization step; updates model and state in place.

    ``y_s`` is one-hot; ``y_t_true`` (int labels) is used only for the
    pseudo-label accuracy metric, except in ground-truth mode where it
    replaces the pseudo-labels inside the alignment loss.
    """
    trace_s = forward(model, x_s)
    trace_t = forward(model, x_t)

    loss_sc, grad_probs_s = cross_entropy(trace_s.probs, y_s)

    sel_idx, sel_labels = select_pseudo_labels(trace_t.probs, cfg.gamma0)
    pseudo_count = int(sel_idx.size)
    pseudo_accuracy = math.nan
    if y_t_true is not None and pseudo_count:
        truth = np.asarray(y_t_true)[sel_idx]
        known = truth >= 0
        if known.any():
            pseudo_accuracy = float(
                np.mean(sel_labels[known].argmax(axis=1) == truth[known])
            )

    use_cmmd = cfg.lambda0 > 0 and not cfg.no_cmmd
    loss_cmmd = 0.0
    grad_feat_s = None
    grad_feat_t = None
    if use_cmmd:
        if cfg.use_true_labels:
            if y_t_true is None or np.any(np.asarray(y_t_true) < 0):
                raise ConfigError("use_true_labels requires labeled target batches")
            cm_idx = np.arange(x_t.shape[0])
            cm_labels = _one_hot(np.asarray(y_t_true), y_s.shape[1])
        else:
            cm_idx, cm_labels = sel_idx, sel_labels
        if cm_idx.size:
            res = cmmd_loss(
                LabeledBatch(trace_s.features, y_s),
                LabeledBatch(trace_t.features[cm_idx], cm_labels),
                spec,
            )
            loss_cmmd = res.value
            grad_feat_s = cfg.lambda0 * res.grad_zs
            grad_feat_t = np.zeros_like(trace_t.features)
            grad_feat_t[cm_idx] = cfg.lambda0 * res.grad_zt

    loss_mi = 0.0
    grad_probs_t = None
    if cfg.lambda1 > 0:
        if cfg.no_marginal_entropy:
            loss_mi, mi_grad = conditional_entropy_loss(trace_t.probs)
        elif cfg.mode == "partial":
            loss_mi, mi_grad = partial_mi_loss(trace_t.probs, cfg.gamma1)
        else:
            loss_mi, mi_grad = mi_loss(trace_t.probs)
        grad_probs_t = cfg.lambda1 * mi_grad

    grads = backward(model, trace_s, grad_probs=grad_probs_s, grad_features=grad_feat_s)
    if grad_probs_t is not None or grad_feat_t is not None:
        grads.add_(
            backward(model, trace_t, grad_probs=grad_probs_t, grad_features=grad_feat_t)
        )
    adam_step(model, grads, state, cfg.lr_feature, cfg.lr_classifier)

    loss_total = loss_sc + cfg.lambda0 * loss_cmmd + cfg.lambda1 * loss_mi
    return StepMetrics(
        step=step,
        loss_sc=loss_sc,
        loss_cmmd=loss_cmmd,
        loss_mi=loss_mi,
        loss_total=loss_total,
        pseudo_count=pseudo_count,
        pseudo_accuracy=pseudo_accuracy,
        target_accuracy=math.nan,
    )


def evaluate(model: MlpModel, ds: DomainDataset):
    """Accuracy, per-class accuracy, and confusion matrix on labeled rows."""
    preds = forward(model, ds.x).probs.argmax(axis=1)
    known = ds.labels >= 0
    c = ds.class_count
    confusion = np.zeros((c, c), dtype=np.int64)
    if known.any():
        truth = ds.labels[known]
        np.add.at(confusion, (truth, preds[known]), 1)
        accuracy = float(np.mean(preds[known] == truth))
    else:
        accuracy = math.nan
    per_class = []
    for k in range(c):
        total = confusion[k].sum()
        per_class.append(float(confusion[k, k] / total) if total else math.nan)
    return accuracy, per_class, confusion, preds


def _class_fractions(preds: np.ndarray, class_count: int) -> list:
    return [float(np.mean(preds == k)) for k in range(class_count)]


def train(source: DomainDataset, target: DomainDataset, cfg: TrainConfig) -> TrainResult:
    """Full procedure: pre-train on source, then adapt for cfg.adapt_steps."""
    if source.class_count != target.class_count:
        raise ConfigError("source and target must share one label space")
    model = init_mlp(
        source.x.shape[1],
        cfg.hidden_dims,
        source.class_count,
        seed=np.random.SeedSequence([cfg.seed, 0]),
    )
    pretrain(model, source, cfg)

    pre_src_acc, _, _, _ = evaluate(model, source)
    pre_tgt_acc, _, _, pre_preds = evaluate(model, target)
    log.info("pretrain done: source acc %.4f, target acc %.4f", pre_src_acc, pre_tgt_acc)

    spec = cfg.kernel_spec()
    src_batches = batch_sampler(source, cfg.batch_n, np.random.SeedSequence([cfg.seed, 2]))
    tgt_batches = batch_sampler(target, cfg.batch_n, np.random.SeedSequence([cfg.seed, 3]))
    y_source = source.one_hot()

    state = AdamState.for_model(model)
    metrics = []
    totals = []
    stopped_at = None
    for step in range(1, cfg.adapt_steps + 1):
        si = next(src_batches)
        ti = next(tgt_batches)
        m = adapt_step(
            model,
            state,
            spec,
            source.x[si],
            y_source[si],
            target.x[ti],
            cfg,
            y_t_true=target.labels[ti],
            step=step,
        )
        if step % cfg.eval_every == 0 or step == cfg.adapt_steps:
            m.target_accuracy, _, _, _ = evaluate(model, target)
            log.info(
                "step %d: total %.5f (sc %.5f cmmd %.5f mi %.5f) tgt acc %s",
                step, m.loss_total, m.loss_sc, m.loss_cmmd, m.loss_mi, m.target_accuracy,
            )
        metrics.append(m)
        totals.append(m.loss_total)
        if cfg.early_stop and step >= 200:
            recent = np.mean(totals[-100:])
            prev = np.mean(totals[-200:-100])
            if abs(recent - prev) < 1e-5:
                stopped_at = step
                break

    src_acc, src_per_class, src_conf, _ = evaluate(model, source)
    tgt_acc, tgt_per_class, tgt_conf, tgt_preds = evaluate(model, target)
    summary = {
        "mode": cfg.mode,
        "steps_run": metrics[-1].step if metrics else 0,
        "early_stopped_at": stopped_at,
        "pretrain": {
            "source_accuracy": pre_src_acc,
            "target_accuracy": pre_tgt_acc,
            "target_class_fractions": _class_fractions(pre_preds, target.class_count),
        },
        "source_accuracy": src_acc,
        "target_accuracy": tgt_acc,
        "per_class_accuracy": tgt_per_class,
        "confusion": tgt_conf.tolist(),
        "target_class_fractions": _class_fractions(tgt_preds, target.class_count),
        "source_per_class_accuracy": src_per_class,
        "source_confusion": src_conf.tolist(),
    }
    return TrainResult(model, metrics, summary)
