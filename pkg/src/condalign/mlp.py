"""Small fully-connected network with hand-written backpropagation.

The network is a feature extractor (dense layers, ReLU by default)
followed by a softmax classifier. ``backward`` accepts two externally
supplied gradients at once: one on the predicted probabilities (routed
through the softmax Jacobian and the classifier) and one injected
directly on the extractor output, which is where the feature-alignment
loss attaches.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError
from .mutual_info import LOG_FLOOR, validate_probs

__all__ = [
    "Layer",
    "MlpModel",
    "ForwardTrace",
    "ParamGrads",
    "AdamState",
    "init_mlp",
    "forward",
    "softmax",
    "cross_entropy",
    "backward",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
]

ACTIVATIONS = ("relu", "identity")
CHECKPOINT_VERSION = 1


@dataclass
class Layer:
    weight: np.ndarray  # (in, out)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MlpModel:
    layers: list  # extractor Layers
    clf_weight: np.ndarray  # (feature_dim, class_count)
    clf_bias: np.ndarray  # (class_count,)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0] if self.layers else self.clf_weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.clf_weight.shape[0]

    @property
    def class_count(self) -> int:
        return self.clf_weight.shape[1]

    def param_arrays(self):
        """All parameter arrays, extractor first, classifier last."""
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        out.append(self.clf_weight)
        out.append(self.clf_bias)
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers],
            self.clf_weight.copy(),
            self.clf_bias.copy(),
        )


@dataclass
class ForwardTrace:
    x: np.ndarray
    layer_inputs: list  # input seen by each extractor layer
    pre_acts: list  # pre-activation of each extractor layer
    features: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


@dataclass
class ParamGrads:
    layer_grads: list  # [(dW, db), ...] matching model.layers
    clf_weight: np.ndarray
    clf_bias: np.ndarray

    def add_(self, other: "ParamGrads"):
        for (dw, db), (ow, ob) in zip(self.layer_grads, other.layer_grads):
            dw += ow
            db += ob
        self.clf_weight += other.clf_weight
        self.clf_bias += other.clf_bias
        return self

    def arrays(self):
        out = []
        for dw, db in self.layer_grads:
            out.append(dw)
            out.append(db)
        out.append(self.clf_weight)
        out.append(self.clf_bias)
        return out


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mlp(input_dim, hidden_dims, class_count, seed=0, activation="relu") -> MlpModel:
    """Glorot-uniform initialized extractor + classifier (biases zero)."""
    rng = np.random.default_rng(seed)
    layers = []
    prev = input_dim
    for h in hidden_dims:
        layers.append(Layer(_glorot(rng, prev, h), np.zeros(h), activation))
        prev = h
    clf_w = _glorot(rng, prev, class_count)
    return MlpModel(layers, clf_w, np.zeros(class_count))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(model: MlpModel, x: np.ndarray) -> ForwardTrace:
    """Run the network, caching per-layer inputs and pre-activations."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"input shape {x.shape}, expected (n, {model.input_dim})")
    h = x
    layer_inputs = []
    pre_acts = []
    for layer in model.layers:
        layer_inputs.append(h)
        pre = h @ layer.weight + layer.bias
        pre_acts.append(pre)
        h = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    features = h
    logits = features @ model.clf_weight + model.clf_bias
    probs = softmax(logits)
    return ForwardTrace(x, layer_inputs, pre_acts, features, logits, probs)


def cross_entropy(probs: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood of one-hot labels, plus d/dprobs.

    The returned gradient is with respect to the probabilities; combine it
    with the softmax Jacobian via :func:`backward`.
    """
    probs = validate_probs(probs)
    labels = np.ascontiguousarray(labels, dtype=np.float64)
    if labels.shape != probs.shape:
        raise ShapeError(f"labels shape {labels.shape} != probs shape {probs.shape}")
    if not np.all((labels == 0.0) | (labels == 1.0)) or np.any(labels.sum(axis=1) != 1.0):
        raise DomainError("labels must be one-hot rows")
    n = probs.shape[0]
    p_true = np.maximum(np.sum(probs * labels, axis=1), LOG_FLOOR)
    value = float(-np.mean(np.log(p_true)))
    grad = -labels / (n * np.maximum(probs, LOG_FLOOR))
    return value, grad


def _softmax_vjp(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    inner = np.sum(grad_probs * probs, axis=1, keepdims=True)
    return probs * (grad_probs - inner)


def backward(model: MlpModel, trace: ForwardTrace, grad_probs=None, grad_features=None) -> ParamGrads:
    """Backpropagate external gradients to all parameters.

    Accumulates both paths: ``grad_probs`` flows through the softmax
    Jacobian and classifier into the extractor; ``grad_features`` is added
    directly at the extractor output. Either may be None (treated as zero).
    """
    n, fd = trace.features.shape
    if grad_probs is None and grad_features is None:
        return ParamGrads(
            [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers],
            np.zeros_like(model.clf_weight),
            np.zeros_like(model.clf_bias),
        )
    if grad_probs is not None:
        if grad_probs.shape != trace.probs.shape:
            raise ShapeError(f"grad_probs shape {grad_probs.shape} != {trace.probs.shape}")
        g_logits = _softmax_vjp(trace.probs, grad_probs)
        d_clf_w = trace.features.T @ g_logits
        d_clf_b = g_logits.sum(axis=0)
        g_feat = g_logits @ model.clf_weight.T
    else:
        d_clf_w = np.zeros_like(model.clf_weight)
        d_clf_b = np.zeros_like(model.clf_bias)
        g_feat = np.zeros((n, fd))
    if grad_features is not None:
        if grad_features.shape != trace.features.shape:
            raise ShapeError(
                f"grad_features shape {grad_features.shape} != {trace.features.shape}"
            )
        g_feat = g_feat + grad_features

    layer_grads = [None] * len(model.layers)
    g = g_feat
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        if layer.activation == "relu":
            g = g * (trace.pre_acts[k] > 0.0)
        layer_grads[k] = (trace.layer_inputs[k].T @ g, g.sum(axis=0))
        g = g @ layer.weight.T
    return ParamGrads(layer_grads, d_clf_w, d_clf_b)


@dataclass
class AdamState:
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_model(cls, model: MlpModel) -> "AdamState":
        params = model.param_arrays()
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    model: MlpModel,
    grads: ParamGrads,
    state: AdamState,
    lr_feature: float,
    lr_classifier: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One Adam update in place; extractor and classifier have separate rates."""
    params = model.param_arrays()
    garrs = grads.arrays()
    # last two arrays are the classifier weight and bias
    lrs = [lr_feature] * (len(params) - 2) + [lr_classifier] * 2
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for p, g, m, v, lr in zip(params, garrs, state.m, state.v, lrs):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return model, state


def save_checkpoint(model: MlpModel, path):
    """Write the model as versioned JSON (float64 round-trips exactly)."""
    doc = {
        "format": "condalign-mlp",
        "version": CHECKPOINT_VERSION,
        "layers": [
            {
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in model.layers
        ],
        "classifier": {
            "weight": model.clf_weight.tolist(),
            "bias": model.clf_bias.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_checkpoint(path) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "condalign-mlp" or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format in {path}")
    layers = [
        Layer(
            np.asarray(entry["weight"], dtype=np.float64),
            np.asarray(entry["bias"], dtype=np.float64),
            entry["activation"],
        )
        for entry in doc["layers"]
    ]
    clf = doc["classifier"]
    return MlpModel(
        layers,
        np.asarray(clf["weight"], dtype=np.float64),
        np.asarray(clf["bias"], dtype=np.float64),
    )
