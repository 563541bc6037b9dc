"""Finite-difference verification of every analytic gradient in the package.

Four suites: the conditional-discrepancy feature gradients, the two
mutual-information gradients (checked along simplex tangent directions),
and the composite objective backpropagated through the MLP. Each suite
reports its maximum relative error over randomized trials; the CLI exits
nonzero when a threshold is breached.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .cmmd import cmmd_loss
from .kernels import KernelSpec, LabeledBatch
from .mlp import backward, cross_entropy, forward, init_mlp
from .mutual_info import mi_loss, partial_mi_loss

__all__ = ["GradReport", "run_suites", "THRESHOLDS", "central_diff", "rel_err"]

FD_STEP = 1e-5

THRESHOLDS = {
    "cmmd": 1e-5,
    "mi": 1e-5,
    "partial_mi": 1e-5,
    "composite": 1e-4,
}


def central_diff(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Elementwise central finite differences of a scalar function."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    """Max elementwise relative error with a small-denominator floor."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


@dataclass
class GradReport:
    suite: str
    max_rel_err: float
    threshold: float
    worst_case: dict

    @property
    def ok(self) -> bool:
        return self.max_rel_err <= self.threshold


def _random_cmmd_instance(rng):
    n_s = int(rng.integers(2, 8))
    n_t = int(rng.integers(2, 8))
    d = int(rng.integers(1, 5))
    c = int(rng.integers(2, 4))
    z_s = rng.uniform(-1.0, 1.0, (n_s, d))
    z_t = rng.uniform(-1.0, 1.0, (n_t, d))
    y_s = np.eye(c)[rng.integers(0, c, n_s)]
    y_t = np.eye(c)[rng.integers(0, c, n_t)]
    return z_s, y_s, z_t, y_t


def check_cmmd(seed: int, trials: int) -> GradReport:
    spec = KernelSpec()
    worst = (0.0, {})
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 10, trial]))
        z_s, y_s, z_t, y_t = _random_cmmd_instance(rng)
        res = cmmd_loss(LabeledBatch(z_s, y_s), LabeledBatch(z_t, y_t), spec)

        def value():
            return cmmd_loss(LabeledBatch(z_s, y_s), LabeledBatch(z_t, y_t), spec).value

        err = max(
            rel_err(res.grad_zs, central_diff(value, z_s)),
            rel_err(res.grad_zt, central_diff(value, z_t)),
        )
        if err > worst[0]:
            worst = (err, {"trial": trial, "z_s": z_s.tolist(), "z_t": z_t.tolist()})
    return GradReport("cmmd", worst[0], THRESHOLDS["cmmd"], worst[1])


def _random_probs(rng, n, c):
    p = rng.uniform(0.1, 1.0, (n, c))
    return p / p.sum(axis=1, keepdims=True)


def _check_mi_like(name, loss_fn, seed, trials) -> GradReport:
    worst = (0.0, {})
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 20, trial]))
        n = int(rng.integers(2, 10))
        c = int(rng.integers(2, 6))
        probs = _random_probs(rng, n, c)
        _, grad = loss_fn(probs)
        # compare directional derivatives along simplex tangent directions,
        # one per entry: v = e_ij - (1/c) * ones(row i)
        analytic = grad - grad.mean(axis=1, keepdims=True)
        numeric = np.zeros_like(probs)
        h = FD_STEP
        for i in range(n):
            for j in range(c):
                v = np.zeros_like(probs)
                v[i] = -1.0 / c
                v[i, j] += 1.0
                fp = loss_fn(probs + h * v)[0]
                fm = loss_fn(probs - h * v)[0]
                numeric[i, j] = (fp - fm) / (2.0 * h)
        err = rel_err(analytic, numeric)
        if err > worst[0]:
            worst = (err, {"trial": trial, "probs": probs.tolist()})
    return GradReport(name, worst[0], THRESHOLDS[name], worst[1])


def check_mi(seed: int, trials: int) -> GradReport:
    return _check_mi_like("mi", mi_loss, seed, trials)


def check_partial_mi(seed: int, trials: int) -> GradReport:
    # alternate gamma1 across trials so both branches get exercised
    worst = (0.0, {})
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 30, trial]))
        n = int(rng.integers(2, 10))
        c = int(rng.integers(2, 6))
        probs = _random_probs(rng, n, c)
        gamma1 = 0.05 if trial % 2 else 50.0

        def f(p):
            return partial_mi_loss(p, gamma1)

        _, grad = f(probs)
        analytic = grad - grad.mean(axis=1, keepdims=True)
        numeric = np.zeros_like(probs)
        for i in range(n):
            for j in range(c):
                v = np.zeros_like(probs)
                v[i] = -1.0 / c
                v[i, j] += 1.0
                numeric[i, j] = (f(probs + FD_STEP * v)[0] - f(probs - FD_STEP * v)[0]) / (
                    2.0 * FD_STEP
                )
        err = rel_err(analytic, numeric)
        if err > worst[0]:
            worst = (err, {"trial": trial, "gamma1": gamma1, "probs": probs.tolist()})
    return GradReport("partial_mi", worst[0], THRESHOLDS["partial_mi"], worst[1])


def composite_loss_and_grads(model, x_s, y_s, x_t, y_t, spec, lambda0, lambda1):
    """Full objective value plus assembled parameter gradients."""
    trace_s = forward(model, x_s)
    trace_t = forward(model, x_t)
    sc, grad_probs_s = cross_entropy(trace_s.probs, y_s)
    res = cmmd_loss(
        LabeledBatch(trace_s.features, y_s), LabeledBatch(trace_t.features, y_t), spec
    )
    mi, grad_probs_t = mi_loss(trace_t.probs)
    value = sc + lambda0 * res.value + lambda1 * mi
    grads = backward(
        model, trace_s, grad_probs=grad_probs_s, grad_features=lambda0 * res.grad_zs
    )
    grads.add_(
        backward(
            model,
            trace_t,
            grad_probs=lambda1 * grad_probs_t,
            grad_features=lambda0 * res.grad_zt,
        )
    )
    return value, grads


def check_composite(seed: int, trials: int) -> GradReport:
    spec = KernelSpec()
    lambda0, lambda1 = 0.1, 0.2
    worst = (0.0, {})
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 40, trial]))
        n, d_in, c = 5, 3, 3
        model = init_mlp(d_in, [4], c, seed=np.random.SeedSequence([seed, 41, trial]))
        x_s = rng.uniform(-1.0, 1.0, (n, d_in))
        x_t = rng.uniform(-1.0, 1.0, (n, d_in))
        y_s = np.eye(c)[rng.integers(0, c, n)]
        y_t = np.eye(c)[rng.integers(0, c, n)]
        value, grads = composite_loss_and_grads(
            model, x_s, y_s, x_t, y_t, spec, lambda0, lambda1
        )

        def value_only():
            return composite_loss_and_grads(
                model, x_s, y_s, x_t, y_t, spec, lambda0, lambda1
            )[0]

        err = 0.0
        for p, g in zip(model.param_arrays(), grads.arrays()):
            err = max(err, rel_err(g, central_diff(value_only, p)))
        if err > worst[0]:
            worst = (err, {"trial": trial})
    return GradReport("composite", worst[0], THRESHOLDS["composite"], worst[1])


def run_suites(seed: int, trials: int) -> list:
    return [
        check_cmmd(seed, trials),
        check_mi(seed, trials),
        check_partial_mi(seed, trials),
        check_composite(seed, max(1, trials // 2)),
    ]


def format_report(reports) -> str:
    lines = []
    for r in reports:
        status = "ok" if r.ok else "FAIL"
        lines.append(
            f"suite {r.suite}: max_rel_err={r.max_rel_err:.3e} threshold={r.threshold:.0e} {status}"
        )
    return "\n".join(lines)


def worst_case_json(reports) -> str:
    return json.dumps(
        {r.suite: {"max_rel_err": r.max_rel_err, "case": r.worst_case} for r in reports if not r.ok},
        sort_keys=True,
    )
