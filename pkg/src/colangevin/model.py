"""Minimal fully-connected networks with exact backprop.

Parameters live in a :class:`~colangevin.params.ParamStore` with two entries
per layer (weight, bias) in layer order.  A :class:`ParamLayout` decides, per
weight matrix, whether it is unconstrained, circle-constrained (per-scalar
radii) or orthogonality-constrained; biases are always unconstrained.

Conventions, frozen:

* ReLU subgradient at 0 is 0.
* Binary cross entropy is evaluated in the stable logit form, never through
  explicit sigmoid probabilities.
* Accuracy ties (logit exactly 0, equal class scores) resolve to the lower
  class index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .constraints import (
    CircleGroup,
    OrthoGroup,
    circle_slack_init,
    ortho_orientation,
)
from .numerics import orthonormalize_columns
from .params import ParamStore, dense_weight

__all__ = [
    "MLPSpec",
    "LayerConstraint",
    "Batch",
    "layout_unconstrained",
    "layout_hidden",
    "layout_all",
    "init_params",
    "mlp_forward",
    "loss_eval",
    "loss_grad_logits",
    "accuracy_eval",
    "mlp_backward",
    "finite_difference_grad",
    "make_gradient_oracle",
    "evaluate",
]

log = logging.getLogger(__name__)

LOSSES = ("bce_with_logits", "softmax_cross_entropy")
CONSTRAINT_KINDS = ("none", "circle", "orthogonal")
INIT_KINDS = ("uniform", "orthogonal")


@dataclass(frozen=True)
class MLPSpec:
    """Widths (input, hidden..., output), ReLU activation, loss kind."""

    layer_widths: tuple[int, ...]
    activation: str = "relu"
    loss: str = "bce_with_logits"

    def __post_init__(self):
        if len(self.layer_widths) < 2 or min(self.layer_widths) < 1:
            raise ValueError("need at least two positive layer widths")
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1


@dataclass(frozen=True)
class LayerConstraint:
    """Constraint and init for one weight matrix.

    ``init=None`` means the kind's default: orthogonal init for orthogonality
    constraints, uniform otherwise.  Constrained kinds cannot override it.
    """

    kind: str = "none"
    radius: float | None = None
    init: str | None = None

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ValueError(f"constraint kind must be one of {CONSTRAINT_KINDS}")
        if self.kind == "circle" and (self.radius is None or self.radius <= 0.0):
            raise ValueError("circle constraint needs a positive radius")
        if self.init is not None:
            if self.init not in INIT_KINDS:
                raise ValueError(f"init must be one of {INIT_KINDS}")
            if self.kind != "none":
                raise ValueError("init override is only meaningful for unconstrained layers")


def layout_unconstrained(n_layers: int, init: str = "uniform") -> list[LayerConstraint]:
    return [LayerConstraint(kind="none", init=init) for _ in range(n_layers)]


def layout_hidden(n_layers: int, kind: str, radius: float | None = None) -> list[LayerConstraint]:
    """Constrain every weight matrix except the input and output layers."""
    out = []
    for i in range(n_layers):
        if 0 < i < n_layers - 1:
            out.append(LayerConstraint(kind=kind, radius=radius))
        else:
            out.append(LayerConstraint(kind="none"))
    return out


def layout_all(n_layers: int, kind: str, radii=None) -> list[LayerConstraint]:
    """Constrain every weight matrix; ``radii`` may be one value or one per layer."""
    if np.isscalar(radii) or radii is None:
        radii = [radii] * n_layers
    if len(radii) != n_layers:
        raise ValueError("need one radius per layer")
    return [LayerConstraint(kind=kind, radius=r) for r in radii]


@dataclass
class Batch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets)
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets row counts disagree")


def _uniform_init(rows: int, cols: int, rng) -> np.ndarray:
    bound = 1.0 / np.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def _orthogonal_weight(rows: int, cols: int, rng) -> np.ndarray:
    """Dense rows x cols weight with orthonormal columns (or rows if wide)."""
    if rows >= cols:
        return orthonormalize_columns(rng.standard_normal((rows, cols)))
    return orthonormalize_columns(rng.standard_normal((cols, rows))).T


def init_params(spec: MLPSpec, layout: list[LayerConstraint], rng) -> ParamStore:
    """Constraint-respecting initialization.

    Unconstrained weights and all biases draw from U(-1/sqrt(n_in), 1/sqrt(n_in)).
    Orthogonality groups start from an orthonormalized Gaussian in the stored
    orientation.  Circle groups clip the uniform draw into [-r, r] before the
    slack init (the clip is logged; it only fires when r < 1/sqrt(n_in)).
    """
    if len(layout) != spec.n_layers:
        raise ValueError(f"layout has {len(layout)} entries for {spec.n_layers} layers")
    entries: list = []
    names: list[str] = []
    for i, (n_in, n_out) in enumerate(zip(spec.layer_widths[:-1], spec.layer_widths[1:])):
        lc = layout[i]
        if lc.kind == "none":
            if (lc.init or "uniform") == "orthogonal":
                w = _orthogonal_weight(n_out, n_in, rng)
            else:
                w = _uniform_init(n_out, n_in, rng)
            entries.append(w)
        elif lc.kind == "circle":
            theta = _uniform_init(n_out, n_in, rng)
            hi = float(np.max(np.abs(theta)))
            if hi > lc.radius:
                log.info("layer %d: clipping circle init from max |w|=%.3g into radius %.3g", i, hi, lc.radius)
                theta = np.clip(theta, -lc.radius, lc.radius)
            radii = np.full_like(theta, lc.radius)
            entries.append(CircleGroup(theta, circle_slack_init(theta, radii), radii))
        else:
            transposed = ortho_orientation(n_out, n_in)
            r, s = (n_in, n_out) if transposed else (n_out, n_in)
            q = orthonormalize_columns(rng.standard_normal((r, s)))
            entries.append(OrthoGroup(q, transposed))
        names.append(f"layer{i}.weight")
        entries.append(_uniform_init(n_out, 1, rng)[:, 0])
        names.append(f"layer{i}.bias")
    return ParamStore(entries, names)


def _layer_views(spec: MLPSpec, params: ParamStore):
    for i in range(spec.n_layers):
        yield dense_weight(params.entries[2 * i]), params.entries[2 * i + 1]


def _forward_cached(spec: MLPSpec, params: ParamStore, inputs: np.ndarray):
    """Returns (logits, activations per layer input); last layer is affine."""
    a = np.asarray(inputs, dtype=np.float64)
    acts = [a]
    for i, (w, b) in enumerate(_layer_views(spec, params)):
        z = a @ w.T + b
        a = z if i == spec.n_layers - 1 else np.maximum(z, 0.0)
        acts.append(a)
    return acts[-1], acts


def mlp_forward(spec: MLPSpec, params: ParamStore, inputs: np.ndarray) -> np.ndarray:
    """Logits of the affine+ReLU stack (no activation on the last layer)."""
    return _forward_cached(spec, params, inputs)[0]


def loss_eval(logits: np.ndarray, targets: np.ndarray, kind: str) -> float:
    """Mean loss over the batch."""
    if kind == "bce_with_logits":
        z = np.asarray(logits, dtype=np.float64).reshape(-1)
        y = np.asarray(targets, dtype=np.float64).reshape(-1)
        # log(1 + e^z) - z*y, arranged to never exponentiate a positive number
        losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
        return float(np.mean(losses))
    if kind == "softmax_cross_entropy":
        z = np.asarray(logits, dtype=np.float64)
        y = np.asarray(targets).reshape(-1)
        shifted = z - np.max(z, axis=1, keepdims=True)
        lse = np.log(np.sum(np.exp(shifted), axis=1))
        return float(np.mean(lse - shifted[np.arange(z.shape[0]), y]))
    raise ValueError(f"unknown loss kind {kind!r}")


def loss_grad_logits(logits: np.ndarray, targets: np.ndarray, kind: str) -> np.ndarray:
    """d(mean loss)/d(logits), shaped like ``logits``."""
    n = logits.shape[0]
    if kind == "bce_with_logits":
        z = np.asarray(logits, dtype=np.float64)
        y = np.asarray(targets, dtype=np.float64).reshape(z.shape)
        ez = np.exp(-np.abs(z))
        sig = np.where(z >= 0.0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
        return (sig - y) / n
    if kind == "softmax_cross_entropy":
        z = np.asarray(logits, dtype=np.float64)
        y = np.asarray(targets).reshape(-1)
        shifted = np.exp(z - np.max(z, axis=1, keepdims=True))
        soft = shifted / np.sum(shifted, axis=1, keepdims=True)
        soft[np.arange(n), y] -= 1.0
        return soft / n
    raise ValueError(f"unknown loss kind {kind!r}")


def accuracy_eval(logits: np.ndarray, targets: np.ndarray, kind: str) -> float:
    """Fraction of correct predictions; ties resolve to the lower class index."""
    y = np.asarray(targets).reshape(-1)
    if kind == "bce_with_logits":
        pred = (np.asarray(logits).reshape(-1) > 0.0).astype(np.int64)
    elif kind == "softmax_cross_entropy":
        pred = np.argmax(logits, axis=1)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return float(np.mean(pred == y))


def mlp_backward(spec: MLPSpec, params: ParamStore, batch: Batch) -> list[np.ndarray]:
    """Exact gradients of the mean loss, aligned with the store entries.

    Circle entries receive d/d(theta) only (the slack never enters the loss);
    orthogonality entries receive the gradient in the stored-q orientation.
    """
    logits, acts = _forward_cached(spec, params, batch.inputs)
    delta = loss_grad_logits(logits, batch.targets, spec.loss)
    grads: list[np.ndarray | None] = [None] * len(params.entries)
    for i in range(spec.n_layers - 1, -1, -1):
        a_in = acts[i]
        dw = delta.T @ a_in
        db = np.sum(delta, axis=0)
        entry = params.entries[2 * i]
        if isinstance(entry, OrthoGroup):
            grads[2 * i] = dw.T if entry.transposed else dw
        else:
            grads[2 * i] = dw
        grads[2 * i + 1] = db
        if i > 0:
            w = dense_weight(entry)
            delta = (delta @ w) * (acts[i] > 0.0)
    return grads


def finite_difference_grad(spec: MLPSpec, params: ParamStore, batch: Batch, eps: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradients in the same layout as :func:`mlp_backward`.

    Perturbs exactly the coordinates the analytic gradient covers (theta for
    circle entries, stored q for orthogonality entries), one scalar at a time.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")

    def loss_of(p: ParamStore) -> float:
        return loss_eval(mlp_forward(spec, p, batch.inputs), batch.targets, spec.loss)

    work = params.copy()
    grads = []
    for idx, entry in enumerate(work.entries):
        if isinstance(entry, CircleGroup):
            target = entry.theta
        elif isinstance(entry, OrthoGroup):
            target = entry.q
        else:
            target = entry
        g = np.zeros_like(target)
        flat = target.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            hi = loss_of(work)
            flat[j] = orig - eps
            lo = loss_of(work)
            flat[j] = orig
            gflat[j] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def make_gradient_oracle(spec: MLPSpec):
    """Pure gradient callable (params, batch) -> entry-aligned gradient list."""

    def oracle(params: ParamStore, batch: Batch) -> list[np.ndarray]:
        return mlp_backward(spec, params, batch)

    return oracle


def evaluate(spec: MLPSpec, params: ParamStore, inputs, targets) -> tuple[float, float]:
    """(mean loss, accuracy) on a full dataset."""
    logits = mlp_forward(spec, params, inputs)
    return loss_eval(logits, targets, spec.loss), accuracy_eval(logits, targets, spec.loss)
