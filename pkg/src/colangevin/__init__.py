"""Constrained Langevin dynamics for neural network training.

Training schemes keep selected weight groups exactly on a constraint
manifold: per-scalar circle constraints (bounded weights via slack
coordinates) and layerwise orthogonality constraints (Stiefel manifold).
Both come in overdamped (EM + projection) and underdamped (OBA splitting)
variants, alongside unconstrained EM/momentum-SGD baselines, a small
numpy MLP with exact backprop, dataset utilities, and a diagnostics suite
that checks the samplers against independent numerical oracles.
"""

from . import constraints, data, diagnostics, integrators, model, numerics, params

__version__ = "0.1.0"

__all__ = [
    "constraints",
    "data",
    "diagnostics",
    "integrators",
    "model",
    "numerics",
    "params",
    "__version__",
]
