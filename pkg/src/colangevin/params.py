"""Partitioned parameter containers shared by the model and the integrators.

A :class:`ParamStore` is an ordered list of named entries; each entry is one
of three kinds:

* plain ``np.ndarray``            -- unconstrained parameters,
* :class:`~colangevin.constraints.CircleGroup`  -- per-scalar circle constraints,
* :class:`~colangevin.constraints.OrthoGroup`   -- one Stiefel-constrained matrix.

Gradient stores are plain lists of arrays aligned with the entries: for a
circle entry the array is d/d(theta) only (the loss never depends on the
slack, so its gradient is structurally zero), and for an orthogonality entry
it is the gradient in the stored-q orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    CircleGroup,
    ConstraintResidual,
    OrthoGroup,
    circle_residual,
    ortho_residual,
)

__all__ = ["ParamStore", "CircleMomentum", "MomentumStore", "PhasePoint", "dense_weight"]


@dataclass
class ParamStore:
    entries: list
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.names:
            self.names = [f"group{i}" for i in range(len(self.entries))]
        if len(self.names) != len(self.entries):
            raise ValueError("names and entries must align")

    def copy(self) -> "ParamStore":
        copied = []
        for e in self.entries:
            copied.append(e.copy() if isinstance(e, (np.ndarray, CircleGroup, OrthoGroup)) else e)
        return ParamStore(copied, list(self.names))

    def residual(self) -> ConstraintResidual:
        """Max |g| per constrained group; 0 overall if nothing is constrained."""
        per_group: dict[str, float] = {}
        for name, e in zip(self.names, self.entries):
            if isinstance(e, CircleGroup):
                per_group[name] = float(np.max(np.abs(circle_residual(e))))
            elif isinstance(e, OrthoGroup):
                per_group[name] = ortho_residual(e)
        max_abs = max(per_group.values()) if per_group else 0.0
        return ConstraintResidual(max_abs=max_abs, per_group=per_group)


@dataclass
class CircleMomentum:
    """Momenta conjugate to (theta, xi) of one circle group."""

    p_theta: np.ndarray
    p_xi: np.ndarray

    def copy(self) -> "CircleMomentum":
        return CircleMomentum(self.p_theta.copy(), self.p_xi.copy())


@dataclass
class MomentumStore:
    """Momenta aligned entrywise with a ParamStore.

    Unconstrained and orthogonality entries carry a plain array (p, resp. P);
    circle entries carry a :class:`CircleMomentum`.
    """

    entries: list

    def copy(self) -> "MomentumStore":
        return MomentumStore([e.copy() for e in self.entries])


@dataclass
class PhasePoint:
    """Position plus momentum, jointly on the cotangent bundle."""

    position: ParamStore
    momentum: MomentumStore

    def copy(self) -> "PhasePoint":
        return PhasePoint(self.position.copy(), self.momentum.copy())

    def cotangency_residual(self) -> float:
        """Max violation of the groupwise cotangency condition grad(g)^T p = 0.

        Circle groups report max |theta*p_c + xi*p_xi|, orthogonality groups
        ||P^T Q + Q^T P||_F; unconstrained entries contribute nothing.
        """
        worst = 0.0
        for pos, mom in zip(self.position.entries, self.momentum.entries):
            if isinstance(pos, CircleGroup):
                v = pos.theta * mom.p_theta + pos.xi * mom.p_xi
                worst = max(worst, float(np.max(np.abs(v), initial=0.0)))
            elif isinstance(pos, OrthoGroup):
                q, p = pos.q, mom
                worst = max(worst, float(np.linalg.norm(p.T @ q + q.T @ p)))
        return worst


def dense_weight(entry) -> np.ndarray:
    """Materialize the dense weight an entry represents (the model's view)."""
    if isinstance(entry, CircleGroup):
        return entry.theta
    if isinstance(entry, OrthoGroup):
        return entry.q.T if entry.transposed else entry.q
    return entry
