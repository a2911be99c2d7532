"""Geometry of the two built-in constraint families.

Circle groups keep each constrained scalar parameter theta_i on the circle
theta_i^2 + xi_i^2 = r_i^2, where xi_i is a slack coordinate turning the box
bound |theta_i| <= r_i into an equality.  Orthogonality groups keep a weight
matrix (stored tall, r x s with r >= s) on the Stiefel manifold Q^T Q = I_s.

Everything here is elementwise / dense numpy and pure: functions return new
arrays and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "CircleGroup",
    "OrthoGroup",
    "ConstraintResidual",
    "InfeasibleInitError",
    "DegenerateProjectionError",
    "ProjectionNoRootError",
    "QuasiNewtonDivergenceError",
    "circle_residual",
    "circle_slack_init",
    "circle_project_orthogonal",
    "circle_project_oblique",
    "circle_cotangent_project",
    "ortho_orientation",
    "ortho_residual",
    "ortho_quasi_newton_project",
    "ortho_cotangent_project",
    "reshape_conv_weight",
]

DEGENERATE_EPS = 1e-12


class InfeasibleInitError(ValueError):
    """Initial constrained parameters violate |theta_i| <= r_i."""


class DegenerateProjectionError(ValueError):
    """Point to project sits (numerically) at the circle center."""


class ProjectionNoRootError(ValueError):
    """Oblique projection line misses the circle -- stepsize too large."""


class QuasiNewtonDivergenceError(ValueError):
    """Quasi-Newton residual blew up before the iteration cap -- stepsize too large."""


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


@dataclass
class CircleGroup:
    """Per-scalar circle constraints: theta, xi, radii share one shape."""

    theta: np.ndarray
    xi: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.theta = _as_f64(self.theta)
        self.xi = _as_f64(self.xi)
        self.radii = np.broadcast_to(_as_f64(self.radii), self.theta.shape).copy()
        if self.xi.shape != self.theta.shape:
            raise ValueError("theta and xi must have identical shapes")
        if np.any(self.radii <= 0.0):
            raise ValueError("radii must be positive")

    def copy(self) -> "CircleGroup":
        return CircleGroup(self.theta.copy(), self.xi.copy(), self.radii.copy())


@dataclass
class OrthoGroup:
    """One orthogonality-constrained weight matrix, stored tall (r >= s).

    ``transposed`` records whether the stored q is the transpose of the
    original layer weight, so the dense weight can be reconstructed.
    """

    q: np.ndarray
    transposed: bool = False

    def __post_init__(self):
        self.q = _as_f64(self.q)
        if self.q.ndim != 2:
            raise ValueError("q must be a 2-D array")
        if self.q.shape[0] < self.q.shape[1]:
            raise ValueError(f"stored q must be tall (r >= s), got {self.q.shape}")

    def copy(self) -> "OrthoGroup":
        return OrthoGroup(self.q.copy(), self.transposed)


@dataclass
class ConstraintResidual:
    """Max and per-group constraint violation, for run monitoring."""

    max_abs: float
    per_group: dict[str, float]


def circle_residual(group: CircleGroup) -> np.ndarray:
    """Componentwise theta^2 + xi^2 - r^2 (zero on the manifold)."""
    return group.theta**2 + group.xi**2 - group.radii**2


def circle_slack_init(theta_c, radii) -> np.ndarray:
    """Nonnegative slack xi = sqrt(r^2 - theta^2) putting the group on-manifold.

    Raises :class:`InfeasibleInitError` if any |theta_i| > r_i; the caller
    should shrink its initial weights or raise the radius.
    """
    theta_c = _as_f64(theta_c)
    radii = np.broadcast_to(_as_f64(radii), theta_c.shape)
    gap = radii**2 - theta_c**2
    if np.any(gap < 0.0):
        worst = float(np.max(np.abs(theta_c) - radii))
        raise InfeasibleInitError(
            f"|theta| exceeds radius by up to {worst:.3g}; shrink initial weights or raise radii"
        )
    return np.sqrt(gap)


def circle_project_orthogonal(theta_bar, xi_bar, radii):
    """Nearest point on the circle of radius r: r * (theta, xi) / ||(theta, xi)||.

    Valid on the whole punctured plane (any quadrant); a point within
    ``DEGENERATE_EPS`` of the center has no nearest point and raises
    :class:`DegenerateProjectionError`.
    """
    theta_bar = _as_f64(theta_bar)
    xi_bar = _as_f64(xi_bar)
    norm = np.hypot(theta_bar, xi_bar)
    if np.any(norm < DEGENERATE_EPS):
        raise DegenerateProjectionError("point to project is numerically at the circle center")
    scale = _as_f64(radii) / norm
    return theta_bar * scale, xi_bar * scale


def circle_project_oblique(theta_bar, xi_bar, theta_n, xi_n, radii):
    """Project along the constraint-gradient direction at the base point.

    Solves the quadratic in lam so that (theta_bar, xi_bar) - 2*lam*(theta_n, xi_n)
    lands on the circle, and of two real roots keeps the one with smaller
    |lam| (the landing point nearest the base point).  The base point must lie
    on the circle.  Raises :class:`ProjectionNoRootError` when the line misses
    the circle, which signals that the stepsize is too large for this variant.
    """
    theta_bar = _as_f64(theta_bar)
    xi_bar = _as_f64(xi_bar)
    theta_n = _as_f64(theta_n)
    xi_n = _as_f64(xi_n)
    r2 = _as_f64(radii) ** 2
    # a*lam^2 + b*lam + c = 0 with the base point on the circle (|q_n|^2 = r^2)
    a = 4.0 * r2
    b = -4.0 * (theta_n * theta_bar + xi_n * xi_bar)
    c = theta_bar**2 + xi_bar**2 - r2
    disc = b**2 - 4.0 * a * c
    if np.any(disc < 0.0):
        raise ProjectionNoRootError("oblique projection line misses the circle (stepsize too large)")
    sq = np.sqrt(disc)
    lam_lo = (-b - sq) / (2.0 * a)
    lam_hi = (-b + sq) / (2.0 * a)
    lam = np.where(np.abs(lam_lo) <= np.abs(lam_hi), lam_lo, lam_hi)
    return theta_bar - 2.0 * lam * theta_n, xi_bar - 2.0 * lam * xi_n


def circle_cotangent_project(p_c, p_xi, theta, xi, radii):
    """Remove the radial momentum component at an on-circle point.

    p_c   <- p_c  - (theta/r^2) (theta p_c + xi p_xi)
    p_xi  <- p_xi - (xi/r^2)    (theta p_c + xi p_xi)

    The result satisfies theta*p_c + xi*p_xi = 0 to roundoff.
    """
    p_c = _as_f64(p_c)
    p_xi = _as_f64(p_xi)
    theta = _as_f64(theta)
    xi = _as_f64(xi)
    radial = (theta * p_c + xi * p_xi) / _as_f64(radii) ** 2
    return p_c - theta * radial, p_xi - xi * radial


def ortho_orientation(rows_out: int, cols_in: int) -> bool:
    """Whether a rows_out x cols_in weight must be stored transposed.

    The stored matrix is always tall so the constraint reads Q^T Q = I_s:
    keep W as-is when cols_in <= rows_out (square ties keep it), otherwise
    store W^T (which enforces W W^T = I on the original weight).
    """
    if rows_out < 1 or cols_in < 1:
        raise ValueError("dimensions must be positive")
    return cols_in > rows_out


def ortho_residual(q) -> float:
    """Frobenius norm of Q^T Q - I_s."""
    if isinstance(q, OrthoGroup):
        q = q.q
    q = _as_f64(q)
    s = q.shape[1]
    return float(np.linalg.norm(q.T @ q - np.eye(s)))


class QuasiNewtonResult(NamedTuple):
    q: np.ndarray
    iterations: int


def ortho_quasi_newton_project(
    q_base: np.ndarray, q0: np.ndarray, k_max: int = 5, tol: float = 1e-10
) -> QuasiNewtonResult:
    """Return a proposal to the manifold along the base-point direction.

    Iterates  Q <- Q - (1/2) Q_base (Q^T Q - I_s)  until the multiplier norm
    ||Lam||_F = ||Q^T Q - I||_F / 2 drops below ``tol`` or ``k_max`` iterations
    have run, whichever first.  A proposal already on the manifold is returned
    after zero corrective iterations.

    Raises :class:`QuasiNewtonDivergenceError` if the multiplier norm exceeds
    ten times its initial value (or turns non-finite) before the cap -- the
    proposal was too far from the manifold, i.e. the stepsize is too large.
    """
    q_base = _as_f64(q_base)
    q = _as_f64(q0).copy()
    eye = np.eye(q.shape[1])
    lam = 0.5 * (q.T @ q - eye)
    res0 = float(np.linalg.norm(lam))
    iterations = 0
    while float(np.linalg.norm(lam)) > tol and iterations < k_max:
        q = q - q_base @ lam
        lam = 0.5 * (q.T @ q - eye)
        iterations += 1
        res = float(np.linalg.norm(lam))
        if not np.isfinite(res) or res > 10.0 * res0:
            raise QuasiNewtonDivergenceError(
                f"residual grew from {res0:.3g} to {res:.3g} after {iterations} iterations"
            )
    return QuasiNewtonResult(q, iterations)


def ortho_cotangent_project(q: np.ndarray, p_bar: np.ndarray) -> np.ndarray:
    """Orthogonal (Frobenius) projection onto {P : P^T Q + Q^T P = 0}.

    P = P_bar - (1/2) Q (P_bar^T Q + Q^T P_bar), for Q on the manifold.
    """
    q = _as_f64(q)
    p_bar = _as_f64(p_bar)
    return p_bar - 0.5 * q @ (p_bar.T @ q + q.T @ p_bar)


def reshape_conv_weight(tensor_dims: tuple[int, int, int, int]) -> tuple[int, int]:
    """Matrix shape (n_l, n_{l-1}*n_h*n_w) a conv kernel flattens to.

    The orientation rule (:func:`ortho_orientation`) then applies to the
    returned shape exactly as for a dense layer.
    """
    n_l, n_lm1, n_h, n_w = tensor_dims
    if min(tensor_dims) < 1:
        raise ValueError("dimensions must be positive")
    return n_l, n_lm1 * n_h * n_w
