"""Numerical oracles for the constrained-dynamics theory.

For a generic constraint map g: R^d -> R^m with Jacobian G = grad^T g, the
cotangent projection is Pi = I - G^+ G with G^+ = G^T (G G^T)^{-1}, and the
mean-curvature vector is H_i = Pi_jk d_j Pi_ik (evaluated here by central
finite differences of Pi).  The constrained overdamped dynamics is equivalent
to the plain SDE

    dq = -Pi grad(V) dt + sqrt(2 tau) Pi dW + tau H dt,

whose Euler--Maruyama discretization (:func:`underlying_sde_step`) serves as
a *distributional* oracle for the structure-preserving samplers: its iterates
drift off the manifold at O(h), so comparisons must use distributional
metrics (histograms, moments), never pathwise ones.

Also here: ergodic time averages, the batch-means estimator of the asymptotic
variance appearing in the sampler CLT, and Haar-uniform Stiefel draws as the
reference law for the orthogonality sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import RankDeficiencyError, orthonormalize_columns

__all__ = [
    "GenericConstraint",
    "TrajectoryStats",
    "circle_constraint",
    "sphere_constraint",
    "numeric_projection",
    "mean_curvature",
    "underlying_sde_step",
    "time_average",
    "batch_means_variance",
    "haar_stiefel_sample",
]

RANK_EPS = 1e-8

_EYE_CACHE: dict[int, np.ndarray] = {}


def _eye(d: int) -> np.ndarray:
    # read-only identity reused by the hot projection path
    if d not in _EYE_CACHE:
        e = np.eye(d)
        e.setflags(write=False)
        _EYE_CACHE[d] = e
    return _EYE_CACHE[d]


@dataclass
class GenericConstraint:
    """Constraint map g with optional analytic Jacobian.

    ``jacobian(q)`` must return the m x d matrix of row gradients; when absent
    it is approximated by central differences of ``g`` with step ``fd_step``.
    """

    dimension: int
    n_constraints: int
    g: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = 1e-6

    def jac(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(q), dtype=np.float64).reshape(self.n_constraints, self.dimension)
        out = np.empty((self.n_constraints, self.dimension))
        for j in range(self.dimension):
            e = np.zeros(self.dimension)
            e[j] = self.fd_step
            out[:, j] = (
                np.asarray(self.g(q + e), dtype=np.float64).reshape(-1)
                - np.asarray(self.g(q - e), dtype=np.float64).reshape(-1)
            ) / (2.0 * self.fd_step)
        return out


def circle_constraint(radius: float = 1.0) -> GenericConstraint:
    """Circle of given radius in the plane, with analytic Jacobian."""
    r2 = float(radius) ** 2
    return GenericConstraint(
        dimension=2,
        n_constraints=1,
        g=lambda q: np.array([q[0] ** 2 + q[1] ** 2 - r2]),
        jacobian=lambda q: 2.0 * np.asarray(q, dtype=np.float64).reshape(1, 2),
    )


def sphere_constraint(radius: float = 1.0, dimension: int = 3) -> GenericConstraint:
    r2 = float(radius) ** 2
    return GenericConstraint(
        dimension=dimension,
        n_constraints=1,
        g=lambda q: np.array([float(np.dot(q, q)) - r2]),
        jacobian=lambda q: 2.0 * np.asarray(q, dtype=np.float64).reshape(1, -1),
    )


def numeric_projection(c: GenericConstraint, q: np.ndarray) -> np.ndarray:
    """Orthogonal projection Pi(q) = I - G^+ G onto the cotangent space.

    The pseudo-inverse is applied by solving (G G^T) X = G rather than
    forming the inverse.  Raises :class:`RankDeficiencyError` when the
    Jacobian loses row rank (smallest eigenvalue of G G^T below 1e-8).
    """
    d = c.dimension
    if c.n_constraints == 0:
        return np.eye(d)
    G = c.jac(np.asarray(q, dtype=np.float64))
    if c.n_constraints == 1:
        row = G[0]
        gram = float(row @ row)
        if gram <= RANK_EPS:
            raise RankDeficiencyError("constraint Jacobian is (numerically) row rank deficient")
        return _eye(d) - np.outer(row, row / gram)
    gram = G @ G.T
    if float(np.min(np.linalg.eigvalsh(gram))) <= RANK_EPS:
        raise RankDeficiencyError("constraint Jacobian is (numerically) row rank deficient")
    X = np.linalg.solve(gram, G)
    return _eye(d) - G.T @ X


def mean_curvature(
    c: GenericConstraint, q: np.ndarray, fd_step: float = 1e-5, *, center_projection=None
) -> np.ndarray:
    """Mean-curvature vector H_i = Pi_jk d_j Pi_ik by central differences.

    Pi at every stencil point is rebuilt from the Jacobian (never
    interpolated).  For a circle of radius r the exact value is -q/r^2, and
    Pi @ H = 0 holds identically; both make good correctness checks.
    ``center_projection`` lets a caller that already built Pi(q) pass it in.
    """
    q = np.asarray(q, dtype=np.float64)
    d = c.dimension
    pi = numeric_projection(c, q) if center_projection is None else center_projection
    dpi = np.empty((d, d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = fd_step
        dpi[j] = (numeric_projection(c, q + e) - numeric_projection(c, q - e)) / (2.0 * fd_step)
    return np.einsum("jk,jik->i", pi, dpi)


def underlying_sde_step(c: GenericConstraint, q: np.ndarray, grad: np.ndarray, h: float, tau: float, rng) -> np.ndarray:
    """One Euler--Maruyama step of the equivalent unconstrained SDE.

    Distributional oracle only: iterates are O(h) off the manifold.
    """
    q = np.asarray(q, dtype=np.float64)
    pi = numeric_projection(c, q)
    drift = -pi @ np.asarray(grad, dtype=np.float64)
    if tau > 0.0:
        drift = drift + tau * mean_curvature(c, q, center_projection=pi)
        return q + h * drift + np.sqrt(2.0 * tau * h) * (pi @ rng.standard_normal(c.dimension))
    return q + h * drift


def time_average(observable: Callable, trajectory) -> float:
    """Arithmetic mean of observable(state) over the recorded states."""
    values = [observable(state) for state in trajectory]
    if not values:
        raise ValueError("trajectory is empty")
    return float(np.mean(values))


def batch_means_variance(series, n_batches: int) -> float:
    """Batch-means estimate of the asymptotic variance of the time average.

    Splits the series into ``n_batches`` equal blocks of length m and returns
    m * Var(block means) (sample variance, ddof=1).  For an iid series this
    estimates the plain variance; for a correlated one, the CLT variance
    sum_k autocov(k).
    """
    series = np.asarray(series, dtype=np.float64).reshape(-1)
    if n_batches < 2:
        raise ValueError("need at least two batches")
    if series.size < n_batches or series.size % n_batches != 0:
        raise ValueError(f"series of length {series.size} does not split into {n_batches} equal blocks")
    m = series.size // n_batches
    block_means = series.reshape(n_batches, m).mean(axis=1)
    return float(m * np.var(block_means, ddof=1))


def haar_stiefel_sample(r: int, s: int, rng) -> np.ndarray:
    """Column-orthonormal r x s matrix drawn uniformly (Haar) on the Stiefel manifold."""
    if r < s:
        raise ValueError("need r >= s")
    return orthonormalize_columns(rng.standard_normal((r, s)))


def circle_sampler_angles(
    n_chains: int,
    n_steps: int,
    burn_in: int,
    thin: int,
    h: float,
    tau: float,
    rng,
    radius: float = 1.0,
) -> np.ndarray:
    """Pooled angle samples from independent overdamped circle chains (V = 0).

    Runs ``n_chains`` circles as one vectorized group for ``n_steps`` steps
    and pools atan2(xi, theta) from every chain each ``thin`` steps after the
    burn-in.  Independent chains multiply the effective sample size, which
    single long trajectories cannot afford at these stepsizes.
    """
    from .constraints import CircleGroup
    from .integrators import IntegratorConfig, cola_od_circle_step

    cfg = IntegratorConfig(scheme="od", h=h, tau=tau)
    # every chain starts at the same point, so the burn-in genuinely has to
    # establish the stationary angle law rather than inherit it
    group = CircleGroup(np.full(n_chains, radius), np.zeros(n_chains), np.full(n_chains, radius))
    zero = np.zeros(n_chains)
    out = []
    for step in range(n_steps):
        group = cola_od_circle_step(group, zero, cfg, rng)
        if step >= burn_in and (step - burn_in) % thin == 0:
            out.append(np.arctan2(group.xi, group.theta))
    return np.concatenate(out)


def circle_oracle_angles(
    n_chains: int,
    n_steps: int,
    burn_in: int,
    thin: int,
    h: float,
    tau: float,
    rng,
    radius: float = 1.0,
) -> np.ndarray:
    """Pooled angle samples from independent underlying-SDE chains (V = 0).

    Each chain starts at a uniformly random angle and evolves with
    :func:`underlying_sde_step`.  The iterates' squared radius performs an
    unconfined random walk (the EM radial error accumulates as O(h*sqrt(n))),
    which slows the angular mixing of outward-drifted chains; rotation-
    invariant starts keep the pooled angle law unbiased despite that, whereas
    a common fixed start would leave a coherent bias in the slow chains.
    Many short chains are therefore the only sound way to draw oracle
    samples; the angle marginal is what the comparison uses.
    """
    c = circle_constraint(radius)
    zero = np.zeros(2)
    out = []
    for _ in range(n_chains):
        a0 = rng.uniform(0.0, 2.0 * np.pi)
        q = radius * np.array([np.cos(a0), np.sin(a0)])
        for step in range(n_steps):
            q = underlying_sde_step(c, q, zero, h, tau, rng)
            if step >= burn_in and (step - burn_in) % thin == 0:
                out.append(np.arctan2(q[1], q[0]))
    return np.asarray(out)


@dataclass
class TrajectoryStats:
    """Accumulates scalar observable samples along a trajectory."""

    samples: list = field(default_factory=list)

    def record(self, value: float) -> None:
        self.samples.append(float(value))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def mean(self) -> float:
        if not self.samples:
            raise ValueError("no samples recorded")
        return float(np.mean(self.samples))

    def batch_means(self, n_batches: int) -> float:
        usable = (len(self.samples) // n_batches) * n_batches
        if usable < n_batches:
            raise ValueError("too few samples for the requested batch count")
        return batch_means_variance(np.asarray(self.samples[:usable]), n_batches)
