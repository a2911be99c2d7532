"""Steppers for constrained and baseline training dynamics.

Overdamped schemes take an Euler--Maruyama step and project back onto the
constraint manifold (orthogonal or oblique projection for circles, the
quasi-Newton correction for orthogonality groups).  Underdamped schemes
compose three sub-flows per step:

* O -- exact-in-law Ornstein--Uhlenbeck momentum kick, cotangent-projected,
* B -- gradient impulse on the momenta, cotangent-projected,
* A -- constrained drift: exact rotation for circles, a RATTLE-style
       position update plus momentum correction for orthogonality groups.

The composition order is OBA (ABO is available behind ``splitting_order`` for
study).  With ``tau = 0`` and no constrained groups the OBA recursion is the
standard momentum-SGD recursion under mu = exp(-gamma*h), lr = h^2,
v = -p/h; :func:`sgdm_reference_step` implements that reference form.

All steppers are pure: they return fresh containers and only advance ``rng``.
When ``tau == 0`` no noise is drawn at all, so the random stream is consumed
only by the stochastic parts actually in play.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constraints import (
    CircleGroup,
    OrthoGroup,
    circle_cotangent_project,
    circle_project_oblique,
    circle_project_orthogonal,
    ortho_cotangent_project,
    ortho_quasi_newton_project,
)
from .params import CircleMomentum, MomentumStore, ParamStore, PhasePoint

__all__ = [
    "IntegratorConfig",
    "em_step_unconstrained",
    "cola_od_circle_step",
    "cola_od_ortho_step",
    "a_step_circle",
    "b_step_circle",
    "o_step_circle",
    "a_step_ortho",
    "b_step_ortho",
    "o_step_ortho",
    "od_step",
    "oba_step",
    "init_momentum",
    "sgdm_reference_step",
]

SCHEMES = ("od", "ud_oba", "baseline_em", "baseline_sgdm")
PROJECTION_VARIANTS = ("orthogonal", "oblique")
SPLITTING_ORDERS = ("oba", "abo")


@dataclass
class IntegratorConfig:
    """Stepper settings.

    ``h`` is the stepsize, ``gamma`` the friction (underdamped only), ``tau``
    the temperature, ``k_max``/``tol`` the quasi-Newton cap and multiplier
    tolerance, ``projection_variant`` the circle projection used by the
    overdamped scheme.  For ``baseline_sgdm`` the fields are reinterpreted:
    ``h`` is the learning rate and ``gamma`` the momentum coefficient.
    """

    scheme: str
    h: float
    gamma: float = 0.0
    tau: float = 0.0
    k_max: int = 5
    tol: float = 1e-10
    projection_variant: str = "orthogonal"
    splitting_order: str = "oba"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.h <= 0.0:
            raise ValueError("stepsize h must be positive")
        if self.tau < 0.0:
            raise ValueError("temperature tau must be nonnegative")
        if self.scheme == "ud_oba" and self.gamma <= 0.0:
            raise ValueError("ud_oba requires friction gamma > 0")
        if self.projection_variant not in PROJECTION_VARIANTS:
            raise ValueError(f"projection_variant must be one of {PROJECTION_VARIANTS}")
        if self.splitting_order not in SPLITTING_ORDERS:
            raise ValueError(f"splitting_order must be one of {SPLITTING_ORDERS}")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


def _noise_like(shape, cfg: IntegratorConfig, rng) -> np.ndarray | float:
    """sqrt(2*tau*h) * N(0,I) for EM steps; exactly 0.0 when tau == 0."""
    if cfg.tau == 0.0:
        return 0.0
    return math.sqrt(2.0 * cfg.tau * cfg.h) * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# overdamped steps


def em_step_unconstrained(theta: np.ndarray, grad: np.ndarray, cfg: IntegratorConfig, rng) -> np.ndarray:
    """theta - h*grad + sqrt(2*tau*h)*R; plain SGD when tau == 0."""
    return theta - cfg.h * grad + _noise_like(theta.shape, cfg, rng)


def cola_od_circle_step(group: CircleGroup, grad_theta: np.ndarray, cfg: IntegratorConfig, rng) -> CircleGroup:
    """EM proposal on (theta, xi) followed by projection back to each circle.

    The gradient acts on theta only (the loss does not see the slack); noise
    acts on both coordinates.  Draw order is frozen: theta noise, then xi.
    """
    theta_bar = group.theta - cfg.h * grad_theta + _noise_like(group.theta.shape, cfg, rng)
    xi_bar = group.xi + _noise_like(group.xi.shape, cfg, rng)
    if cfg.projection_variant == "orthogonal":
        theta, xi = circle_project_orthogonal(theta_bar, xi_bar, group.radii)
    else:
        theta, xi = circle_project_oblique(theta_bar, xi_bar, group.theta, group.xi, group.radii)
    return CircleGroup(theta, xi, group.radii)


def cola_od_ortho_step(group: OrthoGroup, grad_q: np.ndarray, cfg: IntegratorConfig, rng) -> OrthoGroup:
    """EM proposal then quasi-Newton correction along the base point."""
    proposal = group.q - cfg.h * grad_q + _noise_like(group.q.shape, cfg, rng)
    projected = ortho_quasi_newton_project(group.q, proposal, cfg.k_max, cfg.tol)
    return OrthoGroup(projected.q, group.transposed)


# ---------------------------------------------------------------------------
# underdamped sub-steps, circle groups


def a_step_circle(group: CircleGroup, mom: CircleMomentum, h: float) -> tuple[CircleGroup, CircleMomentum]:
    """Exact geodesic drift: rotate each circle by omega*h.

    omega_i = (xi_i p^c_i - theta_i p^xi_i) / r_i^2 is the angular speed of
    the incoming cotangent momentum; the closed form preserves the circle
    constraint, cotangency and the momentum magnitude exactly.
    """
    theta, xi, r2 = group.theta, group.xi, group.radii**2
    omega = (xi * mom.p_theta - theta * mom.p_xi) / r2
    c = np.cos(omega * h)
    s = np.sin(omega * h)
    theta_new = c * theta + s * xi
    xi_new = -s * theta + c * xi
    p_theta = omega * xi_new
    p_xi = -omega * theta_new
    return CircleGroup(theta_new, xi_new, group.radii), CircleMomentum(p_theta, p_xi)


def b_step_circle(group: CircleGroup, mom: CircleMomentum, grad_theta: np.ndarray, h: float) -> CircleMomentum:
    """Projected gradient impulse; positions untouched.

    p^c  <- p^c  - h (1 - theta^2/r^2) dL/dtheta
    p^xi <- p^xi + h (theta*xi / r^2)  dL/dtheta

    These are the cotangent-projected kicks written out componentwise, so
    cotangency is preserved exactly for on-bundle input.
    """
    r2 = group.radii**2
    p_theta = mom.p_theta - h * (1.0 - group.theta**2 / r2) * grad_theta
    p_xi = mom.p_xi + h * (group.theta * group.xi / r2) * grad_theta
    return CircleMomentum(p_theta, p_xi)


def o_step_circle(group: CircleGroup, mom: CircleMomentum, cfg: IntegratorConfig, rng) -> CircleMomentum:
    """Exact-in-law OU kick on both momenta, then cotangent projection."""
    decay = math.exp(-cfg.gamma * cfg.h)
    p_theta = decay * mom.p_theta
    p_xi = decay * mom.p_xi
    if cfg.tau > 0.0:
        amp = math.sqrt(cfg.tau * (1.0 - decay * decay))
        p_theta = p_theta + amp * rng.standard_normal(p_theta.shape)
        p_xi = p_xi + amp * rng.standard_normal(p_xi.shape)
    p_theta, p_xi = circle_cotangent_project(p_theta, p_xi, group.theta, group.xi, group.radii)
    return CircleMomentum(p_theta, p_xi)


# ---------------------------------------------------------------------------
# underdamped sub-steps, orthogonality groups


def a_step_ortho(
    group: OrthoGroup, p: np.ndarray, h: float, k_max: int = 5, tol: float = 1e-10
) -> tuple[OrthoGroup, np.ndarray]:
    """RATTLE-style constrained drift; no gradient evaluation.

    Free proposal Q_bar = Q + h*P, quasi-Newton position fix with base Q,
    momentum correction P_bar = P + (Q_new - Q_bar)/h (the accumulated
    position multiplier divided by h), then cotangent projection at Q_new.
    """
    q_bar = group.q + h * p
    projected = ortho_quasi_newton_project(group.q, q_bar, k_max, tol)
    q_new = projected.q
    p_bar = p + (q_new - q_bar) / h
    return OrthoGroup(q_new, group.transposed), ortho_cotangent_project(q_new, p_bar)


def b_step_ortho(group: OrthoGroup, p: np.ndarray, grad_q: np.ndarray, h: float) -> np.ndarray:
    """Gradient impulse P - h*grad, cotangent-projected at the fixed position."""
    return ortho_cotangent_project(group.q, p - h * grad_q)


def o_step_ortho(group: OrthoGroup, p: np.ndarray, cfg: IntegratorConfig, rng) -> np.ndarray:
    """Exact-in-law OU kick, cotangent-projected at the fixed position."""
    decay = math.exp(-cfg.gamma * cfg.h)
    p_bar = decay * p
    if cfg.tau > 0.0:
        amp = math.sqrt(cfg.tau * (1.0 - decay * decay))
        p_bar = p_bar + amp * rng.standard_normal(p.shape)
    return ortho_cotangent_project(group.q, p_bar)


# ---------------------------------------------------------------------------
# underdamped sub-steps, unconstrained entries (projection = identity)


def _a_step_unconstrained(theta, p, h):
    return theta + h * p, p


def _b_step_unconstrained(p, grad, h):
    return p - h * grad


def _o_step_unconstrained(p, cfg, rng):
    decay = math.exp(-cfg.gamma * cfg.h)
    p_new = decay * p
    if cfg.tau > 0.0:
        p_new = p_new + math.sqrt(cfg.tau * (1.0 - decay * decay)) * rng.standard_normal(p.shape)
    return p_new


# ---------------------------------------------------------------------------
# full-store steppers


def od_step(store: ParamStore, oracle, batch, cfg: IntegratorConfig, rng) -> ParamStore:
    """One overdamped step of every entry; a single gradient evaluation."""
    grads = oracle(store, batch)
    new_entries = []
    for entry, grad in zip(store.entries, grads):
        if isinstance(entry, CircleGroup):
            new_entries.append(cola_od_circle_step(entry, grad, cfg, rng))
        elif isinstance(entry, OrthoGroup):
            new_entries.append(cola_od_ortho_step(entry, grad, cfg, rng))
        else:
            new_entries.append(em_step_unconstrained(entry, grad, cfg, rng))
    return ParamStore(new_entries, list(store.names))


def _o_all(position: ParamStore, momentum: MomentumStore, cfg, rng) -> MomentumStore:
    out = []
    for pos, mom in zip(position.entries, momentum.entries):
        if isinstance(pos, CircleGroup):
            out.append(o_step_circle(pos, mom, cfg, rng))
        elif isinstance(pos, OrthoGroup):
            out.append(o_step_ortho(pos, mom, cfg, rng))
        else:
            out.append(_o_step_unconstrained(mom, cfg, rng))
    return MomentumStore(out)


def _b_all(position: ParamStore, momentum: MomentumStore, grads, h) -> MomentumStore:
    out = []
    for pos, mom, grad in zip(position.entries, momentum.entries, grads):
        if isinstance(pos, CircleGroup):
            out.append(b_step_circle(pos, mom, grad, h))
        elif isinstance(pos, OrthoGroup):
            out.append(b_step_ortho(pos, mom, grad, h))
        else:
            out.append(_b_step_unconstrained(mom, grad, h))
    return MomentumStore(out)


def _a_all(position: ParamStore, momentum: MomentumStore, cfg) -> tuple[ParamStore, MomentumStore]:
    pos_out, mom_out = [], []
    for pos, mom in zip(position.entries, momentum.entries):
        if isinstance(pos, CircleGroup):
            g, m = a_step_circle(pos, mom, cfg.h)
        elif isinstance(pos, OrthoGroup):
            g, m = a_step_ortho(pos, mom, cfg.h, cfg.k_max, cfg.tol)
        else:
            g, m = _a_step_unconstrained(pos, mom, cfg.h)
        pos_out.append(g)
        mom_out.append(m)
    return ParamStore(pos_out, list(position.names)), MomentumStore(mom_out)


def oba_step(phase: PhasePoint, oracle, batch, cfg: IntegratorConfig, rng) -> PhasePoint:
    """One underdamped step (O then B then A; one gradient evaluation).

    The gradient for B is evaluated at the current positions, which O leaves
    untouched.  With ``splitting_order='abo'`` the gradient is instead
    evaluated at the post-A positions.
    """
    position, momentum = phase.position, phase.momentum
    if cfg.splitting_order == "oba":
        momentum = _o_all(position, momentum, cfg, rng)
        momentum = _b_all(position, momentum, oracle(position, batch), cfg.h)
        position, momentum = _a_all(position, momentum, cfg)
    else:
        position, momentum = _a_all(position, momentum, cfg)
        momentum = _b_all(position, momentum, oracle(position, batch), cfg.h)
        momentum = _o_all(position, momentum, cfg, rng)
    return PhasePoint(position, momentum)


def init_momentum(store: ParamStore, grads, h: float) -> MomentumStore:
    """Momenta p0 = -h * grad, cotangent-projected groupwise.

    Matches the momentum-SGD reference buffer v0 = grad under v = -p/h, so
    the tau = 0 unconstrained scheme reproduces that recursion from step one.
    """
    entries = []
    for pos, grad in zip(store.entries, grads):
        if isinstance(pos, CircleGroup):
            p_theta, p_xi = circle_cotangent_project(
                -h * grad, np.zeros_like(pos.xi), pos.theta, pos.xi, pos.radii
            )
            entries.append(CircleMomentum(p_theta, p_xi))
        elif isinstance(pos, OrthoGroup):
            entries.append(ortho_cotangent_project(pos.q, -h * grad))
        else:
            entries.append(-h * grad)
    return MomentumStore(entries)


def sgdm_reference_step(theta, v, grad, lr: float, mu: float):
    """Reference momentum recursion: v' = mu*v + grad; theta' = theta - lr*v'."""
    v_new = mu * v + grad
    return theta - lr * v_new, v_new
