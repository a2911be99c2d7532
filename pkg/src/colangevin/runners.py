"""Experiment drivers: training runs, sampling runs, the verification suite,
and gradient checking.  The CLI is a thin wrapper over these.

Emitted artifacts are deterministic byte-for-byte given the config, except
for the wall_seconds column of metrics CSVs, which is excluded from any
determinism comparison.  Every run directory gets a manifest recording the
fully resolved config and the package version, and files are written
atomically (temp file + rename).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import integrators as it
from .config import DataConfig, ExperimentConfig, GradcheckConfig, SamplingConfig
from .constraints import CircleGroup, OrthoGroup
from .data import (
    CsvSchema,
    Dataset,
    SpiralSpec,
    load_csv,
    load_idx,
    minibatch_sample,
    spiral_generate,
    train_test_split,
)
from .diagnostics import TrajectoryStats, batch_means_variance
from .model import Batch, evaluate, init_params, make_gradient_oracle
from .numerics import make_rng, orthonormalize_columns, spawn_rngs
from .params import MomentumStore, ParamStore, PhasePoint

__all__ = [
    "RunRecord",
    "CSV_HEADER",
    "run_train",
    "run_sample",
    "run_verify",
    "run_gradcheck",
    "default_checks",
]

CSV_HEADER = "epoch,train_loss,test_loss,test_acc,max_constraint_residual,wall_seconds"


@dataclass
class RunRecord:
    """One epoch's metrics row (the frozen CSV schema)."""

    epoch: int
    train_loss: float
    test_loss: float
    test_acc: float
    max_constraint_residual: float
    wall_seconds: float


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _records_csv(records: list[RunRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.epoch},{_fmt(r.train_loss)},{_fmt(r.test_loss)},{_fmt(r.test_acc)},"
            f"{_fmt(r.max_constraint_residual)},{_fmt(r.wall_seconds)}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# training


def _load_datasets(data: DataConfig) -> tuple[Dataset, Dataset]:
    if data.source == "spiral":
        return spiral_generate(
            SpiralSpec(
                n_train=data.spiral_n_train,
                n_test=data.spiral_n_test,
                noise_sigma=data.spiral_noise_sigma,
                seed=data.seed,
            )
        )
    if data.source == "idx":
        full = load_idx(data.idx_images, data.idx_labels)
    else:
        full = load_csv(data.csv_path, CsvSchema(label_column=data.csv_label_column))
    return train_test_split(full, data.n_train, make_rng(data.seed))


def _batch_size(data: DataConfig, n_train: int) -> int:
    if data.batch_size is not None:
        return min(data.batch_size, n_train)
    return max(1, int(round(data.batch_fraction * n_train)))


def train_single_seed(exp: ExperimentConfig, seed: int) -> list[RunRecord]:
    """One deterministic training run; pure apart from the wall clock."""
    train, test = _load_datasets(exp.data)
    init_rng, batch_rng, noise_rng = spawn_rngs(seed, 3)
    params = init_params(exp.model, exp.layout, init_rng)
    oracle = make_gradient_oracle(exp.model)
    cfg = exp.integrator
    bsize = _batch_size(exp.data, len(train))
    steps_per_epoch = max(1, len(train) // bsize)

    phase = None
    velocity = None
    if cfg.scheme == "ud_oba":
        batch0 = minibatch_sample(train, bsize, batch_rng)
        phase = PhasePoint(params, it.init_momentum(params, oracle(params, batch0), cfg.h))
    elif cfg.scheme == "baseline_sgdm":
        velocity = [np.zeros_like(e) for e in params.entries]

    records: list[RunRecord] = []
    for epoch in range(exp.run.epochs):
        t0 = time.perf_counter()
        for _ in range(steps_per_epoch):
            batch = minibatch_sample(train, bsize, batch_rng)
            if cfg.scheme == "ud_oba":
                phase = it.oba_step(phase, oracle, batch, cfg, noise_rng)
            elif cfg.scheme == "baseline_sgdm":
                grads = oracle(params, batch)
                new_entries, new_vel = [], []
                for th, v, g in zip(params.entries, velocity, grads):
                    th2, v2 = it.sgdm_reference_step(th, v, g, cfg.h, cfg.gamma)
                    new_entries.append(th2)
                    new_vel.append(v2)
                params = ParamStore(new_entries, list(params.names))
                velocity = new_vel
            else:  # od and baseline_em share the overdamped stepper
                params = it.od_step(params, oracle, batch, cfg, noise_rng)
        if cfg.scheme == "ud_oba":
            params = phase.position
        wall = time.perf_counter() - t0
        train_loss, _ = evaluate(exp.model, params, train.inputs, train.labels)
        test_loss, test_acc = evaluate(exp.model, params, test.inputs, test.labels)
        records.append(
            RunRecord(
                epoch=epoch,
                train_loss=train_loss,
                test_loss=test_loss,
                test_acc=test_acc,
                max_constraint_residual=params.residual().max_abs,
                wall_seconds=wall,
            )
        )
    return records


def _aggregate_csv(per_seed: dict[int, list[RunRecord]]) -> str:
    fields = ["train_loss", "test_loss", "test_acc", "max_constraint_residual", "wall_seconds"]
    header = "epoch," + ",".join(f"{f}_mean,{f}_std" for f in fields)
    seeds = sorted(per_seed)
    n_epochs = len(per_seed[seeds[0]])
    lines = [header]
    for e in range(n_epochs):
        cells = [str(e)]
        for f in fields:
            vals = np.array([getattr(per_seed[s][e], f) for s in seeds])
            cells.append(_fmt(vals.mean()))
            cells.append(_fmt(vals.std(ddof=0)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def run_train(exp: ExperimentConfig, out_dir=None, seed_override: int | None = None) -> dict:
    """Train every seed, write per-seed CSVs, an aggregate CSV and a manifest.

    A seed whose integrator throws (projection failure, divergence) is marked
    failed in the manifest; the aggregate covers the seeds that finished.
    Returns the manifest dict.
    """
    out = Path(out_dir if out_dir is not None else exp.run.out_dir)
    seeds = [seed_override] if seed_override is not None else exp.run.seeds
    per_seed: dict[int, list[RunRecord]] = {}
    status: dict[str, dict] = {}
    for seed in seeds:
        try:
            records = train_single_seed(exp, seed)
        except Exception as exc:  # failed seeds are data, not crashes
            status[str(seed)] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            continue
        per_seed[seed] = records
        _atomic_write(out / f"seed_{seed}.csv", _records_csv(records))
        status[str(seed)] = {"status": "ok", "csv": f"seed_{seed}.csv"}
    if per_seed:
        _atomic_write(out / "aggregate.csv", _aggregate_csv(per_seed))
    manifest = {
        "kind": "train",
        "version": __version__,
        "config": exp.raw,
        "seeds": status,
        "aggregate": "aggregate.csv" if per_seed else None,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# sampling


def _sample_circle(cfg: SamplingConfig) -> dict:
    rng = make_rng(cfg.seed)
    icfg = it.IntegratorConfig(
        scheme="od" if cfg.scheme == "od" else "ud_oba",
        h=cfg.h, gamma=cfg.gamma, tau=cfg.tau,
        k_max=cfg.k_max, tol=cfg.tol, projection_variant=cfg.projection_variant,
    )
    m = cfg.count
    group = CircleGroup(np.full(m, cfg.radius), np.zeros(m), np.full(m, cfg.radius))

    def grad(g: CircleGroup) -> np.ndarray:
        if cfg.potential == "quadratic":
            return g.theta - cfg.center
        return np.zeros(m)

    theta_stats = TrajectoryStats()
    theta_sq_stats = TrajectoryStats()
    angles = []
    if cfg.scheme == "ud_oba":
        store = ParamStore([group])
        phase = PhasePoint(store, it.init_momentum(store, [grad(group)], icfg.h))
        oracle = lambda s, b: [grad(s.entries[0])]
    for step in range(cfg.steps):
        if cfg.scheme == "od":
            group = it.cola_od_circle_step(group, grad(group), icfg, rng)
        else:
            phase = it.oba_step(phase, oracle, None, icfg, rng)
            group = phase.position.entries[0]
        if step >= cfg.burn_in and (step - cfg.burn_in) % cfg.thin == 0:
            theta_stats.record(float(np.mean(group.theta)))
            theta_sq_stats.record(float(np.mean(group.theta**2)))
            angles.append(np.arctan2(group.xi, group.theta))
    angles = np.concatenate(angles)
    counts, edges = np.histogram(angles, bins=cfg.histogram_bins, range=(-np.pi, np.pi))
    usable = (len(theta_sq_stats) // cfg.n_batches) * cfg.n_batches
    return {
        "observables": {
            "theta_mean": theta_stats.mean,
            "theta_sq_mean": theta_sq_stats.mean,
            "theta_batch_means_variance": (
                batch_means_variance(np.asarray(theta_stats.samples[:usable]), cfg.n_batches)
                if usable >= cfg.n_batches else None
            ),
            "theta_sq_batch_means_variance": (
                batch_means_variance(np.asarray(theta_sq_stats.samples[:usable]), cfg.n_batches)
                if usable >= cfg.n_batches else None
            ),
        },
        "histogram": {"observable": "angle", "edges": edges.tolist(), "counts": counts.tolist()},
        "recorded_states": len(theta_sq_stats),
    }


def _sample_ortho(cfg: SamplingConfig) -> dict:
    rng = make_rng(cfg.seed)
    icfg = it.IntegratorConfig(
        scheme="od" if cfg.scheme == "od" else "ud_oba",
        h=cfg.h, gamma=cfg.gamma, tau=cfg.tau,
        k_max=cfg.k_max, tol=cfg.tol,
    )
    group = OrthoGroup(orthonormalize_columns(rng.standard_normal((cfg.rows, cfg.cols))))

    def grad(g: OrthoGroup) -> np.ndarray:
        if cfg.potential == "quadratic":
            return g.q - cfg.center
        return np.zeros((cfg.rows, cfg.cols))

    sq_acc = np.zeros((cfg.rows, cfg.cols))
    q11_stats = TrajectoryStats()
    q11 = []
    recorded = 0
    if cfg.scheme == "ud_oba":
        store = ParamStore([group])
        phase = PhasePoint(store, it.init_momentum(store, [grad(group)], icfg.h))
        oracle = lambda s, b: [grad(s.entries[0])]
    for step in range(cfg.steps):
        if cfg.scheme == "od":
            group = it.cola_od_ortho_step(group, grad(group), icfg, rng)
        else:
            phase = it.oba_step(phase, oracle, None, icfg, rng)
            group = phase.position.entries[0]
        if step >= cfg.burn_in and (step - cfg.burn_in) % cfg.thin == 0:
            sq_acc += group.q**2
            q11_stats.record(float(group.q[0, 0] ** 2))
            q11.append(group.q[0, 0])
            recorded += 1
    mean_sq = sq_acc / max(recorded, 1)
    counts, edges = np.histogram(np.asarray(q11), bins=cfg.histogram_bins, range=(-1.0, 1.0))
    usable = (recorded // cfg.n_batches) * cfg.n_batches
    return {
        "observables": {
            "entry_sq_mean": float(mean_sq.mean()),
            "entry_sq_mean_min": float(mean_sq.min()),
            "entry_sq_mean_max": float(mean_sq.max()),
            "entry_sq_mean_matrix": mean_sq.tolist(),
            "q11_sq_batch_means_variance": (
                batch_means_variance(np.asarray(q11_stats.samples[:usable]), cfg.n_batches)
                if usable >= cfg.n_batches else None
            ),
        },
        "histogram": {"observable": "q11", "edges": edges.tolist(), "counts": counts.tolist()},
        "recorded_states": recorded,
    }


def run_sample(cfg: SamplingConfig, out=None) -> dict:
    """Run a sampling trajectory and emit means, variances and histogram bins."""
    stats = _sample_circle(cfg) if cfg.family == "circle" else _sample_ortho(cfg)
    stats = {
        "kind": "sample",
        "version": __version__,
        "config": asdict(cfg),
        **stats,
    }
    target = out if out is not None else cfg.out
    if target is not None:
        _atomic_write(Path(target), json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return stats


# ---------------------------------------------------------------------------
# verification suite


def _check(check_id: str, measured: float, tolerance: float) -> dict:
    return {
        "check_id": check_id,
        "measured": float(measured),
        "tolerance": float(tolerance),
        "pass": bool(measured <= tolerance),
    }


def _check_orthonormalize(rng) -> dict:
    from .numerics import frobenius_norm, standard_normal_matrix

    worst = 0.0
    for _ in range(20):
        q = orthonormalize_columns(standard_normal_matrix(30, 12, rng))
        worst = max(worst, frobenius_norm(q.T @ q - np.eye(12)))
    return _check("orthonormalize_residual", worst, 1e-12)


def _check_rng_determinism() -> dict:
    a = make_rng(1234).standard_normal(1000)
    b = make_rng(1234).standard_normal(1000)
    return _check("rng_determinism", float(np.max(np.abs(a - b))), 0.0)


def _make_circle_group(m: int, rng, radius: float = 1.0) -> CircleGroup:
    angles = rng.uniform(0.0, 2.0 * np.pi, size=m)
    return CircleGroup(radius * np.cos(angles), radius * np.sin(angles), np.full(m, radius))


def _check_circle_preservation(scheme: str, tau: float, rng, n_steps: int = 2000) -> dict:
    cfg = it.IntegratorConfig(scheme=scheme, h=0.1, gamma=1.0, tau=tau)
    group = _make_circle_group(50, rng)
    target = rng.standard_normal(50)
    grad = lambda g: g.theta - target
    worst = 0.0
    if scheme == "od":
        for _ in range(n_steps):
            group = it.cola_od_circle_step(group, grad(group), cfg, rng)
            worst = max(worst, float(np.max(np.abs(group.theta**2 + group.xi**2 - 1.0))))
    else:
        store = ParamStore([group])
        oracle = lambda s, b: [grad(s.entries[0])]
        phase = PhasePoint(store, it.init_momentum(store, oracle(store, None), cfg.h))
        for _ in range(n_steps):
            phase = it.oba_step(phase, oracle, None, cfg, rng)
            g = phase.position.entries[0]
            worst = max(worst, float(np.max(np.abs(g.theta**2 + g.xi**2 - 1.0))))
    return _check(f"circle_preservation_{scheme}_tau{tau:g}", worst, 1e-10)


def _check_ortho_preservation(scheme: str, tau: float, rng, n_steps: int = 2000) -> dict:
    # the K-capped quasi-Newton needs proposals near the manifold: at
    # tau = 0.01 the overdamped noise forces a smaller step than the
    # cotangent A-step proposals of the underdamped scheme do
    h = 0.005 if (scheme == "od" and tau > 0.0) else 0.05
    cfg = it.IntegratorConfig(scheme=scheme, h=h, gamma=1.0, tau=tau, k_max=5, tol=1e-10)
    group = OrthoGroup(orthonormalize_columns(rng.standard_normal((20, 10))))
    target = orthonormalize_columns(rng.standard_normal((20, 10)))
    grad = lambda g: 0.1 * (g.q - target)
    worst = 0.0
    if scheme == "od":
        for _ in range(n_steps):
            group = it.cola_od_ortho_step(group, grad(group), cfg, rng)
            worst = max(worst, float(np.linalg.norm(group.q.T @ group.q - np.eye(10))))
    else:
        store = ParamStore([group])
        oracle = lambda s, b: [grad(s.entries[0])]
        phase = PhasePoint(store, it.init_momentum(store, oracle(store, None), cfg.h))
        for _ in range(n_steps):
            phase = it.oba_step(phase, oracle, None, cfg, rng)
            q = phase.position.entries[0].q
            worst = max(worst, float(np.linalg.norm(q.T @ q - np.eye(10))))
    return _check(f"ortho_preservation_{scheme}_tau{tau:g}", worst, 1e-7)


def _check_cotangency(rng, n_steps: int = 500) -> dict:
    cfg = it.IntegratorConfig(scheme="ud_oba", h=0.05, gamma=1.0, tau=0.01)
    circle = _make_circle_group(20, rng)
    ortho = OrthoGroup(orthonormalize_columns(rng.standard_normal((12, 6))))
    store = ParamStore([circle, ortho])
    t1, t2 = rng.standard_normal(20), rng.standard_normal((12, 6))
    oracle = lambda s, b: [s.entries[0].theta - t1, s.entries[1].q - t2]
    phase = PhasePoint(store, it.init_momentum(store, oracle(store, None), cfg.h))
    worst = 0.0
    for _ in range(n_steps):
        phase = it.oba_step(phase, oracle, None, cfg, rng)
        worst = max(worst, phase.cotangency_residual())
    return _check("cotangency_ud", worst, 1e-9)


def _check_sgdm_equivalence() -> dict:
    lr, mu = 0.01, 0.9
    h = math.sqrt(lr)
    gamma = -math.log(mu) / h
    cfg = it.IntegratorConfig(scheme="ud_oba", h=h, gamma=gamma, tau=0.0)
    rng = make_rng(7)
    a_mat = np.diag([1.0, 2.0, 0.5])
    target = np.array([0.3, -0.2, 1.0])
    grad = lambda th: a_mat @ (th - target)
    theta = np.ones(3)
    v = grad(theta)
    phase = PhasePoint(ParamStore([theta.copy()]), MomentumStore([-h * v]))
    oracle = lambda s, b: [grad(s.entries[0])]
    th_ref, v_ref = theta.copy(), v.copy()
    worst = 0.0
    for _ in range(100):
        th_ref, v_ref = it.sgdm_reference_step(th_ref, v_ref, grad(th_ref), lr, mu)
        phase = it.oba_step(phase, oracle, None, cfg, rng)
        th_oba = phase.position.entries[0]
        worst = max(worst, float(np.max(np.abs(th_oba - th_ref) / np.maximum(np.abs(th_ref), 1e-30))))
    return _check("sgdm_equivalence", worst, 1e-12)


def _check_a_step_circle_speed(rng) -> dict:
    group = _make_circle_group(30, rng)
    from .constraints import circle_cotangent_project
    from .params import CircleMomentum

    p_c, p_xi = circle_cotangent_project(
        rng.standard_normal(30), rng.standard_normal(30), group.theta, group.xi, group.radii
    )
    mom = CircleMomentum(p_c, p_xi)
    speed0 = np.hypot(p_c, p_xi)
    worst = 0.0
    for _ in range(200):
        group, mom = it.a_step_circle(group, mom, 0.05)
        speed = np.hypot(mom.p_theta, mom.p_xi)
        worst = max(worst, float(np.max(np.abs(speed - speed0))))
    return _check("a_step_circle_speed_conservation", worst, 1e-10)


def _check_a_step_ortho_drift(rng) -> dict:
    from .constraints import ortho_cotangent_project

    group = OrthoGroup(orthonormalize_columns(rng.standard_normal((10, 5))))
    p = ortho_cotangent_project(group.q, 0.5 * rng.standard_normal((10, 5)))
    norm0 = float(np.linalg.norm(p))
    worst = 0.0
    for _ in range(1000):
        group, p = it.a_step_ortho(group, p, 0.01)
        worst = max(worst, abs(float(np.linalg.norm(p)) - norm0))
    return _check("a_step_ortho_norm_drift", worst, 1e-4)


def _check_projection_idempotence(rng) -> dict:
    from .diagnostics import circle_constraint, numeric_projection, sphere_constraint

    worst = 0.0
    for c, radius in ((circle_constraint(1.0), 1.0), (circle_constraint(0.5), 0.5), (sphere_constraint(2.0, 3), 2.0)):
        for _ in range(30):
            v = rng.standard_normal(c.dimension)
            q = radius * v / np.linalg.norm(v)
            pi = numeric_projection(c, q)
            worst = max(worst, float(np.max(np.abs(pi @ pi - pi))))
            worst = max(worst, float(np.max(np.abs(pi - pi.T))))
    return _check("projection_idempotence", worst, 1e-9)


def _check_mean_curvature(rng) -> dict:
    from .diagnostics import circle_constraint, mean_curvature

    worst = 0.0
    for radius in (0.5, 1.0, 2.0):
        c = circle_constraint(radius)
        for _ in range(10):
            a = rng.uniform(0.0, 2.0 * np.pi)
            q = radius * np.array([np.cos(a), np.sin(a)])
            h_vec = mean_curvature(c, q)
            worst = max(worst, float(np.max(np.abs(h_vec + q / radius**2))))
    return _check("mean_curvature_circle", worst, 1e-6)


def _backprop_vs_fd(rng) -> dict:
    from .model import MLPSpec, finite_difference_grad, init_params, layout_unconstrained, mlp_backward

    spec = MLPSpec((4, 8, 6, 2), loss="softmax_cross_entropy")
    layout = layout_unconstrained(spec.n_layers)
    worst = 0.0
    for _ in range(3):
        params = init_params(spec, layout, rng)
        batch = Batch(rng.standard_normal((6, 4)), rng.integers(0, 2, size=6))
        ana = mlp_backward(spec, params, batch)
        num = finite_difference_grad(spec, params, batch)
        for a, b in zip(ana, num):
            scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-12)
            worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    return _check("backprop_vs_finite_differences", worst, 1e-6)


def _check_batch_means(rng) -> dict:
    series = rng.standard_normal(100_000)
    measured = abs(batch_means_variance(series, 100) - 1.0)
    return _check("batch_means_iid_normal", measured, 0.3)


def _check_spiral_radius_law() -> dict:
    train, _ = spiral_generate(SpiralSpec(n_train=200, n_test=2, noise_sigma=0.0, seed=5))
    r2 = train.inputs[:, 0] ** 2 + train.inputs[:, 1] ** 2
    t = r2 / 4.0
    ang = np.where(train.labels == 0, 0.0, np.pi)
    x_pred = 2.0 * np.sqrt(t) * np.cos(8.0 * np.sqrt(t) * np.pi + ang)
    y_pred = 2.0 * np.sqrt(t) * np.sin(8.0 * np.sqrt(t) * np.pi + ang)
    worst = float(np.max(np.hypot(train.inputs[:, 0] - x_pred, train.inputs[:, 1] - y_pred)))
    return _check("spiral_radius_law", worst, 1e-9)


def default_checks() -> list[dict]:
    """Run the whole cross-module invariant suite (seconds, deterministic)."""
    rng = make_rng(20240)
    checks = [
        _check_rng_determinism(),
        _check_orthonormalize(rng),
        _check_circle_preservation("od", 0.0, rng),
        _check_circle_preservation("od", 0.01, rng),
        _check_circle_preservation("ud_oba", 0.0, rng),
        _check_circle_preservation("ud_oba", 0.01, rng),
        _check_ortho_preservation("od", 0.0, rng),
        _check_ortho_preservation("od", 0.01, rng),
        _check_ortho_preservation("ud_oba", 0.0, rng),
        _check_ortho_preservation("ud_oba", 0.01, rng),
        _check_cotangency(rng),
        _check_sgdm_equivalence(),
        _check_a_step_circle_speed(rng),
        _check_a_step_ortho_drift(rng),
        _check_projection_idempotence(rng),
        _check_mean_curvature(rng),
        _backprop_vs_fd(rng),
        _check_batch_means(rng),
        _check_spiral_radius_law(),
    ]
    return checks


def run_verify(out=None) -> dict:
    """Machine-readable pass/fail report over the invariant suite."""
    checks = default_checks()
    report = {
        "kind": "verify",
        "version": __version__,
        "checks": checks,
        "all_pass": all(c["pass"] for c in checks),
    }
    if out is not None:
        _atomic_write(Path(out), json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


# ---------------------------------------------------------------------------
# gradient checking


def run_gradcheck(cfg: GradcheckConfig, out=None) -> dict:
    """Per-layer max relative error of backprop against central differences.

    The relative error of a layer is max|analytic - numeric| over the larger
    of the two gradients' max-magnitudes; a layer where both vanish scores 0.
    """
    from .model import finite_difference_grad, mlp_backward

    rng = make_rng(cfg.seed)
    params = init_params(cfg.model, cfg.layout, rng)
    n_in = cfg.model.layer_widths[0]
    n_classes = cfg.model.layer_widths[-1]
    if cfg.model.loss == "bce_with_logits":
        targets = rng.integers(0, 2, size=cfg.batch_size)
    else:
        targets = rng.integers(0, n_classes, size=cfg.batch_size)
    batch = Batch(rng.standard_normal((cfg.batch_size, n_in)), targets)
    analytic = mlp_backward(cfg.model, params, batch)
    numeric = finite_difference_grad(cfg.model, params, batch, cfg.eps)
    layers = []
    worst = 0.0
    for name, a, b in zip(params.names, analytic, numeric):
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
        rel = 0.0 if scale < 1e-12 else float(np.max(np.abs(a - b))) / scale
        worst = max(worst, rel)
        layers.append({"name": name, "max_rel_error": rel})
    report = {
        "kind": "gradcheck",
        "version": __version__,
        "eps": cfg.eps,
        "layers": layers,
        "max_rel_error": worst,
        "pass": worst <= 1e-6,
    }
    if out is not None:
        _atomic_write(Path(out), json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
