"""YAML experiment configs with strict validation.

The grammar is a nested key/value tree (YAML syntax); every key is checked
against the schema below and unknown keys are hard errors, reported with
their dotted path -- a typoed hyperparameter must never be silently ignored.
The full grammar is documented in the README.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .integrators import IntegratorConfig
from .model import LayerConstraint, MLPSpec, layout_unconstrained

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "DataConfig",
    "RunConfig",
    "SamplingConfig",
    "GradcheckConfig",
    "load_yaml",
    "parse_train_config",
    "parse_sample_config",
    "parse_gradcheck_config",
]


class ConfigError(ValueError):
    """Invalid config; message carries the dotted field path."""


def load_yaml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def _require_keys(node: dict, allowed: set[str], required: set[str], path: str) -> None:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping")
    for key in node:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {sorted(allowed)})")
    for key in required:
        if key not in node:
            raise ConfigError(f"{path}.{key}: required key missing")


def _number(node, key, path, *, default=None, required=False, minimum=None):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {v}")
    return v


def _string(node, key, path, *, default=None, required=False, choices=None):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key}: required key missing")
        return default
    v = node[key]
    if not isinstance(v, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {v!r}")
    if choices is not None and v not in choices:
        raise ConfigError(f"{path}.{key}: must be one of {sorted(choices)}, got {v!r}")
    return v


# ---------------------------------------------------------------------------
# train config


@dataclass
class DataConfig:
    source: str  # "spiral" | "idx" | "csv"
    spiral_n_train: int = 500
    spiral_n_test: int = 1000
    spiral_noise_sigma: float = 0.02
    seed: int = 0
    idx_images: str | None = None
    idx_labels: str | None = None
    csv_path: str | None = None
    csv_label_column: str = "label"
    n_train: int | None = None  # split size for idx/csv sources
    batch_size: int | None = None
    batch_fraction: float | None = None


@dataclass
class RunConfig:
    epochs: int
    seeds: list[int]
    out_dir: str


@dataclass
class ExperimentConfig:
    model: MLPSpec
    layout: list[LayerConstraint]
    integrator: IntegratorConfig
    data: DataConfig
    run: RunConfig
    raw: dict = field(default_factory=dict)  # resolved tree echoed into manifests


def _parse_model(node: dict) -> MLPSpec:
    _require_keys(node, {"widths", "activation", "loss"}, {"widths"}, "model")
    widths = node["widths"]
    if not isinstance(widths, list) or len(widths) < 2 or not all(
        isinstance(w, int) and not isinstance(w, bool) and w > 0 for w in widths
    ):
        raise ConfigError("model.widths: expected a list of >= 2 positive ints")
    return MLPSpec(
        layer_widths=tuple(widths),
        activation=_string(node, "activation", "model", default="relu", choices={"relu"}),
        loss=_string(
            node, "loss", "model", default="bce_with_logits",
            choices={"bce_with_logits", "softmax_cross_entropy"},
        ),
    )


_KINDS = {"none", "circle", "orthogonal"}


def _parse_layout(node: dict | None, n_layers: int) -> list[LayerConstraint]:
    if node is None:
        return layout_unconstrained(n_layers)
    allowed = {"layers", "hidden_constraint", "all_constraint", "radius", "radii", "init"}
    _require_keys(node, allowed, set(), "layout")
    if "layers" in node and ("hidden_constraint" in node or "all_constraint" in node):
        raise ConfigError("layout: 'layers' excludes the shorthand keys")
    if "hidden_constraint" in node and "all_constraint" in node:
        raise ConfigError("layout: give either hidden_constraint or all_constraint, not both")

    default_radius = _number(node, "radius", "layout", default=None)
    radii = node.get("radii")
    if radii is not None:
        if not isinstance(radii, list) or len(radii) != n_layers:
            raise ConfigError(f"layout.radii: expected a list of {n_layers} numbers (one per weight layer)")
    init = _string(node, "init", "layout", default=None, choices={"uniform", "orthogonal"})

    def radius_for(i: int):
        if radii is not None and radii[i] is not None:
            return float(radii[i])
        return None if default_radius is None else float(default_radius)

    if "layers" in node:
        entries = node["layers"]
        if not isinstance(entries, list) or len(entries) != n_layers:
            raise ConfigError(f"layout.layers: expected a list of {n_layers} entries (one per weight layer)")
        out = []
        for i, e in enumerate(entries):
            path = f"layout.layers[{i}]"
            _require_keys(e, {"constraint", "radius", "init"}, {"constraint"}, path)
            kind = _string(e, "constraint", path, required=True, choices=_KINDS)
            r = _number(e, "radius", path, default=radius_for(i))
            li = _string(e, "init", path, default=None, choices={"uniform", "orthogonal"})
            if kind == "circle" and (r is None or r <= 0.0):
                raise ConfigError(f"{path}: circle layers need a positive radius")
            out.append(
                LayerConstraint(kind=kind, radius=r if kind == "circle" else None,
                                init=li if kind == "none" else None)
            )
        return out

    scope = None
    if "hidden_constraint" in node:
        scope = ("hidden", _string(node, "hidden_constraint", "layout", required=True, choices=_KINDS))
    elif "all_constraint" in node:
        scope = ("all", _string(node, "all_constraint", "layout", required=True, choices=_KINDS))
    out = []
    for i in range(n_layers):
        kind = "none"
        if scope is not None:
            which, k = scope
            if which == "all" or 0 < i < n_layers - 1:
                kind = k
        if kind == "circle" and (radius_for(i) is None or radius_for(i) <= 0.0):
            raise ConfigError("layout: circle layers need a positive radius (layout.radius or layout.radii)")
        out.append(
            LayerConstraint(
                kind=kind,
                radius=radius_for(i) if kind == "circle" else None,
                init=init if kind == "none" else None,
            )
        )
    return out


def _parse_integrator(node: dict) -> IntegratorConfig:
    allowed = {"scheme", "h", "gamma", "tau", "k_max", "tol", "projection_variant", "splitting_order"}
    _require_keys(node, allowed, {"scheme", "h"}, "integrator")
    k_max = _number(node, "k_max", "integrator", default=5, minimum=1)
    if not isinstance(k_max, int):
        raise ConfigError("integrator.k_max: expected an int")
    try:
        return IntegratorConfig(
            scheme=_string(node, "scheme", "integrator", required=True),
            h=float(_number(node, "h", "integrator", required=True)),
            gamma=float(_number(node, "gamma", "integrator", default=0.0, minimum=0.0)),
            tau=float(_number(node, "tau", "integrator", default=0.0, minimum=0.0)),
            k_max=k_max,
            tol=float(_number(node, "tol", "integrator", default=1e-10, minimum=0.0)),
            projection_variant=_string(node, "projection_variant", "integrator", default="orthogonal"),
            splitting_order=_string(node, "splitting_order", "integrator", default="oba"),
        )
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from None


def _parse_data(node: dict) -> DataConfig:
    allowed = {"spiral", "idx", "csv", "batch_size", "batch_fraction", "seed"}
    _require_keys(node, allowed, set(), "data")
    sources = [k for k in ("spiral", "idx", "csv") if k in node]
    if len(sources) != 1:
        raise ConfigError("data: give exactly one of spiral / idx / csv")
    cfg = DataConfig(source=sources[0])
    cfg.seed = int(_number(node, "seed", "data", default=0))
    if "spiral" in node:
        sp = node["spiral"] or {}
        _require_keys(sp, {"n_train", "n_test", "noise_sigma"}, set(), "data.spiral")
        cfg.spiral_n_train = int(_number(sp, "n_train", "data.spiral", default=500, minimum=1))
        cfg.spiral_n_test = int(_number(sp, "n_test", "data.spiral", default=1000, minimum=1))
        cfg.spiral_noise_sigma = float(_number(sp, "noise_sigma", "data.spiral", default=0.02, minimum=0.0))
    elif "idx" in node:
        ix = node["idx"]
        _require_keys(ix, {"images", "labels", "n_train"}, {"images", "labels", "n_train"}, "data.idx")
        cfg.idx_images = _string(ix, "images", "data.idx", required=True)
        cfg.idx_labels = _string(ix, "labels", "data.idx", required=True)
        cfg.n_train = int(_number(ix, "n_train", "data.idx", required=True, minimum=1))
    else:
        cv = node["csv"]
        _require_keys(cv, {"path", "label_column", "n_train"}, {"path", "n_train"}, "data.csv")
        cfg.csv_path = _string(cv, "path", "data.csv", required=True)
        cfg.csv_label_column = _string(cv, "label_column", "data.csv", default="label")
        cfg.n_train = int(_number(cv, "n_train", "data.csv", required=True, minimum=1))
    if ("batch_size" in node) == ("batch_fraction" in node):
        raise ConfigError("data: give exactly one of batch_size / batch_fraction")
    if "batch_size" in node:
        cfg.batch_size = int(_number(node, "batch_size", "data", required=True, minimum=1))
    else:
        cfg.batch_fraction = float(_number(node, "batch_fraction", "data", required=True, minimum=0.0))
        if not 0.0 < cfg.batch_fraction <= 1.0:
            raise ConfigError("data.batch_fraction: must lie in (0, 1]")
    return cfg


def _parse_run(node: dict) -> RunConfig:
    _require_keys(node, {"epochs", "seeds", "out_dir"}, {"epochs", "seeds", "out_dir"}, "run")
    epochs = _number(node, "epochs", "run", required=True, minimum=1)
    if not isinstance(epochs, int):
        raise ConfigError("run.epochs: expected an int")
    seeds = node["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(
        isinstance(s, int) and not isinstance(s, bool) for s in seeds
    ):
        raise ConfigError("run.seeds: expected a nonempty list of ints")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("run.seeds: seeds must be distinct")
    return RunConfig(epochs=epochs, seeds=list(seeds), out_dir=_string(node, "out_dir", "run", required=True))


def parse_train_config(raw: dict) -> ExperimentConfig:
    _require_keys(raw, {"model", "layout", "integrator", "data", "run"},
                  {"model", "integrator", "data", "run"}, "<top>")
    model = _parse_model(raw["model"])
    layout = _parse_layout(raw.get("layout"), model.n_layers)
    integrator = _parse_integrator(raw["integrator"])
    data = _parse_data(raw["data"])
    run = _parse_run(raw["run"])
    if integrator.scheme in ("baseline_em", "baseline_sgdm") and any(lc.kind != "none" for lc in layout):
        raise ConfigError(f"integrator.scheme: {integrator.scheme} requires an unconstrained layout")
    for lc in layout:
        if lc.kind == "circle" and lc.radius is None:
            raise ConfigError("layout: circle layers need a radius (layout.radius or layout.radii)")
    return ExperimentConfig(model=model, layout=layout, integrator=integrator, data=data, run=run, raw=raw)


# ---------------------------------------------------------------------------
# sample config


@dataclass
class SamplingConfig:
    family: str                 # "circle" | "orthogonal"
    scheme: str                 # "od" | "ud_oba"
    h: float
    gamma: float
    tau: float
    steps: int
    burn_in: int
    thin: int
    seed: int
    count: int = 1              # circle: number of circles
    radius: float = 1.0
    rows: int = 8               # orthogonal: stored q dimensions
    cols: int = 4
    potential: str = "zero"     # "zero" | "quadratic" (V = 0.5*||theta - center||^2)
    center: float = 0.0
    k_max: int = 20
    tol: float = 1e-10
    projection_variant: str = "orthogonal"
    histogram_bins: int = 50
    n_batches: int = 50
    out: str | None = None


def parse_sample_config(raw: dict) -> SamplingConfig:
    _require_keys(raw, {"sampling"}, {"sampling"}, "<top>")
    node = raw["sampling"]
    allowed = {
        "family", "scheme", "h", "gamma", "tau", "steps", "burn_in", "thin", "seed",
        "count", "radius", "rows", "cols", "potential", "center", "k_max", "tol",
        "projection_variant", "histogram_bins", "n_batches", "out",
    }
    _require_keys(node, allowed, {"family", "scheme", "h", "steps"}, "sampling")
    cfg = SamplingConfig(
        family=_string(node, "family", "sampling", required=True, choices={"circle", "orthogonal"}),
        scheme=_string(node, "scheme", "sampling", required=True, choices={"od", "ud_oba"}),
        h=float(_number(node, "h", "sampling", required=True)),
        gamma=float(_number(node, "gamma", "sampling", default=1.0, minimum=0.0)),
        tau=float(_number(node, "tau", "sampling", default=0.0, minimum=0.0)),
        steps=int(_number(node, "steps", "sampling", required=True, minimum=1)),
        burn_in=int(_number(node, "burn_in", "sampling", default=0, minimum=0)),
        thin=int(_number(node, "thin", "sampling", default=1, minimum=1)),
        seed=int(_number(node, "seed", "sampling", default=0)),
        count=int(_number(node, "count", "sampling", default=1, minimum=1)),
        radius=float(_number(node, "radius", "sampling", default=1.0)),
        rows=int(_number(node, "rows", "sampling", default=8, minimum=1)),
        cols=int(_number(node, "cols", "sampling", default=4, minimum=1)),
        potential=_string(node, "potential", "sampling", default="zero", choices={"zero", "quadratic"}),
        center=float(_number(node, "center", "sampling", default=0.0)),
        k_max=int(_number(node, "k_max", "sampling", default=20, minimum=1)),
        tol=float(_number(node, "tol", "sampling", default=1e-10, minimum=0.0)),
        projection_variant=_string(node, "projection_variant", "sampling", default="orthogonal",
                                   choices={"orthogonal", "oblique"}),
        histogram_bins=int(_number(node, "histogram_bins", "sampling", default=50, minimum=1)),
        n_batches=int(_number(node, "n_batches", "sampling", default=50, minimum=2)),
        out=_string(node, "out", "sampling", default=None),
    )
    if cfg.radius <= 0.0:
        raise ConfigError("sampling.radius: must be positive")
    if cfg.rows < cfg.cols:
        raise ConfigError("sampling.rows: must be >= sampling.cols (stored matrix is tall)")
    if cfg.burn_in >= cfg.steps:
        raise ConfigError("sampling.burn_in: must be smaller than sampling.steps")
    if cfg.scheme == "ud_oba" and cfg.gamma <= 0.0:
        raise ConfigError("sampling.gamma: ud_oba needs gamma > 0")
    return cfg


# ---------------------------------------------------------------------------
# gradcheck config


@dataclass
class GradcheckConfig:
    model: MLPSpec
    layout: list[LayerConstraint]
    batch_size: int
    seed: int
    eps: float


def parse_gradcheck_config(raw: dict) -> GradcheckConfig:
    _require_keys(raw, {"model", "layout", "gradcheck"}, {"model"}, "<top>")
    model = _parse_model(raw["model"])
    layout = _parse_layout(raw.get("layout"), model.n_layers)
    node = raw.get("gradcheck", {}) or {}
    _require_keys(node, {"batch_size", "seed", "eps"}, set(), "gradcheck")
    return GradcheckConfig(
        model=model,
        layout=layout,
        batch_size=int(_number(node, "batch_size", "gradcheck", default=8, minimum=1)),
        seed=int(_number(node, "seed", "gradcheck", default=0)),
        eps=float(_number(node, "eps", "gradcheck", default=1e-5)),
    )
