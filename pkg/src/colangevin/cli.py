"""Command line entry point.

Subcommands: train, sample, verify, gradcheck, spiral-gen.  Each takes a YAML
config (--config), writes into --out, and train/sample/spiral-gen accept
--seed-override.  Exit code is nonzero on invalid configs, on verify failures
and when every training seed failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import (
    ConfigError,
    parse_gradcheck_config,
    parse_sample_config,
    parse_train_config,
    load_yaml,
)
from .data import SpiralSpec, spiral_generate


def _add_common(p: argparse.ArgumentParser, seed_override: bool = True) -> None:
    p.add_argument("--config", required=False, help="YAML config file")
    p.add_argument("--out", required=False, help="output directory or file")
    if seed_override:
        p.add_argument("--seed-override", type=int, default=None, help="run this single seed instead")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colangevin", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training experiment over its seed list")
    _add_common(p)

    p = sub.add_parser("sample", help="run a constrained sampling trajectory and emit statistics")
    _add_common(p)

    p = sub.add_parser("verify", help="run the invariant suite and emit a pass/fail report")
    p.add_argument("--out", required=False, help="write the JSON report here instead of stdout")

    p = sub.add_parser("gradcheck", help="compare backprop against central finite differences")
    _add_common(p, seed_override=False)

    p = sub.add_parser("spiral-gen", help="generate the two-class spiral dataset as CSV")
    _add_common(p)
    return parser


def _require_config(args) -> dict:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    return load_yaml(args.config)


def _cmd_train(args) -> int:
    from .runners import run_train

    exp = parse_train_config(_require_config(args))
    manifest = run_train(exp, out_dir=args.out, seed_override=args.seed_override)
    ok = [s for s, st in manifest["seeds"].items() if st["status"] == "ok"]
    failed = [s for s, st in manifest["seeds"].items() if st["status"] != "ok"]
    out_dir = args.out if args.out is not None else exp.run.out_dir
    print(f"train: {len(ok)} seed(s) ok, {len(failed)} failed -> {out_dir}")
    for s in failed:
        print(f"  seed {s} failed: {manifest['seeds'][s]['error']}", file=sys.stderr)
    return 0 if ok else 1


def _cmd_sample(args) -> int:
    from .runners import run_sample

    cfg = parse_sample_config(_require_config(args))
    if args.seed_override is not None:
        cfg.seed = args.seed_override
    stats = run_sample(cfg, out=args.out)
    if args.out is None and cfg.out is None:
        print(json.dumps(stats, indent=2, sort_keys=True))
    else:
        print(f"sample: {stats['recorded_states']} recorded states -> {args.out or cfg.out}")
    return 0


def _cmd_verify(args) -> int:
    from .runners import run_verify

    report = run_verify(out=args.out)
    for c in report["checks"]:
        verdict = "pass" if c["pass"] else "FAIL"
        print(f"[{verdict}] {c['check_id']}: measured {c['measured']:.3g} (tolerance {c['tolerance']:.3g})")
    if args.out:
        print(f"report -> {args.out}")
    return 0 if report["all_pass"] else 1


def _cmd_gradcheck(args) -> int:
    from .runners import run_gradcheck

    cfg = parse_gradcheck_config(_require_config(args))
    report = run_gradcheck(cfg, out=args.out)
    for layer in report["layers"]:
        print(f"{layer['name']}: max rel error {layer['max_rel_error']:.3g}")
    print(f"overall: {report['max_rel_error']:.3g} ({'pass' if report['pass'] else 'FAIL'})")
    return 0 if report["pass"] else 1


def _cmd_spiral_gen(args) -> int:
    spec = SpiralSpec()
    if args.config:
        raw = load_yaml(args.config)
        from .config import _parse_data  # shares the data grammar

        data = _parse_data(raw.get("data", {"spiral": {}}))
        if data.source != "spiral":
            raise ConfigError("spiral-gen needs a config with data.spiral")
        spec = SpiralSpec(
            n_train=data.spiral_n_train,
            n_test=data.spiral_n_test,
            noise_sigma=data.spiral_noise_sigma,
            seed=data.seed,
        )
    if args.seed_override is not None:
        spec = SpiralSpec(spec.n_train, spec.n_test, spec.noise_sigma, args.seed_override)
    out_dir = Path(args.out or "spiral")
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = spiral_generate(spec)
    for name, ds in (("train", train), ("test", test)):
        lines = ["x,y,label"]
        for row, label in zip(ds.inputs, ds.labels):
            lines.append(f"{row[0]:.17g},{row[1]:.17g},{label}")
        (out_dir / f"spiral_{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"spiral-gen: {spec.n_train} train / {spec.n_test} test points -> {out_dir}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "sample": _cmd_sample,
        "verify": _cmd_verify,
        "gradcheck": _cmd_gradcheck,
        "spiral-gen": _cmd_spiral_gen,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
