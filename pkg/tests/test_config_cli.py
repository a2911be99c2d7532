import json

import numpy as np
import pytest
import yaml

from colangevin.cli import main
from colangevin.config import (
    ConfigError,
    load_yaml,
    parse_sample_config,
    parse_train_config,
)
from colangevin.data import CsvSchema, load_csv
from colangevin.runners import CSV_HEADER, run_sample, run_train, run_verify


def base_train_config(out_dir, **overrides):
    cfg = {
        "model": {"widths": [2, 8, 8, 1], "loss": "bce_with_logits"},
        "layout": {"hidden_constraint": "orthogonal"},
        "integrator": {"scheme": "od", "h": 0.1, "tau": 0.0},
        "data": {"spiral": {"n_train": 60, "n_test": 40}, "batch_fraction": 0.25, "seed": 1},
        "run": {"epochs": 3, "seeds": [0, 1], "out_dir": str(out_dir)},
    }
    cfg.update(overrides)
    return cfg


class TestConfigValidation:
    def test_unknown_key_is_hard_error_with_path(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["integrator"]["stepsize"] = 0.1
        with pytest.raises(ConfigError, match="integrator.stepsize"):
            parse_train_config(cfg)

    def test_unknown_top_level_key(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["modle"] = {}
        with pytest.raises(ConfigError, match="modle"):
            parse_train_config(cfg)

    def test_missing_required_key(self, tmp_path):
        cfg = base_train_config(tmp_path)
        del cfg["integrator"]["h"]
        with pytest.raises(ConfigError, match="integrator.h"):
            parse_train_config(cfg)

    def test_baseline_rejects_constrained_layout(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["integrator"]["scheme"] = "baseline_sgdm"
        with pytest.raises(ConfigError, match="unconstrained"):
            parse_train_config(cfg)

    def test_circle_needs_radius(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["layout"] = {"hidden_constraint": "circle"}
        with pytest.raises(ConfigError, match="radius"):
            parse_train_config(cfg)

    def test_explicit_layers(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["layout"] = {
            "layers": [
                {"constraint": "circle", "radius": 0.3},
                {"constraint": "orthogonal"},
                {"constraint": "none", "init": "orthogonal"},
            ]
        }
        exp = parse_train_config(cfg)
        kinds = [lc.kind for lc in exp.layout]
        assert kinds == ["circle", "orthogonal", "none"]
        assert exp.layout[0].radius == 0.3

    def test_duplicate_seeds_rejected(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["run"]["seeds"] = [0, 0]
        with pytest.raises(ConfigError, match="seeds"):
            parse_train_config(cfg)

    def test_batch_spec_exactly_one(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["data"]["batch_size"] = 10
        with pytest.raises(ConfigError, match="batch"):
            parse_train_config(cfg)

    def test_sample_config_parses(self):
        raw = {"sampling": {"family": "circle", "scheme": "od", "h": 0.01, "steps": 100, "tau": 1.0}}
        cfg = parse_sample_config(raw)
        assert cfg.family == "circle" and cfg.thin == 1

    def test_sample_config_unknown_key(self):
        raw = {"sampling": {"family": "circle", "scheme": "od", "h": 0.01, "steps": 100, "bogus": 2}}
        with pytest.raises(ConfigError, match="sampling.bogus"):
            parse_sample_config(raw)

    def test_yaml_loader_errors(self, tmp_path):
        missing = tmp_path / "nope.yaml"
        with pytest.raises(ConfigError, match="not found"):
            load_yaml(missing)
        bad = tmp_path / "bad.yaml"
        bad.write_text("a: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigError, match="YAML"):
            load_yaml(bad)


class TestRunTrain:
    def test_csv_schema_and_determinism(self, tmp_path):
        exp = parse_train_config(base_train_config(tmp_path / "a"))
        run_train(exp)
        exp2 = parse_train_config(base_train_config(tmp_path / "b"))
        run_train(exp2)
        for name in ("seed_0.csv", "seed_1.csv", "aggregate.csv"):
            a = (tmp_path / "a" / name).read_text().splitlines()
            b = (tmp_path / "b" / name).read_text().splitlines()
            assert len(a) == len(b)
            if name == "aggregate.csv":
                continue  # wall_seconds columns enter the aggregate too
            assert a[0] == CSV_HEADER
            for ra, rb in zip(a[1:], b[1:]):
                # identical except the wall_seconds column
                assert ra.split(",")[:-1] == rb.split(",")[:-1]

    def test_csv_has_one_row_per_epoch(self, tmp_path):
        exp = parse_train_config(base_train_config(tmp_path))
        run_train(exp)
        rows = (tmp_path / "seed_0.csv").read_text().splitlines()
        assert len(rows) == 1 + 3

    def test_manifest_embeds_config_and_version(self, tmp_path):
        exp = parse_train_config(base_train_config(tmp_path))
        manifest = run_train(exp)
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk == manifest
        assert on_disk["config"]["model"]["widths"] == [2, 8, 8, 1]
        assert on_disk["version"]
        assert on_disk["seeds"]["0"]["status"] == "ok"

    def test_failed_seed_marked_not_crashing(self, tmp_path, monkeypatch):
        import colangevin.runners as runners

        calls = {"n": 0}
        orig = runners.train_single_seed

        def flaky(exp, seed):
            if seed == 0:
                raise ValueError("boom")
            return orig(exp, seed)

        monkeypatch.setattr(runners, "train_single_seed", flaky)
        exp = parse_train_config(base_train_config(tmp_path))
        manifest = runners.run_train(exp)
        assert manifest["seeds"]["0"]["status"] == "failed"
        assert "boom" in manifest["seeds"]["0"]["error"]
        assert manifest["seeds"]["1"]["status"] == "ok"
        assert (tmp_path / "aggregate.csv").exists()

    def test_seed_override(self, tmp_path):
        exp = parse_train_config(base_train_config(tmp_path))
        manifest = run_train(exp, seed_override=7)
        assert list(manifest["seeds"]) == ["7"]
        assert (tmp_path / "seed_7.csv").exists()

    def test_unconstrained_residual_column_zero(self, tmp_path):
        cfg = base_train_config(tmp_path, layout={})
        cfg["integrator"]["scheme"] = "baseline_sgdm"
        cfg["integrator"]["gamma"] = 0.9
        exp = parse_train_config(cfg)
        run_train(exp)
        rows = (tmp_path / "seed_0.csv").read_text().splitlines()[1:]
        assert all(r.split(",")[4] == "0" for r in rows)

    def test_ud_scheme_trains(self, tmp_path):
        cfg = base_train_config(tmp_path)
        cfg["integrator"] = {"scheme": "ud_oba", "h": 0.1, "gamma": 1.0, "tau": 0.0}
        exp = parse_train_config(cfg)
        manifest = run_train(exp, seed_override=0)
        assert manifest["seeds"]["0"]["status"] == "ok"


class TestRunSample:
    def test_circle_frozen_dynamics(self):
        raw = {"sampling": {"family": "circle", "scheme": "od", "h": 0.1, "steps": 50,
                            "tau": 0.0, "count": 4, "n_batches": 5}}
        stats = run_sample(parse_sample_config(raw))
        # tau = 0 with zero potential: every sample identical, zero variance
        assert stats["observables"]["theta_sq_mean"] == pytest.approx(1.0)
        assert stats["observables"]["theta_sq_batch_means_variance"] == pytest.approx(0.0, abs=1e-28)

    def test_circle_uniform_short(self):
        raw = {"sampling": {"family": "circle", "scheme": "od", "h": 0.05, "steps": 4000,
                            "burn_in": 500, "tau": 1.0, "count": 64, "seed": 2}}
        stats = run_sample(parse_sample_config(raw))
        assert abs(stats["observables"]["theta_sq_mean"] - 0.5) < 0.05
        assert sum(stats["histogram"]["counts"]) == stats["recorded_states"] * 64

    def test_ortho_sampler_short(self, tmp_path):
        raw = {"sampling": {"family": "orthogonal", "scheme": "od", "h": 0.005, "steps": 3000,
                            "burn_in": 1000, "tau": 1.0, "rows": 4, "cols": 2, "seed": 3,
                            "out": str(tmp_path / "s.json")}}
        stats = run_sample(parse_sample_config(raw))
        assert (tmp_path / "s.json").exists()
        assert 0.15 < stats["observables"]["entry_sq_mean"] < 0.35  # 1/r = 0.25
        on_disk = json.loads((tmp_path / "s.json").read_text())
        assert on_disk["observables"] == stats["observables"]

    def test_ud_sampler_runs(self):
        raw = {"sampling": {"family": "circle", "scheme": "ud_oba", "h": 0.05, "gamma": 1.0,
                            "steps": 500, "tau": 0.5, "count": 8, "seed": 1}}
        stats = run_sample(parse_sample_config(raw))
        assert stats["recorded_states"] == 500


class TestVerify:
    def test_all_checks_pass(self):
        report = run_verify()
        failing = [c for c in report["checks"] if not c["pass"]]
        assert report["all_pass"], failing

    def test_report_schema(self, tmp_path):
        report = run_verify(out=tmp_path / "report.json")
        for c in report["checks"]:
            assert set(c) == {"check_id", "measured", "tolerance", "pass"}
        assert json.loads((tmp_path / "report.json").read_text())["all_pass"]

    def test_injected_fault_fails_cotangency(self, monkeypatch):
        # negative control: make every momentum projection of the
        # orthogonality steps a no-op; the cotangency invariant must go red.
        # (circle momenta are structurally rebuilt by the exact-rotation A
        # step, so the orthogonality path is where a skipped projection shows)
        import colangevin.integrators as it_mod
        import colangevin.runners as runners

        monkeypatch.setattr(it_mod, "ortho_cotangent_project", lambda q, p_bar: p_bar)
        check = runners._check_cotangency(np.random.default_rng(0), n_steps=50)
        assert not check["pass"]


class TestCli:
    def test_train_and_artifacts(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(base_train_config(tmp_path / "run")), encoding="utf-8")
        rc = main(["train", "--config", str(cfg_path)])
        assert rc == 0
        assert (tmp_path / "run" / "aggregate.csv").exists()
        assert "2 seed(s) ok" in capsys.readouterr().out

    def test_train_out_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(base_train_config(tmp_path / "ignored")), encoding="utf-8")
        rc = main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "other"), "--seed-override", "3"])
        assert rc == 0
        assert (tmp_path / "other" / "seed_3.csv").exists()

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg = base_train_config(tmp_path)
        cfg["integrator"]["bogus"] = 1
        cfg_path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
        assert main(["train", "--config", str(cfg_path)]) == 2
        assert "integrator.bogus" in capsys.readouterr().err

    def test_gradcheck_negative_control(self, monkeypatch, tmp_path):
        # a deliberately wrong gradient (as a broken derivative would produce)
        # must be reported as a mismatch
        import colangevin.model as model_mod
        from colangevin.config import parse_gradcheck_config
        from colangevin.runners import run_gradcheck

        orig = model_mod.mlp_backward
        monkeypatch.setattr(model_mod, "mlp_backward", lambda *a, **k: [g * 1.01 for g in orig(*a, **k)])
        cfg = parse_gradcheck_config({"model": {"widths": [3, 6, 2], "loss": "softmax_cross_entropy"}})
        report = run_gradcheck(cfg)
        assert not report["pass"]
        assert report["max_rel_error"] > 1e-3

    def test_gradcheck_cli(self, tmp_path, capsys):
        cfg_path = tmp_path / "g.yaml"
        cfg_path.write_text(
            yaml.safe_dump({"model": {"widths": [3, 6, 2], "loss": "softmax_cross_entropy"}}),
            encoding="utf-8",
        )
        rc = main(["gradcheck", "--config", str(cfg_path), "--out", str(tmp_path / "g.json")])
        assert rc == 0
        report = json.loads((tmp_path / "g.json").read_text())
        assert report["pass"] and report["max_rel_error"] <= 1e-6

    def test_spiral_gen_roundtrip(self, tmp_path):
        rc = main(["spiral-gen", "--out", str(tmp_path / "sp"), "--seed-override", "5"])
        assert rc == 0
        ds = load_csv(tmp_path / "sp" / "spiral_train.csv", CsvSchema(label_column="label"))
        assert len(ds) == 500 and ds.class_count == 2

    def test_verify_cli_exit_code_on_failure(self, monkeypatch, capsys):
        import colangevin.runners as runners

        fake = {"kind": "verify", "version": "x", "all_pass": False,
                "checks": [{"check_id": "c", "measured": 1.0, "tolerance": 0.5, "pass": False}]}
        monkeypatch.setattr(runners, "run_verify", lambda out=None: fake)
        assert main(["verify"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_sample_cli_writes_stats(self, tmp_path):
        cfg_path = tmp_path / "s.yaml"
        cfg_path.write_text(
            yaml.safe_dump({"sampling": {"family": "circle", "scheme": "od", "h": 0.1,
                                         "steps": 50, "tau": 0.0, "count": 2}}),
            encoding="utf-8",
        )
        rc = main(["sample", "--config", str(cfg_path), "--out", str(tmp_path / "stats.json")])
        assert rc == 0
        assert json.loads((tmp_path / "stats.json").read_text())["kind"] == "sample"
