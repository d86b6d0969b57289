"""
Tests for experiment spec loading and validation
"""

import json
import math

import pytest
from pydantic import ValidationError

from core.config_manager import ConfigManager
from core.exceptions import InvalidArgumentsError
from models.experiment_models import ExperimentSpec, FosiConfig, OptimizerSpec, StoppingRule


def minimal_spec(**overrides):
    spec = {
        "name": "unit",
        "problem": {"family": "spectrum", "params": {"n": 20, "lam1": 10.0}, "seed": 0},
        "optimizers": [{"kind": "gd", "lr": 0.01}],
        "budget": {"max_iterations": 10},
    }
    spec.update(overrides)
    return spec


class TestConfigManager:

    def test_loads_and_merges_defaults(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(minimal_spec(output={"directory": str(tmp_path / "out")})), encoding="utf-8")
        spec = ConfigManager(path).to_experiment_spec()
        assert spec.output.directory == str(tmp_path / "out")
        assert spec.output.record_every == 1
        assert spec.output.record_timing is False
        assert spec.summary.threshold == "baseline_best"

    def test_default_output_omits_timing(self):
        spec = ConfigManager(data=minimal_spec()).to_experiment_spec()
        assert spec.output.record_timing is False

    @pytest.mark.parametrize("name", ["get", "set", "get_section", "get_all_settings", "save_config"])
    def test_no_settings_accessors(self, name):
        assert not hasattr(ConfigManager, name)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidArgumentsError):
            ConfigManager(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(InvalidArgumentsError):
            ConfigManager(path)

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(InvalidArgumentsError):
            ConfigManager(path)

    def test_validate_reports_dotted_paths(self):
        spec = minimal_spec(optimizers=[{"kind": "sgd", "lr": 0.01}])
        errors = ConfigManager(data=spec).validate_config()
        assert any(path.startswith("optimizers.0.kind") for path in errors)

    def test_to_experiment_spec_lists_problems(self):
        spec = minimal_spec()
        del spec["budget"]
        with pytest.raises(InvalidArgumentsError, match="budget"):
            ConfigManager(data=spec).to_experiment_spec()

    def test_shipped_specs_validate(self):
        from pathlib import Path

        spec_dir = Path(__file__).parent.parent / "experiments"
        paths = sorted(p for p in spec_dir.glob("*.json") if p.name != "logistic_problem.json")
        assert paths
        for path in paths:
            assert ConfigManager(path).validate_config() == {}, path.name


class TestFosiConfig:

    @pytest.mark.parametrize("value", ["inf", "Infinity", None])
    def test_unbounded_clip(self, value):
        assert math.isinf(FosiConfig(c=value).c)

    def test_defaults(self):
        cfg = FosiConfig()
        assert (cfg.k, cfg.l, cfg.T, cfg.W, cfg.rho) == (10, 0, "auto", 0, 1.1)
        assert cfg.alpha is None

    @pytest.mark.parametrize("kwargs", [
        {"c": 0.5},
        {"k": 0, "l": 0},
        {"T": 0},
        {"T": "sometimes"},
        {"W": -1},
        {"W": "never"},
        {"rho": 1.0},
        {"alpha": 0.0},
        {"alpha": 1.5},
        {"unknown": 1},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValidationError):
            FosiConfig(**kwargs)

    @pytest.mark.parametrize("T,W", [(50, "T"), ("measured", "epoch"), ("auto", 20)])
    def test_accepts_interval_forms(self, T, W):
        cfg = FosiConfig(T=T, W=W)
        assert cfg.T == T and cfg.W == W

    def test_frozen(self):
        cfg = FosiConfig()
        with pytest.raises(ValidationError):
            cfg.k = 3


class TestStoppingRule:

    def test_budget_required(self):
        with pytest.raises(ValidationError):
            StoppingRule()

    def test_epochs_need_steps_per_epoch(self):
        rule = StoppingRule(epochs=3)
        assert rule.iterations(steps_per_epoch=10) == 30
        with pytest.raises(ValueError):
            rule.iterations()

    def test_iterations_take_precedence(self):
        assert StoppingRule(max_iterations=5, epochs=3).iterations(steps_per_epoch=10) == 5


class TestOptimizerSpec:

    def test_optimal_rate_not_allowed_for_adam(self):
        with pytest.raises(ValidationError):
            OptimizerSpec(kind="adam", lr="optimal")

    def test_run_ids(self):
        assert OptimizerSpec(kind="hb", lr=0.1).run_id == "hb"
        assert OptimizerSpec(kind="hb", lr=0.1, fosi={}).run_id == "fosi-hb"
        assert OptimizerSpec(id="custom", kind="gd", lr=0.1).run_id == "custom"

    def test_nonpositive_rate(self):
        with pytest.raises(ValidationError):
            OptimizerSpec(kind="gd", lr=0.0)


class TestExperimentSpec:

    def test_duplicate_ids_rejected(self):
        spec = minimal_spec(optimizers=[{"kind": "gd", "lr": 0.01}, {"kind": "gd", "lr": 0.1}])
        with pytest.raises(ValidationError, match="duplicate"):
            ExperimentSpec.model_validate(spec)

    def test_explicit_ids_resolve_duplicates(self):
        spec = minimal_spec(optimizers=[{"id": "slow", "kind": "gd", "lr": 0.01},
                                        {"id": "fast", "kind": "gd", "lr": 0.1}])
        assert [o.run_id for o in ExperimentSpec.model_validate(spec).optimizers] == ["slow", "fast"]

    def test_unknown_baseline(self):
        spec = minimal_spec(summary={"baseline": "adam"})
        with pytest.raises(ValidationError):
            ExperimentSpec.model_validate(spec)

    def test_empty_optimizer_list(self):
        with pytest.raises(ValidationError):
            ExperimentSpec.model_validate(minimal_spec(optimizers=[]))

    def test_stochastic_flag(self):
        spec = minimal_spec(problem={"family": "logistic", "params": {"m": 100, "d": 5}, "batch_size": 10})
        assert ExperimentSpec.model_validate(spec).problem.is_stochastic
