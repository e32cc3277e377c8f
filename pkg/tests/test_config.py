"""Configuration resolution: flags > file > environment > defaults."""

from __future__ import annotations

import json

import pytest

from opal.config import (
    DEFAULT_PLANNER_MODEL,
    ConfigError,
    EngineConfig,
    resolve_config,
)


class TestEngineConfig:
    def test_defaults(self):
        cfg = EngineConfig()
        assert cfg.backend == "rules"
        assert cfg.fixtures_path is None
        assert cfg.max_revisions == 10
        assert cfg.max_restarts == 2
        assert cfg.demo_k == 20
        assert cfg.link_threshold == 0.85
        assert cfg.categorical_k == 12
        assert cfg.seed == 0
        assert cfg.exec_timeout_s == 300.0
        assert cfg.parallelism == 1
        assert cfg.llm_endpoint is None
        assert cfg.llm_api_key is None
        assert cfg.llm_model == DEFAULT_PLANNER_MODEL

    def test_default_budget_allows_33_generations(self):
        cfg = EngineConfig()
        assert (cfg.max_restarts + 1) * (cfg.max_revisions + 1) == 33

    def test_to_dict_round_trips(self):
        cfg = EngineConfig(backend="mock", seed=7, link_threshold=0.9)
        assert EngineConfig(**cfg.to_dict()) == cfg

    def test_zero_budgets_mean_one_shot(self):
        cfg = EngineConfig(max_revisions=0, max_restarts=0)
        assert (cfg.max_restarts + 1) * (cfg.max_revisions + 1) == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"backend": "quantum"},
            {"max_revisions": -1},
            {"max_restarts": -3},
            {"demo_k": 0},
            {"categorical_k": 0},
            {"parallelism": 0},
            {"exec_timeout_s": 0.0},
            {"exec_timeout_s": -2.5},
            {"link_threshold": 0.0},
            {"link_threshold": 1.5},
        ],
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            EngineConfig(**kwargs)


class TestResolveConfig:
    def test_no_sources_gives_defaults(self):
        assert resolve_config(env={}) == EngineConfig()

    def test_env_supplies_remote_model_settings(self):
        cfg = resolve_config(
            env={
                "OPAL_LLM_ENDPOINT": "https://llm.example/v1",
                "OPAL_LLM_API_KEY": "sk-abc",
                "OPAL_LLM_MODEL": "somemodel-2",
            }
        )
        assert cfg.llm_endpoint == "https://llm.example/v1"
        assert cfg.llm_api_key == "sk-abc"
        assert cfg.llm_model == "somemodel-2"

    def test_env_supplies_nothing_else(self):
        # Only the three OPAL_LLM_* names are read; lookalikes are inert.
        cfg = resolve_config(env={"OPAL_SEED": "99", "OPAL_MAX_REVISIONS": "1"})
        assert cfg.seed == 0
        assert cfg.max_revisions == 10

    def test_empty_env_value_is_not_given(self):
        cfg = resolve_config(env={"OPAL_LLM_ENDPOINT": ""})
        assert cfg.llm_endpoint is None

    def test_file_overrides_env(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"llm_model": "from-file"}), encoding="utf-8")
        cfg = resolve_config(config_file=path, env={"OPAL_LLM_MODEL": "from-env"})
        assert cfg.llm_model == "from-file"

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps({"backend": "rules", "seed": 3, "max_revisions": 4}),
            encoding="utf-8",
        )
        cfg = resolve_config(
            flags={"backend": "mock", "seed": None}, config_file=path, env={}
        )
        assert cfg.backend == "mock"  # flag wins
        assert cfg.seed == 3  # None flag means "not given", file wins
        assert cfg.max_revisions == 4

    def test_non_config_flags_are_ignored(self):
        cfg = resolve_config(
            flags={"command": "run", "instance_dir": "x", "func": print, "seed": 5},
            env={},
        )
        assert cfg.seed == 5

    def test_file_numeric_strings_coerced(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps({"max_revisions": "7", "link_threshold": "0.5"}),
            encoding="utf-8",
        )
        cfg = resolve_config(config_file=path, env={})
        assert cfg.max_revisions == 7
        assert cfg.link_threshold == 0.5

    def test_unknown_file_key_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"max_refisions": 7}), encoding="utf-8")
        with pytest.raises(ConfigError, match="max_refisions"):
            resolve_config(config_file=path, env={})

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            resolve_config(config_file=tmp_path / "absent.json", env={})

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            resolve_config(config_file=path, env={})

    def test_non_object_file_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            resolve_config(config_file=path, env={})

    def test_invalid_merged_value_still_validated(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"backend": "nope"}), encoding="utf-8")
        with pytest.raises(ConfigError):
            resolve_config(config_file=path, env={})
