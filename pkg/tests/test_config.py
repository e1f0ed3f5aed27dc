import pytest

from mathcurate.config import ConfigError, PipelineConfig, load_config, validate_config


def test_defaults_validate():
    cfg = PipelineConfig()
    assert validate_config(cfg) == []
    assert cfg.minhash_threshold("orca_math") == 0.6
    assert cfg.minhash_threshold("olympiads") == 0.7


def test_default_budgets_and_boundaries():
    cfg = PipelineConfig()
    assert cfg.small_rollouts == 64
    assert 5 <= cfg.large_rollouts <= 8
    assert cfg.quintile_boundaries == (0.2, 0.4, 0.6, 0.8)
    assert cfg.semantic_threshold == 0.5
    assert set(cfg.solvability_exempt_sources) == {"harp", "omni_math", "math", "gsm8k"}
    assert cfg.reformulation_small_rollouts == 8
    assert cfg.reformulation_large_rollouts == 3


def test_threshold_bounds_checked():
    cfg = PipelineConfig(minhash_threshold_default=0.0)
    assert any("minhash_threshold_default" in e for e in validate_config(cfg))
    cfg = PipelineConfig(semantic_threshold=1.5)
    assert any("semantic_threshold" in e for e in validate_config(cfg))


def test_quintile_boundaries_checked():
    assert any(
        "strictly increasing" in e
        for e in validate_config(PipelineConfig(quintile_boundaries=(0.2, 0.2, 0.6, 0.8)))
    )
    assert any(
        "inside (0,1)" in e
        for e in validate_config(PipelineConfig(quintile_boundaries=(0.0, 0.4, 0.6, 0.8)))
    )


def test_solvability_before_answer_rejected():
    stages = ("source_clean", "solvability", "answer", "exact_dedup", "quintiles")
    cfg = PipelineConfig(stages=stages)
    errors = validate_config(cfg)
    assert any("'answer' must run before 'solvability'" in e for e in errors)


def test_disabled_stage_relaxes_ordering():
    stages = ("source_clean", "solvability", "answer", "exact_dedup", "quintiles")
    cfg = PipelineConfig(stages=stages, enabled={"solvability": False, "quintiles": False})
    assert validate_config(cfg) == []


def test_fingerprint_tracks_behavioral_settings():
    a, b = PipelineConfig(), PipelineConfig()
    assert a.fingerprint() == b.fingerprint()
    b.seed = 99
    assert a.fingerprint() != b.fingerprint()


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "pipeline.toml"
    path.write_text(
        """
seed = 7
semantic_threshold = 0.4
quintile_boundaries = [0.2, 0.4, 0.6, 0.8]
solvability_exempt_sources = ["harp", "gsm8k"]
inputs = [{path = "data/x.jsonl", source = "cn_k12"}]

[minhash_threshold_per_subset]
orca_math = 0.6

[stages_enabled]
taxonomy = false

[model]
mode = "mock"
mock_seed = 3
""",
        encoding="utf-8",
    )
    cfg = load_config(path)
    assert cfg.seed == 7
    assert cfg.semantic_threshold == 0.4
    assert cfg.enabled == {"taxonomy": False}
    assert cfg.model.mock_seed == 3
    assert cfg.inputs == [{"path": "data/x.jsonl", "source": "cn_k12"}]


def test_load_config_unknown_key_rejected(tmp_path):
    path = tmp_path / "pipeline.toml"
    path.write_text("mystery_knob = 3\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mystery_knob"):
        load_config(path)


def test_load_config_bad_toml_rejected(tmp_path):
    path = tmp_path / "pipeline.toml"
    path.write_text("seed = [unclosed", encoding="utf-8")
    with pytest.raises(ConfigError, match="parse error"):
        load_config(path)


def test_http_mode_requires_endpoint():
    cfg = PipelineConfig()
    cfg.model.mode = "http"
    assert any("endpoint" in e for e in validate_config(cfg))
