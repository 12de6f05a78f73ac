from pathlib import Path

import pytest

from src.config import ExperimentConfig, config_from_dict, load_config
from src.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_defaults():
    config = ExperimentConfig()
    assert config.agents == ("NoR", "OneR", "IRCoT")
    assert config.dimension == 3
    assert config.bandit.alpha == 2.0
    assert config.reward.build().beta == 0.5
    assert config.train.seed == 0
    assert (config.data.train_size, config.data.test_size) == (210, 51)


@pytest.mark.parametrize("name, epochs, preset", [("individual", 20, "individual"), ("collaborative", 50, "collaborative")])
def test_presets_load(name, epochs, preset):
    config = load_config(CONFIGS / f"{name}.yaml")
    assert config.action_space.mode == name
    assert config.train.epochs == epochs
    assert config.reward.penalty_preset == preset


def test_individual_mode_limits_edges():
    config = config_from_dict({"action_space": {"mode": "individual", "max_edges": 4}})
    assert config.action_space.effective_max_edges == 1


def test_seed_override():
    assert ExperimentConfig().with_seed(7).train.seed == 7
    assert ExperimentConfig().with_seed(None).train.seed == 0


@pytest.mark.parametrize(
    "document",
    [
        {"bandit": {"alpha": -1}},
        {"bandit": {"d": 4}},
        {"reward": {"penalty_preset": "cubic"}},
        {"action_space": {"mode": "hybrid"}},
        {"train": {"epochs": 0}},
        {"backend": {"kind": "grpc"}},
        {"schema": ["A", "A"]},
        {"mystery": 1},
        {"bandit": {"gamma": 0.3}},
    ],
)
def test_invalid_documents_rejected(document):
    with pytest.raises(ConfigurationError):
        config_from_dict(document)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.yaml")


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("AQA_OUTPUT_DIR", "/tmp/aqa-runs")
    monkeypatch.setenv("AQA_REMOTE_TIMEOUT_S", "12.5")
    monkeypatch.setenv("AQA_ENDPOINT_IRCOT", "http://localhost:9000/answer")
    config = config_from_dict({})
    assert config.output.dir == "/tmp/aqa-runs"
    assert config.backend.timeout_s == 12.5
    assert config.backend.endpoints == {"IRCoT": "http://localhost:9000/answer"}


def test_forbidden_edges_become_tuples():
    config = config_from_dict({"action_space": {"forbidden_edges": [["IRCoT", "NoR"]]}})
    assert config.action_space.forbidden_edges == (("IRCoT", "NoR"),)
