import socket

import numpy as np
import pytest

from src.action_space import AgentId
from src.agents import (
    AgentProfile,
    AgentResponse,
    ContextProfile,
    RemoteBackend,
    SimulatedBackend,
    default_profiles,
    distractor_for,
    effective_success,
    load_profiles,
    remote_answer,
    save_profiles,
    simulate_answer,
    uniform_profiles,
)
from src.config import config_from_dict
from src.errors import AgentProtocolError, AgentTimeoutError, ConfigurationError
from src.harness import build_backend
from src.reward_metrics import normalize_tokens, token_f1

GOLD = "marie curie"


def _profile(f1_mean, latency=1.0, agent=AgentId(0, "NoR")):
    return AgentProfile(agent, {"A": ContextProfile(f1_mean, latency)})


@pytest.mark.parametrize("f1_mean, expected", [(1.0, 1.0), (0.0, 0.0)])
def test_degenerate_profiles(f1_mean, expected):
    rng = np.random.default_rng(0)
    for _ in range(20):
        response = simulate_answer(_profile(f1_mean), "A", GOLD, rng)
        assert token_f1(response.text, GOLD) == expected


def test_nor_context_a_calibration(agents):
    profile = default_profiles(agents)[0]
    rng = np.random.default_rng(0)
    f1s = [token_f1(simulate_answer(profile, "A", GOLD, rng).text, GOLD) for _ in range(10000)]
    assert np.mean(f1s) == pytest.approx(0.914, abs=0.02)


def test_latency_is_positive_with_matching_mean(agents):
    profile = default_profiles(agents)[2]
    rng = np.random.default_rng(1)
    latencies = np.array([simulate_answer(profile, "C", GOLD, rng).latency_s for _ in range(5000)])
    assert np.all(latencies > 0) and np.all(np.isfinite(latencies))
    assert latencies.mean() == pytest.approx(184.85, rel=0.02)


def test_same_seed_same_responses(agents):
    profile = default_profiles(agents)[1]
    first = [simulate_answer(profile, "B", GOLD, np.random.default_rng(7)) for _ in range(3)]
    second = [simulate_answer(profile, "B", GOLD, np.random.default_rng(7)) for _ in range(3)]
    assert first == second


def test_unknown_context_rejected():
    with pytest.raises(ConfigurationError):
        simulate_answer(_profile(0.5), "Z", GOLD, np.random.default_rng(0))


def test_distractors_are_per_agent_and_disjoint_from_gold():
    nor, oner = AgentId(0, "NoR"), AgentId(1, "OneR")
    assert distractor_for(nor, GOLD) != distractor_for(oner, GOLD)
    assert token_f1(distractor_for(nor, "distractor0"), "distractor0") == 0.0
    assert not set(normalize_tokens(distractor_for(oner, GOLD))) & set(normalize_tokens(GOLD))


def test_upstream_answers_can_be_copied():
    upstream = AgentResponse("x", 1.0, confidence=1.0)
    assert effective_success(0.061, [upstream], 0.9) == pytest.approx(0.9)
    assert effective_success(0.95, [upstream], 0.9) == 0.95
    failed = AgentResponse("", 1.0, failed=True, confidence=1.0)
    assert effective_success(0.061, [failed], 0.9) == 0.061

    weak = _profile(0.0)
    rng = np.random.default_rng(0)
    strong_upstream = [(AgentResponse(GOLD, 0.5, confidence=1.0), AgentId(1, "IRCoT"))]
    hits = [simulate_answer(weak, "A", GOLD, rng, strong_upstream, copy_factor=0.9).text == GOLD for _ in range(4000)]
    assert np.mean(hits) == pytest.approx(0.9, abs=0.02)


def test_response_records_upstream_inputs():
    upstream = [(AgentResponse("first", 0.5, confidence=0.2), AgentId(1, "OneR"))]
    response = simulate_answer(_profile(1.0), "A", GOLD, np.random.default_rng(0), upstream)
    assert response.upstream_inputs == ((AgentId(1, "OneR"), "first"),)


def test_simulated_backend_requires_gold_and_rng(agents):
    backend = SimulatedBackend(uniform_profiles(agents, ["A"], f1_mean=1.0))
    with pytest.raises(ConfigurationError):
        backend.answer(agents[0], "q", [], context_label="A", rng=np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        backend.answer(agents[0], "q", [], context_label="A", gold=GOLD)
    response = backend.answer(agents[0], "q", [], context_label="A", gold=GOLD, rng=np.random.default_rng(0))
    assert response.text == GOLD


def test_profile_validation():
    with pytest.raises(ConfigurationError):
        ContextProfile(1.5, 1.0)
    with pytest.raises(ConfigurationError):
        ContextProfile(0.5, 0.0)
    with pytest.raises(ConfigurationError):
        SimulatedBackend({}, copy_factor=2.0)


def test_profile_file_round_trip(tmp_path, agents):
    profiles = default_profiles(agents)
    path = save_profiles(tmp_path / "profiles.json", profiles)
    loaded = load_profiles(path, agents)
    assert loaded[2].cell("C") == profiles[2].cell("C")
    assert all(p.covers(["A", "B", "C"]) for p in loaded.values())


def test_remote_echo(answer_server):
    response = remote_answer(f"{answer_server}/echo", "who discovered radium?", [], timeout_s=5.0)
    assert response.text == "who discovered radium?"
    assert not response.failed


def test_remote_latency_is_wall_clock(answer_server):
    response = remote_answer(f"{answer_server}/sleep", "q", [], timeout_s=5.0)
    assert 0.05 <= response.latency_s <= 0.25


def test_remote_forwards_upstream_texts(answer_server, agents):
    backend = RemoteBackend({"IRCoT": f"{answer_server}/upstream"}, timeout_s=5.0)
    upstream = [(AgentResponse("paris", 0.1), agents[0]), (AgentResponse("lyon", 0.2), agents[1])]
    response = backend.answer(agents[2], "q", upstream, context_label="B")
    assert response.text == "paris | lyon"


def test_remote_malformed_response(answer_server):
    with pytest.raises(AgentProtocolError) as info:
        remote_answer(f"{answer_server}/broken", "q", [], timeout_s=5.0)
    assert info.value.elapsed_s >= 0


def test_remote_unreachable_endpoint():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    with pytest.raises(AgentTimeoutError) as info:
        remote_answer(f"http://127.0.0.1:{port}/answer", "q", [], timeout_s=1.0)
    assert info.value.elapsed_s <= 5.0


def test_remote_requires_endpoint_and_timeout(agents):
    with pytest.raises(ConfigurationError):
        remote_answer("", "q", [], timeout_s=1.0)
    with pytest.raises(ConfigurationError):
        remote_answer("http://localhost:1", "q", [], timeout_s=0)
    with pytest.raises(ConfigurationError):
        RemoteBackend({}).answer(agents[0], "q", [], context_label="A")


def test_remote_timeout_comes_from_arguments_only(monkeypatch, agents):
    monkeypatch.setenv("AQA_REMOTE_TIMEOUT_S", "1")
    monkeypatch.setenv("AQA_ENDPOINT_NOR", "http://localhost:1/answer")
    backend = RemoteBackend({}, timeout_s=7.0)
    assert backend.timeout_s == 7.0
    with pytest.raises(ConfigurationError):
        backend.answer(agents[0], "q", [], context_label="A")


def test_environment_reaches_remote_backend_through_config(monkeypatch, agents):
    monkeypatch.setenv("AQA_REMOTE_TIMEOUT_S", "2.5")
    for port, name in enumerate(("NOR", "ONER", "IRCOT"), start=1):
        monkeypatch.setenv(f"AQA_ENDPOINT_{name}", f"http://localhost:{port}/answer")
    config = config_from_dict({"backend": {"kind": "remote", "timeout_s": 9}})
    backend = build_backend(config, agents)
    assert backend.timeout_s == 2.5
    assert backend.endpoints["NoR"] == "http://localhost:1/answer"
