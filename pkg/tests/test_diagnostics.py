import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.action_space import graph_from_names
from src.agents import default_profiles, uniform_profiles
from src.diagnostics import (
    action_space_frame,
    best_actions,
    comparison_frame,
    cumulative_regret,
    emit_diagnostics,
    expected_graph_f1,
    expected_graph_latency,
    expected_rewards_frame,
    last_selections,
    last_step_selections,
    load_run,
    reference_table,
    selection_distribution_frame,
)
from src.errors import ConfigurationError
from src.harness import TrainingResult, train
from src.linucb import init_model
from src.reward_metrics import RewardConfig

SCHEMA = ("A", "B", "C")


@pytest.fixture
def trained(small_dataset, individual_space, table_backend):
    model = init_model([g.action_id for g in individual_space], 3, 2.0)
    return train(small_dataset, individual_space, model, table_backend, RewardConfig(), epochs=9, seed=0)


def test_expected_f1_of_single_agents(agents, individual_space):
    profiles = default_profiles(agents)
    assert expected_graph_f1(individual_space[0], profiles, "A") == pytest.approx(0.914)
    assert expected_graph_f1(individual_space[2], profiles, "C") == pytest.approx(0.458)


def test_expected_f1_with_copying_and_voting(agents):
    profiles = default_profiles(agents)
    chain = graph_from_names(agents, [("NoR", "IRCoT"), ("IRCoT", "final")])
    assert expected_graph_f1(chain, profiles, "A") == pytest.approx(0.9 * 0.914)

    # with two voters the lower index wins every one-to-one tie
    pair = graph_from_names(agents, [("OneR", "final"), ("IRCoT", "final")])
    assert expected_graph_f1(pair, profiles, "B") == pytest.approx(0.518)

    trio = graph_from_names(agents, [("NoR", "final"), ("OneR", "final"), ("IRCoT", "final")])
    p = uniform_profiles(agents, SCHEMA, f1_mean=0.5)
    # P(two or more right) + P(only NoR right)
    assert expected_graph_f1(trio, p, "A") == pytest.approx(0.5 + 0.125)


def test_expected_latency_is_critical_path(agents):
    profiles = default_profiles(agents)
    chain = graph_from_names(agents, [("NoR", "IRCoT"), ("IRCoT", "final")])
    fan_in = graph_from_names(agents, [("NoR", "final"), ("IRCoT", "final")])
    assert expected_graph_latency(chain, profiles, "B") == pytest.approx(0.66 + 192.30)
    assert expected_graph_latency(fan_in, profiles, "B") == pytest.approx(192.30)


def test_reference_best_actions(agents, individual_space):
    profiles = default_profiles(agents)
    agnostic = best_actions(reference_table(individual_space, profiles, SCHEMA, RewardConfig.time_agnostic()))
    assert {label: aid for label, (aid, _) in agnostic.items()} == {"A": 0, "B": 2, "C": 2}
    timed = best_actions(reference_table(individual_space, profiles, SCHEMA, RewardConfig(0.5, "individual")))
    assert timed["B"][0] == 1


def test_expected_rewards_frame_shape(trained):
    result = TrainingResult(
        trained.model, trained.episodes[:100], trained.action_space, trained.reward_cfg, trained.schema,
        trained.theta_history[:100],
    )
    frame = expected_rewards_frame(result)
    assert len(frame) == 100 * 3 * 3
    assert frame["reference"].isna().all()
    last = frame[frame["step"] == 99]
    for c, label in enumerate(SCHEMA):
        values = last[last["context"] == label].sort_values("action_id")["expected_reward"].to_numpy()
        np.testing.assert_allclose(values, trained.theta_history[99][1][:, c])


def test_selection_distribution_sums_to_one(trained):
    frame = selection_distribution_frame(trained.episodes, window=10)
    totals = frame.groupby(["timestep", "context"])["frequency"].sum()
    np.testing.assert_allclose(totals.to_numpy(), 1.0)


def test_regret_is_non_decreasing(agents, trained):
    reference = reference_table(trained.action_space, default_profiles(agents), SCHEMA, trained.reward_cfg)
    regret = cumulative_regret(trained.episodes, reference)
    assert len(regret) == len(trained.episodes)
    assert all(b >= a - 1e-12 for a, b in zip(regret, regret[1:]))


def test_emit_diagnostics_writes_every_artifact(tmp_path, agents, trained):
    written = emit_diagnostics(trained, tmp_path, window=100, profiles=default_profiles(agents))
    assert {p.name for p in written.values()} == {
        "episodes.csv", "expected_rewards.csv", "selection_dist.csv", "summary.json",
    }
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["episodes"] == len(trained.episodes)
    assert set(summary["contexts"]) == set(SCHEMA)
    assert summary["cumulative_regret"] >= 0

    episodes = pd.read_csv(tmp_path / "episodes.csv", float_precision="round_trip")
    assert len(episodes) == len(trained.episodes)
    assert episodes["reward"].tolist() == [e.reward for e in trained.episodes]
    assert load_run(tmp_path).keys() >= {"episodes", "expected_rewards", "selection_dist", "summary"}


def test_episodes_csv_is_byte_identical_across_runs(tmp_path, small_dataset, individual_space, table_backend):
    for name in ("first", "second"):
        model = init_model([g.action_id for g in individual_space], 3, 2.0)
        result = train(small_dataset, individual_space, model, table_backend, RewardConfig(), epochs=3, seed=5)
        emit_diagnostics(result, tmp_path / name)
    first = (tmp_path / "first" / "episodes.csv").read_bytes()
    assert first == (tmp_path / "second" / "episodes.csv").read_bytes()


def test_emit_rejects_empty_log(tmp_path, trained):
    empty = TrainingResult(trained.model, [], trained.action_space, trained.reward_cfg, trained.schema)
    with pytest.raises(ConfigurationError):
        emit_diagnostics(empty, tmp_path)


def test_dashboard_frames(collaborative_space):
    frame = action_space_frame(collaborative_space)
    assert len(frame) == 97
    assert frame["edges"].is_monotonic_increasing

    document = {"policies": {"aqa": [{"context": "A", "f1": 0.9}, {"context": "overall", "f1": 0.7}]}}
    assert comparison_frame(document)["policy"].tolist() == ["aqa", "aqa"]


def test_selection_windows(trained):
    template = trained.episodes[0]
    labels = ["A", "B", "B", "A", "B", "A"]
    episodes = [replace(template, timestep=t, context_label=lab, action_id=t) for t, lab in enumerate(labels)]
    assert last_selections(episodes, "B", 2) == [2, 4]
    assert last_step_selections(episodes, "B", 3) == [4]
    assert last_step_selections(episodes, "A", 3) == [3, 5]
