"""
Diagnostics Module
Analytic simulator expectations, the CSV/JSON artifacts of a training run
(episodes, expected-reward curves, selection distributions, summary) and the
DataFrames the dashboard renders.
"""

import json
import logging
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from src.action_space import FINAL, StrategyGraph
from src.agents import DEFAULT_COPY_FACTOR, AgentProfile
from src.errors import ConfigurationError
from src.harness import BaselineResult, EpisodeRecord, TrainingResult
from src.reward_metrics import RewardConfig, reward
from src.utils import ensure_dir, modal_value, read_json, write_json

logger = logging.getLogger(__name__)

EPISODES_FILE = "episodes.csv"
EXPECTED_REWARDS_FILE = "expected_rewards.csv"
SELECTION_FILE = "selection_dist.csv"
SUMMARY_FILE = "summary.json"
EDGE_PROBS_FILE = "edge_probs.csv"
COMPARISON_FILE = "comparison.json"


def effective_probabilities(
    graph: StrategyGraph,
    profiles: Mapping[int, AgentProfile],
    context_label: str,
    copy_factor: float = DEFAULT_COPY_FACTOR,
) -> Dict[int, float]:
    """Per executed agent: max(own p, copy_factor * best upstream p)."""
    digraph = graph.to_networkx()
    executed = {a.index for a in graph.executed_agents()}
    probs: Dict[int, float] = {}
    for node in nx.topological_sort(digraph.subgraph(executed)):
        own = profiles[node].cell(context_label).f1_mean
        upstream = max((probs[u] for u in digraph.predecessors(node) if u in probs), default=0.0)
        probs[node] = max(own, copy_factor * upstream)
    return probs


def expected_graph_f1(
    graph: StrategyGraph,
    profiles: Mapping[int, AgentProfile],
    context_label: str,
    copy_factor: float = DEFAULT_COPY_FACTOR,
) -> float:
    """
    Probability that the majority vote returns the gold answer.

    Distractors differ per agent, so the vote is right when two or more
    voters are right, or exactly one is and it has the lowest index.
    """
    probs = effective_probabilities(graph, profiles, context_label, copy_factor)
    voters = [a.index for a in graph.final_inputs()]
    total = 0.0
    for outcome in product((True, False), repeat=len(voters)):
        weight = 1.0
        for voter, correct in zip(voters, outcome):
            weight *= probs[voter] if correct else 1.0 - probs[voter]
        n_correct = sum(outcome)
        if n_correct >= 2 or (n_correct == 1 and outcome[0]):
            total += weight
    return total


def expected_graph_latency(
    graph: StrategyGraph,
    profiles: Mapping[int, AgentProfile],
    context_label: str,
) -> float:
    """Critical path over mean agent latencies."""
    digraph = graph.to_networkx()
    executed = {a.index for a in graph.executed_agents()}
    finish: Dict[int, float] = {}
    for node in nx.topological_sort(digraph.subgraph(executed)):
        start = max((finish[u] for u in digraph.predecessors(node) if u in finish), default=0.0)
        finish[node] = start + profiles[node].cell(context_label).latency_mean_s
    return max((finish[u] for u in digraph.predecessors(FINAL)), default=0.0)


def expected_graph_reward(
    graph: StrategyGraph,
    profiles: Mapping[int, AgentProfile],
    context_label: str,
    reward_cfg: RewardConfig,
    copy_factor: float = DEFAULT_COPY_FACTOR,
) -> float:
    """Reward at the expected F1 and the mean critical-path latency."""
    f1 = expected_graph_f1(graph, profiles, context_label, copy_factor)
    latency = expected_graph_latency(graph, profiles, context_label)
    return reward(min(max(f1, 0.0), 1.0), latency, reward_cfg)


def reference_table(
    action_space: Sequence[StrategyGraph],
    profiles: Mapping[int, AgentProfile],
    schema: Sequence[str],
    reward_cfg: RewardConfig,
    copy_factor: float = DEFAULT_COPY_FACTOR,
) -> pd.DataFrame:
    """Expected F1, latency and reward of every action in every context."""
    rows = []
    for label in schema:
        for graph in action_space:
            rows.append(
                {
                    "context": label,
                    "action_id": graph.action_id,
                    "graph": graph.describe(),
                    "expected_f1": expected_graph_f1(graph, profiles, label, copy_factor),
                    "expected_latency_s": expected_graph_latency(graph, profiles, label),
                    "expected_reward": expected_graph_reward(graph, profiles, label, reward_cfg, copy_factor),
                }
            )
    return pd.DataFrame(rows)


def best_actions(reference: pd.DataFrame) -> Dict[str, Tuple[int, float]]:
    """Best (action_id, expected reward) per context; ties go to the lowest id."""
    best = {}
    for label, group in reference.groupby("context", sort=False):
        ordered = group.sort_values(["expected_reward", "action_id"], ascending=[False, True])
        top = ordered.iloc[0]
        best[label] = (int(top["action_id"]), float(top["expected_reward"]))
    return best


def episodes_frame(episodes: Sequence[EpisodeRecord], action_space: Sequence[StrategyGraph]) -> pd.DataFrame:
    names = {g.action_id: g.describe() for g in action_space}
    return pd.DataFrame(
        {
            "timestep": [e.timestep for e in episodes],
            "epoch": [e.epoch for e in episodes],
            "question_id": [e.question_id for e in episodes],
            "context": [e.context_label for e in episodes],
            "action_id": [e.action_id for e in episodes],
            "graph": [names.get(e.action_id, "") for e in episodes],
            "f1": [e.f1 for e in episodes],
            "latency_s": [e.latency_s for e in episodes],
            "reward": [e.reward for e in episodes],
            "answer": [e.answer for e in episodes],
            "failed_agents": [";".join(e.failed_agents) for e in episodes],
            "ucb_scores": [json.dumps(list(e.ucb_scores)) for e in episodes],
        }
    )


def expected_rewards_frame(
    result: TrainingResult,
    reference: Optional[pd.DataFrame] = None,
) -> pd.DataFrame:
    """
    theta_a^T x for every logged step, action and context prototype.

    Context prototypes are the one-hot vectors, so theta_a^T x is the
    context's coordinate of theta_a. The `reference` column holds the
    simulator's best expected reward for the context (NaN without profiles).
    """
    if not result.theta_history:
        raise ConfigurationError("training result has no theta history")
    steps = np.array([step for step, _ in result.theta_history])
    thetas = np.stack([t for _, t in result.theta_history])  # (S, K, d)
    n_steps, n_actions, d = thetas.shape
    action_ids = np.array(result.model.action_ids)

    frames = []
    best = best_actions(reference) if reference is not None else {}
    for c, label in enumerate(result.schema):
        values = thetas[:, :, c]
        frames.append(
            pd.DataFrame(
                {
                    "step": np.repeat(steps, n_actions),
                    "context": label,
                    "action_id": np.tile(action_ids, n_steps),
                    "expected_reward": values.ravel(),
                    "reference": best[label][1] if label in best else np.nan,
                }
            )
        )
    frame = pd.concat(frames, ignore_index=True)
    return frame.sort_values(["step", "action_id", "context"], kind="stable").reset_index(drop=True)


def selection_distribution_frame(episodes: Sequence[EpisodeRecord], window: int = 100) -> pd.DataFrame:
    """Rolling selection frequency of each action over a context's last `window` episodes."""
    if window < 1:
        raise ConfigurationError(f"window must be >= 1, got {window}")
    frame = pd.DataFrame(
        {
            "timestep": [e.timestep for e in episodes],
            "context": [e.context_label for e in episodes],
            "action_id": [e.action_id for e in episodes],
        }
    )
    frames = []
    for label, group in frame.groupby("context", sort=False):
        indicators = pd.get_dummies(group["action_id"]).astype(float)
        rolling = indicators.rolling(window, min_periods=1).mean()
        rolling.insert(0, "timestep", group["timestep"].to_numpy())
        long = rolling.melt(id_vars="timestep", var_name="action_id", value_name="frequency")
        long.insert(1, "context", label)
        frames.append(long)
    result = pd.concat(frames, ignore_index=True)
    result["action_id"] = result["action_id"].astype(int)
    return result.sort_values(["timestep", "action_id"], kind="stable").reset_index(drop=True)


def last_selections(episodes: Sequence[EpisodeRecord], context_label: str, window: int = 100) -> List[int]:
    """Actions of the last `window` episodes of one context."""
    actions = [e.action_id for e in episodes if e.context_label == context_label]
    return actions[-window:]


def last_step_selections(episodes: Sequence[EpisodeRecord], context_label: str, steps: int = 100) -> List[int]:
    """Actions taken for one context within the last `steps` training steps."""
    return [e.action_id for e in episodes[-steps:] if e.context_label == context_label]


def summarize(
    result: TrainingResult,
    window: int = 100,
    reference: Optional[pd.DataFrame] = None,
) -> Dict[str, Any]:
    """Modal action per context over its last `window` selections, plus regret."""
    graphs = {g.action_id: g for g in result.action_space}
    contexts = {}
    for label in result.schema:
        recent = last_selections(result.episodes, label, window)
        if not recent:
            continue
        action, frequency = modal_value(recent)
        contexts[label] = {
            "modal_action": action,
            "modal_graph": graphs[action].describe(),
            "modal_frequency": frequency,
            "window": len(recent),
            "mean_reward": float(np.mean([e.reward for e in result.episodes if e.context_label == label])),
        }

    summary: Dict[str, Any] = {
        "episodes": len(result.episodes),
        "epochs": result.episodes[-1].epoch + 1,
        "n_actions": len(result.action_space),
        "reward": result.reward_cfg.to_dict(),
        "mean_reward": float(np.mean([e.reward for e in result.episodes])),
        "contexts": contexts,
    }
    if reference is not None:
        summary["cumulative_regret"] = cumulative_regret(result.episodes, reference)[-1]
        summary["best_actions"] = {label: aid for label, (aid, _) in best_actions(reference).items()}
    return summary


def cumulative_regret(episodes: Sequence[EpisodeRecord], reference: pd.DataFrame) -> List[float]:
    """Running sum of expected-reward gaps to the best action of each context."""
    value = {(r.context, int(r.action_id)): float(r.expected_reward) for r in reference.itertuples()}
    best = best_actions(reference)
    gaps = [best[e.context_label][1] - value[(e.context_label, e.action_id)] for e in episodes]
    return np.cumsum(gaps).tolist()


def emit_diagnostics(
    result: TrainingResult,
    path: Path,
    window: int = 100,
    profiles: Optional[Mapping[int, AgentProfile]] = None,
    copy_factor: float = DEFAULT_COPY_FACTOR,
) -> Dict[str, Path]:
    """Write episodes.csv, expected_rewards.csv, selection_dist.csv and summary.json."""
    if not result.episodes:
        raise ConfigurationError("cannot emit diagnostics for an empty episode log")
    out = ensure_dir(Path(path))
    reference = None
    if profiles is not None:
        reference = reference_table(result.action_space, profiles, result.schema, result.reward_cfg, copy_factor)

    written = {
        "episodes": out / EPISODES_FILE,
        "expected_rewards": out / EXPECTED_REWARDS_FILE,
        "selection_dist": out / SELECTION_FILE,
    }
    episodes_frame(result.episodes, result.action_space).to_csv(written["episodes"], index=False)
    expected_rewards_frame(result, reference).to_csv(written["expected_rewards"], index=False)
    selection_distribution_frame(result.episodes, window).to_csv(written["selection_dist"], index=False)
    written["summary"] = write_json(out / SUMMARY_FILE, summarize(result, window, reference))
    logger.info(f"Wrote diagnostics for {len(result.episodes)} episodes to {out}")
    return written


def baseline_history_frame(result: BaselineResult) -> pd.DataFrame:
    return pd.DataFrame(result.history)


def emit_baseline(result: BaselineResult, path: Path) -> Dict[str, Path]:
    """Per-epoch edge probabilities plus the pruned deployment graph."""
    out = ensure_dir(Path(path))
    probs_path = out / EDGE_PROBS_FILE
    baseline_history_frame(result).to_csv(probs_path, index=False)
    graph_path = write_json(
        out / "pruned_graph.json",
        {"graph": result.pruned.to_dict(), "edge_probs": result.policy.as_row()},
    )
    return {"edge_probs": probs_path, "pruned_graph": graph_path}


def action_space_frame(action_space: Sequence[StrategyGraph]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "action_id": [g.action_id for g in action_space],
            "edges": [len(g.edges) for g in action_space],
            "agents": [len(g.executed_agents()) for g in action_space],
            "graph": [g.describe() for g in action_space],
        }
    )


def comparison_frame(document: Dict[str, Any]) -> pd.DataFrame:
    """Flatten comparison.json into one row per (policy, context)."""
    rows = []
    for name, policy_rows in document.get("policies", {}).items():
        for row in policy_rows:
            rows.append({"policy": name, **row})
    return pd.DataFrame(rows)


def load_run(path: Path) -> Dict[str, Any]:
    """Whatever run artifacts exist under `path`, as DataFrames / dicts."""
    path = Path(path)
    run: Dict[str, Any] = {}
    for key, name in (
        ("episodes", EPISODES_FILE),
        ("expected_rewards", EXPECTED_REWARDS_FILE),
        ("selection_dist", SELECTION_FILE),
        ("edge_probs", EDGE_PROBS_FILE),
    ):
        if (path / name).exists():
            run[key] = pd.read_csv(path / name)
    for key, name in (("summary", SUMMARY_FILE), ("comparison", COMPARISON_FILE)):
        if (path / name).exists():
            run[key] = read_json(path / name)
    return run
