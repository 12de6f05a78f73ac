"""
REINFORCE Edge-Policy Baseline
Context-blind optimisation of independent edge-inclusion probabilities over
the same candidate graph, deployed by pruning edges below 0.5.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Optional, Sequence

import networkx as nx
import numpy as np

from src.action_space import (
    FINAL,
    AgentId,
    Edge,
    StrategyGraph,
    build_digraph,
    candidate_edges,
    find_action,
    validate_graph,
)
from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

EPSILON = 1e-3
PRUNE_THRESHOLD = 0.5


@dataclass
class EdgePolicy:
    """Independent Bernoulli inclusion probability per candidate edge."""

    agents: Sequence[AgentId]
    probs: Dict[Edge, float]
    learning_rate: float = 0.05
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 < self.epsilon < 0.5:
            raise ConfigurationError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        self.agents = tuple(self.agents)
        self.probs = {edge: float(np.clip(q, 0.0, 1.0)) for edge, q in sorted(self.probs.items())}

    @classmethod
    def uniform(
        cls,
        agents: Sequence[AgentId],
        initial: float = 0.5,
        learning_rate: float = 0.05,
        forbidden_edges: Optional[Iterable[Edge]] = None,
        epsilon: float = EPSILON,
    ) -> "EdgePolicy":
        edges = candidate_edges(len(agents), forbidden_edges)
        return cls(agents, {e: initial for e in edges}, learning_rate, epsilon)

    @property
    def edges(self) -> List[Edge]:
        return list(self.probs)

    def as_row(self) -> Dict[str, float]:
        """Edge probabilities keyed 'NoR->final' for CSV emission."""
        names = {a.index: a.name for a in self.agents}
        names[FINAL] = "final"
        return {f"{names[u]}->{names[v]}": q for (u, v), q in self.probs.items()}


def _cycle_edge(edges: set, n_agents: int) -> Optional[Edge]:
    graph = build_digraph(n_agents, edges)
    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        return None
    return min((u, v) for u, v in cycle)


def _orphan_edge(edges: set, n_agents: int) -> Optional[Edge]:
    graph = build_digraph(n_agents, edges)
    reaching = nx.ancestors(graph, FINAL)
    orphans = {n for n in range(n_agents) if graph.degree(n) > 0 and n not in reaching}
    offending = sorted(e for e in edges if e[0] in orphans or e[1] in orphans)
    return offending[0] if offending else None


def repair(policy: EdgePolicy, edges: Iterable[Edge]) -> StrategyGraph:
    """
    Make an edge set valid: drop cycle edges in canonical order, force the
    highest-probability agent->final edge when the final node is unfed,
    then drop edges of agents that cannot reach the final node.
    """
    n = len(policy.agents)
    kept = set(edges)

    while (edge := _cycle_edge(kept, n)) is not None:
        kept.discard(edge)

    if not any(v == FINAL for _, v in kept):
        finals = [e for e in policy.edges if e[1] == FINAL]
        if not finals:
            raise ConfigurationError("edge policy has no agent->final edge to force")
        forced = min(finals, key=lambda e: (-policy.probs[e], e))
        kept.add(forced)

    while (edge := _orphan_edge(kept, n)) is not None:
        kept.discard(edge)

    verdict = validate_graph(kept, n)
    if not verdict.valid:
        raise AssertionError(f"repair produced an invalid graph: {verdict.violations}")
    return StrategyGraph(policy.agents, frozenset(kept))


def sample_graph(
    policy: EdgePolicy,
    rng: np.random.Generator,
    action_space: Optional[Sequence[StrategyGraph]] = None,
) -> StrategyGraph:
    """Include each edge independently with its probability, then repair."""
    draws = rng.random(len(policy.probs))
    sampled = [e for e, u in zip(policy.edges, draws) if u < policy.probs[e]]
    graph = repair(policy, sampled)
    return _with_action_id(graph, action_space)


def _with_action_id(graph: StrategyGraph, action_space: Optional[Sequence[StrategyGraph]]) -> StrategyGraph:
    if action_space is None:
        return graph
    match = find_action(action_space, graph)
    return match if match is not None else graph


def reinforce_step(
    policy: EdgePolicy,
    sampled: StrategyGraph,
    reward: float,
    baseline: float,
) -> EdgePolicy:
    """q <- clamp(q + lr * (reward - baseline) * (1[e in sampled] - q), eps, 1 - eps)."""
    advantage = reward - baseline
    if advantage == 0:
        return policy
    lo, hi = policy.epsilon, 1.0 - policy.epsilon
    for edge, q in policy.probs.items():
        indicator = 1.0 if edge in sampled.edges else 0.0
        policy.probs[edge] = min(max(q + policy.learning_rate * advantage * (indicator - q), lo), hi)
    return policy


def prune(policy: EdgePolicy, action_space: Optional[Sequence[StrategyGraph]] = None) -> StrategyGraph:
    """Keep edges with probability >= 0.5 and repair: the deployment graph."""
    kept = [e for e, q in policy.probs.items() if q >= PRUNE_THRESHOLD]
    return _with_action_id(repair(policy, kept), action_space)


@dataclass
class MovingAverageBaseline:
    """Mean of the last `window` rewards; 0 before the first observation."""

    window: int = 50
    _rewards: Deque[float] = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if self.window < 1:
            raise ConfigurationError(f"baseline window must be >= 1, got {self.window}")
        self._rewards = deque(maxlen=self.window)

    @property
    def value(self) -> float:
        return float(np.mean(self._rewards)) if self._rewards else 0.0

    def observe(self, reward: float) -> None:
        self._rewards.append(float(reward))
