"""
Graph Executor Module
Runs one strategy graph for one question: agents in topological order with
upstream message passing, then a majority vote at the final node.
"""

import re
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from src.action_space import FINAL, AgentId, StrategyGraph
from src.agents import AgentBackend, AgentResponse, failed_response
from src.errors import AgentError, GraphError
from src.utils import child_sequence

logger = logging.getLogger(__name__)

_WHITESPACE = re.compile(r'\s+')


@dataclass(frozen=True)
class ExecutionTrace:
    per_node: Dict[AgentId, AgentResponse]
    final_answer: str
    total_latency_s: float

    @property
    def failed_agents(self) -> List[AgentId]:
        return [a for a, r in self.per_node.items() if r.failed]


def normalize_answer(text: str) -> str:
    """Lowercase and collapse whitespace."""
    return _WHITESPACE.sub(' ', text.lower()).strip()


def majority_vote(answers: Sequence[Tuple[AgentId, str]]) -> str:
    """
    Most frequent normalized answer. Ties go to the answer of the
    lowest-index agent among the tied ones; empty answers (failed nodes)
    only win when every voter failed.
    """
    if not answers:
        raise ValueError("majority_vote needs at least one answer")

    votes: Dict[str, List[int]] = {}
    for agent, text in answers:
        normalized = normalize_answer(text)
        if normalized:
            votes.setdefault(normalized, []).append(agent.index)
    if not votes:
        return ""
    return min(votes, key=lambda answer: (-len(votes[answer]), min(votes[answer])))


def critical_path_latency(graph: StrategyGraph, latencies: Dict[int, float]) -> float:
    """Longest dependency chain by latency over the executed nodes."""
    finish: Dict[int, float] = {}
    digraph = graph.to_networkx().subgraph(list(latencies) + [FINAL])
    for node in nx.topological_sort(digraph):
        if node == FINAL:
            continue
        start = max((finish[u] for u in digraph.predecessors(node)), default=0.0)
        finish[node] = start + latencies[node]
    return max((finish[u] for u in digraph.predecessors(FINAL)), default=0.0)


def _execution_levels(graph: StrategyGraph, executed: Sequence[AgentId]) -> List[List[AgentId]]:
    """Topological generations of the executed agents, each sorted by index."""
    indices = {a.index for a in executed}
    digraph = graph.to_networkx().subgraph(indices)
    return [
        sorted((graph.agent(i) for i in level), key=lambda a: a.index)
        for level in nx.topological_generations(digraph)
    ]


def _agent_rng(seed_sequence: Optional[np.random.SeedSequence], agent: AgentId) -> Optional[np.random.Generator]:
    if seed_sequence is None:
        return None
    return np.random.default_rng(child_sequence(seed_sequence, agent.index))


def execute(
    graph: StrategyGraph,
    question: str,
    backend: AgentBackend,
    context_label: str,
    gold: Optional[str] = None,
    seed_sequence: Optional[np.random.SeedSequence] = None,
    max_workers: int = 1,
) -> ExecutionTrace:
    """
    Execute a strategy graph.

    Each agent gets the question plus its in-neighbors' responses; agents
    without a path to v_final are never invoked. Agent streams are derived
    from `seed_sequence` by agent index, so an agent's draws for a question
    do not depend on which graph runs it.
    """
    if not graph.final_inputs():
        raise GraphError(f"graph {graph.describe() or '{}'} has no edge into the final node")

    executed = graph.executed_agents()
    responses: Dict[AgentId, AgentResponse] = {}

    def run(agent: AgentId) -> AgentResponse:
        upstream = [(responses[p], p) for p in graph.predecessors(agent) if p in responses]
        try:
            return backend.answer(
                agent,
                question,
                upstream,
                context_label=context_label,
                gold=gold,
                rng=_agent_rng(seed_sequence, agent),
            )
        except AgentError as e:
            logger.warning(f"Agent {agent.name} failed: {e}")
            return failed_response(e, upstream)

    parallel = max_workers > 1 and backend.concurrent
    for level in _execution_levels(graph, executed):
        if parallel and len(level) > 1:
            with ThreadPoolExecutor(max_workers=min(max_workers, len(level))) as pool:
                for agent, response in zip(level, pool.map(run, level)):
                    responses[agent] = response
        else:
            for agent in level:
                responses[agent] = run(agent)

    final_answer = majority_vote([(a, responses[a].text) for a in graph.final_inputs()])
    total = critical_path_latency(graph, {a.index: r.latency_s for a, r in responses.items()})
    per_node = {a: responses[a] for a in sorted(responses, key=lambda a: a.index)}
    return ExecutionTrace(per_node=per_node, final_answer=final_answer, total_latency_s=total)
