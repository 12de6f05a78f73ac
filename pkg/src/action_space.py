"""
Action Space Module
Enumerates every valid strategy graph over an agent set: directed acyclic
graphs feeding a final majority-vote node, deduplicated by execution pattern.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from src.errors import GraphError

logger = logging.getLogger(__name__)

FINAL = -1
FINAL_NAME = "final"

Edge = Tuple[int, int]
CanonicalKey = Tuple[Edge, ...]

CYCLE = "cycle"
FINAL_DEGREE = "final-degree"
ORPHAN_ISLAND = "orphan-island"


@dataclass(frozen=True, order=True)
class AgentId:
    """An agent slot; indices are contiguous from 0 within a run."""

    index: int
    name: str = field(compare=False)

    def __str__(self) -> str:
        return self.name


def make_agents(names: Sequence[str]) -> List[AgentId]:
    if not names:
        raise GraphError("agent list must not be empty")
    if len(set(names)) != len(names):
        raise GraphError(f"agent names must be unique: {list(names)}")
    return [AgentId(i, name) for i, name in enumerate(names)]


@dataclass(frozen=True)
class GraphVerdict:
    valid: bool
    violations: Tuple[str, ...] = ()


@dataclass(frozen=True)
class StrategyGraph:
    """One action: agent nodes, directed edges into/among them and v_final."""

    agents: Tuple[AgentId, ...]
    edges: FrozenSet[Edge]
    action_id: int = -1

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "edges", frozenset((int(u), int(v)) for u, v in self.edges))

    @property
    def key(self) -> CanonicalKey:
        return canonical_form(self)

    def agent(self, index: int) -> AgentId:
        return self.agents[index]

    def to_networkx(self) -> nx.DiGraph:
        return build_digraph(len(self.agents), self.edges)

    def final_inputs(self) -> List[AgentId]:
        """In-neighbors of v_final, in agent index order."""
        return [self.agents[u] for u, v in sorted(self.edges) if v == FINAL]

    def executed_agents(self) -> List[AgentId]:
        """Agents with a directed path to v_final."""
        graph = self.to_networkx()
        reaching = nx.ancestors(graph, FINAL)
        return [a for a in self.agents if a.index in reaching]

    def predecessors(self, agent: AgentId) -> List[AgentId]:
        return [self.agents[u] for u, v in sorted(self.edges) if v == agent.index]

    def edge_names(self) -> List[List[str]]:
        return [[self._node_name(u), self._node_name(v)] for u, v in canonical_form(self)]

    def describe(self) -> str:
        return ", ".join(f"{u}->{v}" for u, v in self.edge_names())

    def to_dict(self) -> Dict[str, object]:
        return {"action_id": self.action_id, "edges": self.edge_names()}

    def _node_name(self, node: int) -> str:
        return FINAL_NAME if node == FINAL else self.agents[node].name


def describe_graph(graph: StrategyGraph) -> str:
    """Render a graph as 'NoR->IRCoT, IRCoT->final'."""
    return graph.describe()


def build_digraph(n_agents: int, edges: Iterable[Edge]) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n_agents))
    graph.add_node(FINAL)
    graph.add_edges_from(edges)
    return graph


def candidate_edges(
    n_agents: int,
    forbidden_edges: Optional[Iterable[Edge]] = None,
) -> List[Edge]:
    """
    All agent->agent pairs (no self-loops) plus every agent->v_final edge,
    minus forbidden pairs, in canonical order. Nothing leaves v_final.
    """
    forbidden = set(forbidden_edges or ())
    edges = [(u, v) for u in range(n_agents) for v in range(n_agents) if u != v]
    edges += [(u, FINAL) for u in range(n_agents)]
    return sorted(e for e in edges if e not in forbidden)


def validate_graph(edges: Iterable[Edge], n_agents: int) -> GraphVerdict:
    """
    Check the three structural constraints on a candidate edge set.

    Violations are reported as 'cycle', 'final-degree' and 'orphan-island'.
    """
    edges = set(edges)
    for u, v in edges:
        if not (u == FINAL or 0 <= u < n_agents) or not (v == FINAL or 0 <= v < n_agents):
            raise GraphError(f"edge {(u, v)} references a node outside the agent set")
    graph = build_digraph(n_agents, edges)
    violations: List[str] = []

    if any(u == v for u, v in edges) or not nx.is_directed_acyclic_graph(graph):
        violations.append(CYCLE)

    if graph.in_degree(FINAL) < 1 or graph.out_degree(FINAL) > 0:
        violations.append(FINAL_DEGREE)

    reaching = nx.ancestors(graph, FINAL) if graph.in_degree(FINAL) else set()
    if any(graph.degree(node) > 0 and node not in reaching for node in range(n_agents)):
        violations.append(ORPHAN_ISLAND)

    return GraphVerdict(valid=not violations, violations=tuple(violations))


def canonical_form(graph: StrategyGraph) -> CanonicalKey:
    """
    Sorted edge list of the executed sub-DAG: nodes without a path to
    v_final are removed, so graphs differing only in idle agents coincide.
    """
    digraph = graph.to_networkx()
    reaching = nx.ancestors(digraph, FINAL) if FINAL in digraph else set()
    kept = reaching | {FINAL}
    return tuple(sorted((u, v) for u, v in graph.edges if u in kept and v in kept))


def _ordering_key(key: CanonicalKey) -> Tuple[int, CanonicalKey]:
    return (len(key), key)


Constraint = Callable[[StrategyGraph], bool]


def enumerate_action_space(
    agents: Sequence[AgentId],
    max_edges: Optional[int] = None,
    extra_constraints: Optional[Iterable[Constraint]] = None,
    forbidden_edges: Optional[Iterable[Edge]] = None,
    max_agents: Optional[int] = None,
) -> List[StrategyGraph]:
    """
    Every valid, execution-distinct strategy graph in canonical order
    (edge count, then lexicographic sorted edge list). Action ids are the
    positions in that order.
    """
    agents = tuple(agents)
    if not agents:
        raise GraphError("agent list must not be empty")
    if [a.index for a in agents] != list(range(len(agents))):
        raise GraphError("agent indices must be contiguous from 0")
    if max_edges is not None and max_edges < 1:
        raise GraphError(f"max_edges must be positive, got {max_edges}")

    n = len(agents)
    candidates = candidate_edges(n, forbidden_edges)
    limit = len(candidates) if max_edges is None else min(max_edges, len(candidates))
    constraints = list(extra_constraints or ())

    seen: Set[CanonicalKey] = set()
    graphs: List[StrategyGraph] = []
    for size in range(1, limit + 1):
        for subset in combinations(candidates, size):
            if not validate_graph(subset, n).valid:
                continue
            graph = StrategyGraph(agents, frozenset(subset))
            if max_agents is not None and len(graph.executed_agents()) > max_agents:
                continue
            if not all(check(graph) for check in constraints):
                continue
            key = canonical_form(graph)
            if key in seen:
                continue
            seen.add(key)
            graphs.append(graph)

    graphs.sort(key=lambda g: _ordering_key(canonical_form(g)))
    result = [StrategyGraph(agents, g.edges, action_id=i) for i, g in enumerate(graphs)]
    logger.info(f"Enumerated {len(result)} strategy graphs over {n} agents (max_edges={max_edges})")
    return result


def individual_action_space(agents: Sequence[AgentId]) -> List[StrategyGraph]:
    """One single-edge graph per agent: agent -> v_final."""
    return enumerate_action_space(agents, max_edges=1)


def find_action(action_space: Sequence[StrategyGraph], graph: StrategyGraph) -> Optional[StrategyGraph]:
    """The enumerated action with the same execution pattern, if any."""
    key = canonical_form(graph)
    for candidate in action_space:
        if canonical_form(candidate) == key:
            return candidate
    return None


def graph_from_names(agents: Sequence[AgentId], pairs: Iterable[Sequence[str]], action_id: int = -1) -> StrategyGraph:
    """Build a graph from [["NoR", "final"], ...] style name pairs."""
    lookup = {a.name: a.index for a in agents}
    lookup[FINAL_NAME] = FINAL
    try:
        edges = frozenset((lookup[u], lookup[v]) for u, v in pairs)
    except KeyError as e:
        raise GraphError(f"unknown node name {e.args[0]!r}")
    return StrategyGraph(tuple(agents), edges, action_id)
