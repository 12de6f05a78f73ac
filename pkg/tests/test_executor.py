import numpy as np
import pytest

from src.action_space import AgentId, StrategyGraph, graph_from_names
from src.agents import AgentBackend, AgentResponse
from src.errors import AgentTimeoutError, GraphError
from src.executor import critical_path_latency, execute, majority_vote
from src.utils import seed_sequence

A, B, C = AgentId(0, "a"), AgentId(1, "b"), AgentId(2, "c")


class ScriptedBackend(AgentBackend):
    """Fixed text and latency per agent name; records the calls it receives."""

    def __init__(self, answers, latencies=None, failing=()):
        self.answers = answers
        self.latencies = latencies or {}
        self.failing = set(failing)
        self.calls = []

    def answer(self, agent, question, upstream, *, context_label, gold=None, rng=None):
        self.calls.append((agent.name, [a.name for _, a in upstream]))
        if agent.name in self.failing:
            raise AgentTimeoutError(f"{agent.name} timed out", elapsed_s=2.5)
        return AgentResponse(
            text=self.answers[agent.name],
            latency_s=self.latencies.get(agent.name, 1.0),
            upstream_inputs=tuple((a, r.text) for r, a in upstream),
        )


def test_majority_vote_examples():
    assert majority_vote([(A, "x")]) == "x"
    assert majority_vote([(A, "X "), (B, "x"), (C, "y")]) == "x"
    assert majority_vote([(A, "x"), (B, "y")]) == "x"
    assert majority_vote([(B, "y"), (A, "x")]) == "x"


def test_majority_vote_ignores_failed_voters():
    assert majority_vote([(A, ""), (B, "y")]) == "y"
    assert majority_vote([(A, ""), (B, "")]) == ""
    with pytest.raises(ValueError):
        majority_vote([])


def test_single_node_perfect_simulator(agents, perfect_backend):
    graph = graph_from_names(agents, [("NoR", "final")])
    trace = execute(graph, "q", perfect_backend, "A", gold="paris", seed_sequence=seed_sequence(0, 1))
    assert trace.final_answer == "paris"
    assert trace.total_latency_s == trace.per_node[agents[0]].latency_s
    assert list(trace.per_node) == [agents[0]]


def test_fan_in_majority_and_max_latency(agents):
    backend = ScriptedBackend(
        {"NoR": "x", "OneR": "x", "IRCoT": "y"},
        {"NoR": 0.5, "OneR": 7.0, "IRCoT": 3.0},
    )
    graph = graph_from_names(agents, [("NoR", "final"), ("OneR", "final"), ("IRCoT", "final")])
    trace = execute(graph, "q", backend, "A")
    assert trace.final_answer == "x"
    assert trace.total_latency_s == 7.0


def test_chain_passes_upstream_and_sums_latency(agents):
    backend = ScriptedBackend({"NoR": "guess", "IRCoT": "answer"}, {"NoR": 0.66, "IRCoT": 189.0})
    graph = graph_from_names(agents, [("NoR", "IRCoT"), ("IRCoT", "final")])
    trace = execute(graph, "q", backend, "B")
    assert backend.calls == [("NoR", []), ("IRCoT", ["NoR"])]
    assert trace.per_node[agents[2]].upstream_inputs == ((agents[0], "guess"),)
    assert trace.final_answer == "answer"
    assert trace.total_latency_s == pytest.approx(189.66)


def test_diamond_runs_in_topological_order(agents):
    backend = ScriptedBackend({"NoR": "a", "OneR": "b", "IRCoT": "c"}, {"NoR": 1.0, "OneR": 5.0, "IRCoT": 2.0})
    graph = graph_from_names(agents, [("NoR", "OneR"), ("NoR", "IRCoT"), ("OneR", "final"), ("IRCoT", "final")])
    trace = execute(graph, "q", backend, "C")
    order = [name for name, _ in backend.calls]
    assert order.index("NoR") < order.index("OneR")
    assert order.index("NoR") < order.index("IRCoT")
    assert trace.total_latency_s == pytest.approx(6.0)
    assert trace.final_answer == "b"


def test_idle_agents_are_never_invoked(agents):
    backend = ScriptedBackend({"NoR": "a", "OneR": "b", "IRCoT": "c"})
    execute(graph_from_names(agents, [("OneR", "final")]), "q", backend, "A")
    assert backend.calls == [("OneR", [])]


def test_failed_node_is_recorded_and_outvoted(agents):
    backend = ScriptedBackend({"NoR": "a", "OneR": "b", "IRCoT": "c"}, failing={"NoR"})
    graph = graph_from_names(agents, [("NoR", "final"), ("IRCoT", "final")])
    trace = execute(graph, "q", backend, "A")
    assert trace.failed_agents == [agents[0]]
    assert trace.per_node[agents[0]].latency_s == 2.5
    assert trace.final_answer == "c"


def test_all_voters_failing_gives_empty_answer(agents):
    backend = ScriptedBackend({"NoR": "a"}, failing={"NoR"})
    trace = execute(graph_from_names(agents, [("NoR", "final")]), "q", backend, "A")
    assert trace.final_answer == ""
    assert trace.total_latency_s == 2.5


def test_graph_without_final_edge_rejected(agents):
    with pytest.raises(GraphError):
        execute(StrategyGraph(tuple(agents), frozenset({(0, 1)})), "q", ScriptedBackend({}), "A")


def test_agent_draws_do_not_depend_on_the_graph(agents, table_backend):
    stream = seed_sequence(0, 0, 3, 17)
    alone = execute(graph_from_names(agents, [("NoR", "final")]), "q", table_backend, "B", gold="g", seed_sequence=stream)
    together = execute(
        graph_from_names(agents, [("NoR", "final"), ("OneR", "final")]),
        "q",
        table_backend,
        "B",
        gold="g",
        seed_sequence=stream,
    )
    assert alone.per_node[agents[0]] == together.per_node[agents[0]]


def test_execution_is_reproducible(agents, table_backend, collaborative_space):
    graph = collaborative_space[-1]
    first = execute(graph, "q", table_backend, "C", gold="g", seed_sequence=seed_sequence(4, 0, 0, 1))
    second = execute(graph, "q", table_backend, "C", gold="g", seed_sequence=seed_sequence(4, 0, 0, 1))
    assert first == second


def test_parallel_levels_match_sequential(agents, table_backend):
    graph = graph_from_names(agents, [("NoR", "final"), ("OneR", "final"), ("IRCoT", "final")])
    stream = seed_sequence(1, 2)
    sequential = execute(graph, "q", table_backend, "A", gold="g", seed_sequence=stream)
    table_backend.concurrent = True
    parallel = execute(graph, "q", table_backend, "A", gold="g", seed_sequence=stream, max_workers=3)
    assert sequential == parallel


def test_critical_path_latency(agents):
    graph = graph_from_names(agents, [("NoR", "IRCoT"), ("IRCoT", "final"), ("OneR", "final")])
    assert critical_path_latency(graph, {0: 1.0, 1: 8.0, 2: 5.0}) == 8.0
    assert critical_path_latency(graph, {0: 4.0, 1: 8.0, 2: 5.0}) == 9.0
