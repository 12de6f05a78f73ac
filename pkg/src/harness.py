"""
Experiment Harness Module
Dataset ingestion, the LinUCB training loop, greedy evaluation, the REINFORCE
baseline loop and the AQA-vs-baseline comparison.
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.action_space import (
    AgentId,
    StrategyGraph,
    canonical_form,
    enumerate_action_space,
    make_agents,
)
from src.agents import (
    AgentBackend,
    RemoteBackend,
    SimulatedBackend,
    default_profiles,
    load_profiles,
)
from src.config import ExperimentConfig
from src.errors import ConfigurationError, DatasetError, GraphError
from src.executor import execute
from src.linucb import BanditModel, init_model
from src.reinforce_baseline import (
    EdgePolicy,
    MovingAverageBaseline,
    prune,
    reinforce_step,
    sample_graph,
)
from src.reward_metrics import RewardConfig, best_f1, reward
from src.utils import (
    PHASE_BASELINE,
    PHASE_EVAL,
    PHASE_SHUFFLE,
    PHASE_TRAIN,
    make_rng,
    modal_value,
    seed_sequence,
    write_json,
)

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "question", "gold_answers", "complexity_label")


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    question: str
    gold_answers: Tuple[str, ...]
    complexity_label: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "gold_answers": list(self.gold_answers),
            "complexity_label": self.complexity_label,
        }


@dataclass(frozen=True)
class EpisodeRecord:
    """One timestep of the training loop."""

    timestep: int
    epoch: int
    question_id: str
    context_label: str
    context: Tuple[float, ...]
    action_id: int
    f1: float
    latency_s: float
    reward: float
    ucb_scores: Tuple[float, ...]
    answer: str = ""
    failed_agents: Tuple[str, ...] = ()


@dataclass
class TrainingResult:
    model: BanditModel
    episodes: List[EpisodeRecord]
    action_space: List[StrategyGraph]
    reward_cfg: RewardConfig
    schema: Tuple[str, ...]
    # (timestep, thetas of shape (n_actions, d)) every `history_stride` steps
    theta_history: List[Tuple[int, np.ndarray]] = field(default_factory=list)


@dataclass
class EvaluationReport:
    """Per-context and overall (macro over questions) F1 / latency."""

    name: str
    rows: List[Dict[str, Any]]
    selections: List[Dict[str, Any]]

    @property
    def overall(self) -> Dict[str, Any]:
        return self.rows[-1]

    def row(self, context_label: str) -> Dict[str, Any]:
        for row in self.rows:
            if row["context"] == context_label:
                return row
        raise KeyError(context_label)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "rows": self.rows, "selections": self.selections}


@dataclass
class BaselineResult:
    policy: EdgePolicy
    pruned: StrategyGraph
    # one row per epoch: epoch, mean_reward and each edge probability
    history: List[Dict[str, float]]
    rewards: List[float]


def _parse_record(payload: Any, line_number: int) -> QuestionRecord:
    if not isinstance(payload, dict):
        raise DatasetError("record must be a JSON object", line=line_number)
    for name in REQUIRED_FIELDS:
        if name not in payload:
            raise DatasetError(f"missing field '{name}'", line=line_number, field=name)
    golds = payload["gold_answers"]
    if isinstance(golds, str):
        golds = [golds]
    if not isinstance(golds, list) or not golds or not all(isinstance(g, str) for g in golds):
        raise DatasetError(
            "gold_answers must be a non-empty list of strings", line=line_number, field="gold_answers"
        )
    if not isinstance(payload["question"], str):
        raise DatasetError("question must be a string", line=line_number, field="question")
    return QuestionRecord(
        id=str(payload["id"]),
        question=payload["question"],
        gold_answers=tuple(golds),
        complexity_label=str(payload["complexity_label"]),
    )


def load_dataset(path: Union[str, Path], schema: Optional[Sequence[str]] = None) -> List[QuestionRecord]:
    """
    Read a JSONL file with one QuestionRecord per line.

    Blank lines are skipped. An unbalanced label distribution is logged as a
    warning, not an error.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file {path} does not exist")

    records: List[QuestionRecord] = []
    seen_ids: Dict[str, int] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"invalid JSON: {e.msg}", line=line_number)
            record = _parse_record(payload, line_number)
            if record.id in seen_ids:
                raise DatasetError(
                    f"duplicate id {record.id!r} (first seen on line {seen_ids[record.id]})",
                    line=line_number,
                    field="id",
                )
            seen_ids[record.id] = line_number
            if schema is not None and record.complexity_label not in schema:
                raise DatasetError(
                    f"label {record.complexity_label!r} is not in the schema {list(schema)}",
                    line=line_number,
                    field="complexity_label",
                )
            records.append(record)

    if not records:
        raise DatasetError(f"dataset file {path} contains no records")

    counts = label_distribution(records, schema)
    logger.info(f"Loaded {len(records)} questions from {path}: {counts}")
    if len(set(counts.values())) > 1:
        logger.warning(f"Complexity labels in {path} are not equally distributed: {counts}")
    return records


def label_distribution(records: Sequence[QuestionRecord], schema: Optional[Sequence[str]] = None) -> Dict[str, int]:
    counts = Counter(r.complexity_label for r in records)
    labels = list(schema) if schema is not None else sorted(counts)
    return {label: counts.get(label, 0) for label in labels}


def encode_context(q: QuestionRecord, schema: Sequence[str]) -> np.ndarray:
    """One-hot encoding of the complexity label over the schema."""
    try:
        position = list(schema).index(q.complexity_label)
    except ValueError:
        raise DatasetError(
            f"label {q.complexity_label!r} of question {q.id} is not in the schema {list(schema)}",
            field="complexity_label",
        )
    x = np.zeros(len(schema))
    x[position] = 1.0
    return x


def synthetic_dataset(
    size: int,
    schema: Sequence[str],
    seed: int = 0,
    prefix: str = "q",
) -> List[QuestionRecord]:
    """Balanced synthetic questions (labels round-robin, then shuffled)."""
    if size < 1:
        raise ConfigurationError(f"dataset size must be >= 1, got {size}")
    rng = make_rng(seed, PHASE_SHUFFLE, sum(map(ord, prefix)))
    labels = [schema[i % len(schema)] for i in range(size)]
    order = rng.permutation(size)
    records = []
    for position, i in enumerate(order):
        label = labels[i]
        records.append(
            QuestionRecord(
                id=f"{prefix}{position:04d}",
                question=f"Synthetic question {position} of complexity {label}",
                gold_answers=(f"answer {prefix} {position}",),
                complexity_label=label,
            )
        )
    return records


def write_dataset(path: Union[str, Path], records: Sequence[QuestionRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    logger.info(f"Wrote {len(records)} questions to {path}")
    return path


def build_agents(config: ExperimentConfig) -> List[AgentId]:
    return make_agents(config.agents)


def build_action_space(config: ExperimentConfig, agents: Sequence[AgentId]) -> List[StrategyGraph]:
    lookup = {a.name: a.index for a in agents}
    try:
        forbidden = [(lookup[u], lookup[v]) for u, v in config.action_space.forbidden_edges]
    except KeyError as e:
        raise ConfigurationError(f"forbidden edge names unknown agent {e.args[0]!r}")
    return enumerate_action_space(
        agents,
        max_edges=config.action_space.effective_max_edges,
        forbidden_edges=forbidden,
        max_agents=config.action_space.max_agents,
    )


def build_backend(config: ExperimentConfig, agents: Sequence[AgentId]) -> AgentBackend:
    section = config.backend
    if section.kind == "remote":
        missing = [a.name for a in agents if a.name not in section.endpoints]
        if missing:
            raise ConfigurationError(f"no remote endpoint for agents {missing}")
        return RemoteBackend(section.endpoints, section.timeout_s)
    if section.profile_path:
        profiles = load_profiles(Path(section.profile_path), agents)
    else:
        profiles = default_profiles(agents, latency_cv=section.latency_cv)
    for profile in profiles.values():
        if not profile.covers(config.schema):
            raise ConfigurationError(f"profile of {profile.agent.name} does not cover schema {list(config.schema)}")
    return SimulatedBackend(profiles, copy_factor=section.copy_factor)


def load_splits(config: ExperimentConfig) -> Tuple[List[QuestionRecord], List[QuestionRecord]]:
    """Train/test splits from the configured files, or balanced synthetic ones."""
    seed = config.train.seed
    data = config.data
    if data.train_path:
        train_set = load_dataset(data.train_path, config.schema)
    else:
        train_set = synthetic_dataset(data.train_size, config.schema, seed, prefix="train")
    if data.test_path:
        test_set = load_dataset(data.test_path, config.schema)
    else:
        test_set = synthetic_dataset(data.test_size, config.schema, seed, prefix="test")
    return train_set, test_set


def _run_episode(
    graph: StrategyGraph,
    record: QuestionRecord,
    backend: AgentBackend,
    stream: np.random.SeedSequence,
    max_workers: int,
):
    trace = execute(
        graph,
        record.question,
        backend,
        record.complexity_label,
        gold=record.gold_answers[0],
        seed_sequence=stream,
        max_workers=max_workers,
    )
    f1 = best_f1(trace.final_answer, record.gold_answers)
    return trace, f1


def train(
    dataset: Sequence[QuestionRecord],
    action_space: Sequence[StrategyGraph],
    model: BanditModel,
    backend: AgentBackend,
    reward_cfg: RewardConfig,
    epochs: int,
    seed: int = 0,
    schema: Sequence[str] = ("A", "B", "C"),
    history_stride: int = 1,
    max_workers: int = 1,
) -> TrainingResult:
    """
    Run epochs x |dataset| timesteps of select / execute / reward / update.

    The dataset is reshuffled every epoch from the seed; the episode at
    (epoch, position) always draws agent randomness from the same stream.
    """
    if not action_space:
        raise ConfigurationError("action space must not be empty")
    if not dataset:
        raise DatasetError("training set must not be empty")
    if epochs < 1:
        raise ConfigurationError(f"epochs must be >= 1, got {epochs}")
    graphs = {g.action_id: g for g in action_space}
    if set(graphs) != set(model.action_ids):
        raise ConfigurationError("model actions do not match the action space")

    schema = tuple(schema)
    contexts = [encode_context(q, schema) for q in dataset]
    result = TrainingResult(model, [], list(action_space), reward_cfg, schema)
    timestep = 0

    for epoch in range(epochs):
        order = make_rng(seed, PHASE_SHUFFLE, epoch).permutation(len(dataset))
        epoch_rewards = []
        for position, index in enumerate(order):
            record = dataset[int(index)]
            x = contexts[int(index)]
            scores = model.ucb_scores(x)
            action = model.action_ids[int(np.argmax(scores))]

            trace, f1 = _run_episode(
                graphs[action], record, backend, seed_sequence(seed, PHASE_TRAIN, epoch, position), max_workers
            )
            r = reward(f1, trace.total_latency_s, reward_cfg)
            model.update(action, x, r)

            result.episodes.append(
                EpisodeRecord(
                    timestep=timestep,
                    epoch=epoch,
                    question_id=record.id,
                    context_label=record.complexity_label,
                    context=tuple(float(v) for v in x),
                    action_id=action,
                    f1=f1,
                    latency_s=trace.total_latency_s,
                    reward=r,
                    ucb_scores=tuple(float(s) for s in scores),
                    answer=trace.final_answer,
                    failed_agents=tuple(a.name for a in trace.failed_agents),
                )
            )
            if timestep % history_stride == 0:
                result.theta_history.append((timestep, model.thetas().copy()))
            epoch_rewards.append(r)
            timestep += 1

        logger.info(
            f"Epoch {epoch + 1}/{epochs}: mean reward {np.mean(epoch_rewards):.4f}, "
            f"modal actions {_modal_actions(result.episodes[-len(dataset):], schema)}"
        )
    return result


def _modal_actions(episodes: Sequence[EpisodeRecord], schema: Sequence[str]) -> Dict[str, int]:
    modal = {}
    for label in schema:
        actions = [e.action_id for e in episodes if e.context_label == label]
        if actions:
            modal[label] = modal_value(actions)[0]
    return modal


def evaluate(
    dataset: Sequence[QuestionRecord],
    policy: Union[BanditModel, StrategyGraph],
    backend: AgentBackend,
    reward_cfg: RewardConfig,
    action_space: Optional[Sequence[StrategyGraph]] = None,
    schema: Sequence[str] = ("A", "B", "C"),
    seed: int = 0,
    repeats: int = 1,
    name: str = "policy",
    max_workers: int = 1,
) -> EvaluationReport:
    """
    Greedy evaluation of a trained model (alpha = 0) or a fixed graph.

    Each question runs `repeats` times on independent streams; repeats are
    averaged per question before the macro average over questions.
    """
    if not dataset:
        raise DatasetError("evaluation set must not be empty")
    if repeats < 1:
        raise ConfigurationError(f"repeats must be >= 1, got {repeats}")
    schema = tuple(schema)

    if isinstance(policy, BanditModel):
        if action_space is None:
            raise ConfigurationError("evaluating a model needs its action space")
        graphs = {g.action_id: g for g in action_space}
    elif not isinstance(policy, StrategyGraph):
        raise ConfigurationError(f"cannot evaluate policy of type {type(policy).__name__}")

    selections = []
    for position, record in enumerate(dataset):
        if isinstance(policy, BanditModel):
            x = encode_context(record, schema)
            graph = graphs[policy.select_action(x, alpha=0.0)]
        else:
            encode_context(record, schema)
            graph = policy

        f1s, latencies, rewards = [], [], []
        for repeat in range(repeats):
            trace, f1 = _run_episode(
                graph, record, backend, seed_sequence(seed, PHASE_EVAL, repeat, position), max_workers
            )
            f1s.append(f1)
            latencies.append(trace.total_latency_s)
            rewards.append(reward(f1, trace.total_latency_s, reward_cfg))
        selections.append(
            {
                "question_id": record.id,
                "context": record.complexity_label,
                "action_id": graph.action_id,
                "graph": graph.describe(),
                "f1": float(np.mean(f1s)),
                "latency_s": float(np.mean(latencies)),
                "reward": float(np.mean(rewards)),
            }
        )

    rows = []
    for label in schema:
        subset = [s for s in selections if s["context"] == label]
        if subset:
            rows.append(_aggregate(label, subset))
    rows.append(_aggregate("overall", selections))
    report = EvaluationReport(name=name, rows=rows, selections=selections)
    logger.info(
        f"Evaluated {name} on {len(dataset)} questions x {repeats}: "
        f"F1 {report.overall['f1']:.3f}, latency {report.overall['latency_s']:.2f}s"
    )
    return report


def _aggregate(label: str, selections: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    return {
        "context": label,
        "n": len(selections),
        "f1": float(np.mean([s["f1"] for s in selections])),
        "latency_s": float(np.mean([s["latency_s"] for s in selections])),
        "reward": float(np.mean([s["reward"] for s in selections])),
    }


def train_baseline(
    dataset: Sequence[QuestionRecord],
    policy: EdgePolicy,
    backend: AgentBackend,
    reward_cfg: RewardConfig,
    epochs: int,
    seed: int = 0,
    baseline_window: int = 50,
    action_space: Optional[Sequence[StrategyGraph]] = None,
    max_workers: int = 1,
) -> BaselineResult:
    """
    Context-blind REINFORCE over edge-inclusion probabilities.

    One epoch is one shuffled pass over the dataset with one sampled graph
    per question. The policy is updated in place.
    """
    if not dataset:
        raise DatasetError("training set must not be empty")
    if epochs < 1:
        raise ConfigurationError(f"epochs must be >= 1, got {epochs}")

    known = {canonical_form(g): g for g in action_space} if action_space is not None else {}
    running = MovingAverageBaseline(window=baseline_window)
    history: List[Dict[str, float]] = []
    rewards: List[float] = []

    for epoch in range(epochs):
        rng = make_rng(seed, PHASE_BASELINE, epoch)
        order = rng.permutation(len(dataset))
        epoch_rewards = []
        for position, index in enumerate(order):
            record = dataset[int(index)]
            graph = sample_graph(policy, rng)
            graph = known.get(canonical_form(graph), graph)
            trace, f1 = _run_episode(
                graph, record, backend, seed_sequence(seed, PHASE_BASELINE, epoch, position), max_workers
            )
            r = reward(f1, trace.total_latency_s, reward_cfg)
            reinforce_step(policy, graph, r, running.value)
            running.observe(r)
            epoch_rewards.append(r)
            rewards.append(r)

        row = {"epoch": epoch, "mean_reward": float(np.mean(epoch_rewards))}
        row.update(policy.as_row())
        history.append(row)
        logger.info(f"Baseline epoch {epoch + 1}/{epochs}: mean reward {row['mean_reward']:.4f}")

    pruned = prune(policy)
    pruned = known.get(canonical_form(pruned), pruned)
    logger.info(f"Pruned baseline graph: {pruned.describe()}")
    return BaselineResult(policy=policy, pruned=pruned, history=history, rewards=rewards)


def train_from_config(
    config: ExperimentConfig,
    train_set: Sequence[QuestionRecord],
    reward_cfg: Optional[RewardConfig] = None,
    backend: Optional[AgentBackend] = None,
) -> TrainingResult:
    """Enumerate the configured action space and train a fresh model on it."""
    agents = build_agents(config)
    action_space = build_action_space(config, agents)
    backend = backend or build_backend(config, agents)
    model = init_model([g.action_id for g in action_space], config.dimension, config.bandit.alpha)
    return train(
        train_set,
        action_space,
        model,
        backend,
        reward_cfg or config.reward.build(),
        config.train.epochs,
        seed=config.train.seed,
        schema=config.schema,
        history_stride=config.output.diagnostics_stride,
        max_workers=config.backend.max_workers,
    )


def baseline_from_config(
    config: ExperimentConfig,
    train_set: Sequence[QuestionRecord],
    reward_cfg: Optional[RewardConfig] = None,
    backend: Optional[AgentBackend] = None,
) -> BaselineResult:
    agents = build_agents(config)
    backend = backend or build_backend(config, agents)
    section = config.baseline
    lookup = {a.name: a.index for a in agents}
    forbidden = [(lookup[u], lookup[v]) for u, v in config.action_space.forbidden_edges]
    policy = EdgePolicy.uniform(
        agents,
        learning_rate=section.learning_rate,
        forbidden_edges=forbidden,
        epsilon=section.epsilon,
    )
    try:
        known = enumerate_action_space(agents, forbidden_edges=forbidden)
    except GraphError:
        known = None
    return train_baseline(
        train_set,
        policy,
        backend,
        reward_cfg or RewardConfig.time_agnostic(),
        section.epochs,
        seed=config.train.seed,
        baseline_window=section.baseline_window,
        action_space=known,
        max_workers=config.backend.max_workers,
    )


def compare(
    config: ExperimentConfig,
    train_set: Sequence[QuestionRecord],
    test_set: Sequence[QuestionRecord],
    output_dir: Optional[Path] = None,
) -> Dict[str, Any]:
    """
    Train AQA time-agnostic, AQA time-based and the REINFORCE baseline, then
    evaluate all three on the test split with common random streams.
    """
    agents = build_agents(config)
    backend = build_backend(config, agents)
    seed = config.train.seed
    repeats = config.evaluation.repeats
    time_based = config.reward.build()
    agnostic = RewardConfig.time_agnostic()

    reports = []
    for name, cfg in (("aqa_time_agnostic", agnostic), ("aqa_time_based", time_based)):
        trained = train_from_config(config, train_set, reward_cfg=cfg, backend=backend)
        reports.append(
            evaluate(
                test_set,
                trained.model,
                backend,
                cfg,
                action_space=trained.action_space,
                schema=config.schema,
                seed=seed,
                repeats=repeats,
                name=name,
                max_workers=config.backend.max_workers,
            )
        )

    baseline = baseline_from_config(config, train_set, backend=backend)
    reports.append(
        evaluate(
            test_set,
            baseline.pruned,
            backend,
            agnostic,
            schema=config.schema,
            seed=seed,
            repeats=repeats,
            name="reinforce_pruned",
            max_workers=config.backend.max_workers,
        )
    )

    document = {
        "seed": seed,
        "repeats": repeats,
        "schema": list(config.schema),
        "baseline_graph": baseline.pruned.to_dict(),
        "baseline_edge_probs": baseline.policy.as_row(),
        "policies": {report.name: report.rows for report in reports},
    }
    if output_dir is not None:
        write_json(Path(output_dir) / "comparison.json", document)
    return document
