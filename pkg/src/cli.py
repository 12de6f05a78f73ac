"""
Command-line entry point for the adaptive QA orchestration harness.

    python -m src.cli train --config configs/individual.yaml --seed 0
"""

import sys
import json
import logging
import functools
import subprocess
from pathlib import Path
from typing import List, Optional, Tuple

import click

from src.action_space import enumerate_action_space, graph_from_names, validate_graph
from src.agents import SimulatedBackend
from src.config import ExperimentConfig, load_config, log_level
from src.diagnostics import emit_baseline, emit_diagnostics
from src.errors import AQAError, ConfigurationError, GraphError, create_error_response
from src.harness import (
    baseline_from_config,
    build_action_space,
    build_agents,
    build_backend,
    compare as run_compare,
    evaluate,
    load_splits,
    synthetic_dataset,
    train_from_config,
    write_dataset,
)
from src.linucb import BanditModel
from src.reward_metrics import RewardConfig
from src.utils import format_table, write_json

logger = logging.getLogger(__name__)

MODEL_FILE = "model.json"
TABLE_COLUMNS = ("context", "n", "f1", "latency_s", "reward")


def config_options(command):
    """--config and --seed, shared by every subcommand."""
    command = click.option("--seed", type=int, default=None, help="Override train.seed.")(command)
    command = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False, path_type=Path),
        default=None,
        help="YAML experiment config.",
    )(command)
    return command


def reports_errors(command):
    """Turn library errors into an error document on stdout and exit 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (AQAError, OSError, ValueError) as e:
            logger.error(f"{command.__name__} failed: {e}")
            click.echo(json.dumps(create_error_response(e, click.get_current_context().info_name)))
            sys.exit(1)

    return wrapper


def _load(config_path: Optional[Path], seed: Optional[int]) -> ExperimentConfig:
    return load_config(config_path).with_seed(seed)


def _output_dir(config: ExperimentConfig, out: Optional[Path]) -> Path:
    return Path(out) if out is not None else Path(config.output.dir)


def parse_graph_spec(graph_spec: str) -> List[Tuple[str, str]]:
    """'NoR->IRCoT,IRCoT->final' into name pairs."""
    pairs = []
    for item in graph_spec.split(","):
        if not item.strip():
            continue
        parts = [p.strip() for p in item.split("->")]
        if len(parts) != 2 or not all(parts):
            raise GraphError(f"edge {item.strip()!r} is not of the form 'source->target'")
        pairs.append((parts[0], parts[1]))
    if not pairs:
        raise GraphError("--graph needs at least one edge")
    return pairs


@click.group()
@click.option("--log-level", "level", default=None, help="Logging level (defaults to AQA_LOG_LEVEL or INFO).")
def main(level: Optional[str]):
    """Adaptive question-answering orchestration with contextual bandits."""
    logging.basicConfig(
        level=(level or log_level()).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command("enumerate")
@config_options
@click.option("--max-edges", type=int, default=None, help="Override the edge bound.")
@reports_errors
def enumerate_(config_path, seed, max_edges):
    """Print the action space as JSON lines in canonical order."""
    config = _load(config_path, seed)
    agents = build_agents(config)
    if max_edges is not None:
        graphs = enumerate_action_space(agents, max_edges=max_edges, max_agents=config.action_space.max_agents)
    else:
        graphs = build_action_space(config, agents)
    for graph in graphs:
        click.echo(json.dumps(graph.to_dict()))


@main.command()
@config_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Run directory.")
@reports_errors
def train(config_path, seed, out):
    """Train LinUCB over the configured action space and write diagnostics."""
    config = _load(config_path, seed)
    output = _output_dir(config, out)
    agents = build_agents(config)
    backend = build_backend(config, agents)
    train_set, _ = load_splits(config)

    result = train_from_config(config, train_set, backend=backend)
    result.model.save(output / MODEL_FILE)
    profiles = backend.profiles if isinstance(backend, SimulatedBackend) else None
    copy_factor = config.backend.copy_factor
    written = emit_diagnostics(result, output, config.output.selection_window, profiles, copy_factor)
    write_json(output / "config.json", config.to_dict())

    click.echo(json.dumps({k: str(v) for k, v in written.items()}, sort_keys=True))


@main.command("eval")
@config_options
@click.option("--model", "model_path", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--graph", "graph_spec", default=None, help="Fixed graph, e.g. 'NoR->IRCoT,IRCoT->final'.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--time-agnostic", is_flag=True, help="Score with beta=1 and no time penalty.")
@reports_errors
def eval_(config_path, seed, model_path, graph_spec, out, time_agnostic):
    """Greedy evaluation of a trained model or a fixed graph on the test split."""
    config = _load(config_path, seed)
    output = _output_dir(config, out)
    agents = build_agents(config)
    backend = build_backend(config, agents)
    _, test_set = load_splits(config)
    reward_cfg = RewardConfig.time_agnostic() if time_agnostic else config.reward.build()

    action_space = None
    if graph_spec:
        policy = graph_from_names(agents, parse_graph_spec(graph_spec))
        verdict = validate_graph(policy.edges, len(agents))
        if not verdict.valid:
            raise GraphError(f"graph {graph_spec!r} is invalid: {', '.join(verdict.violations)}")
        name = policy.describe()
    else:
        path = model_path or output / MODEL_FILE
        if not Path(path).exists():
            raise ConfigurationError(f"model checkpoint {path} does not exist")
        policy = BanditModel.load(path)
        action_space = build_action_space(config, agents)
        if [g.action_id for g in action_space] != policy.action_ids:
            raise ConfigurationError("checkpoint actions do not match the configured action space")
        name = "aqa"

    report = evaluate(
        test_set,
        policy,
        backend,
        reward_cfg,
        action_space=action_space,
        schema=config.schema,
        seed=config.train.seed,
        repeats=config.evaluation.repeats,
        name=name,
        max_workers=config.backend.max_workers,
    )
    write_json(output / "evaluation.json", report.to_dict())
    click.echo(format_table(report.rows, TABLE_COLUMNS))


@main.command("baseline-train")
@config_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
@reports_errors
def baseline_train(config_path, seed, out):
    """Train the REINFORCE edge policy and write its pruned graph."""
    config = _load(config_path, seed)
    output = _output_dir(config, out)
    train_set, _ = load_splits(config)
    result = baseline_from_config(config, train_set)
    emit_baseline(result, output)
    click.echo(json.dumps(result.pruned.to_dict()))


@main.command()
@config_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
@reports_errors
def compare(config_path, seed, out):
    """AQA time-agnostic / time-based against the pruned baseline on the test split."""
    config = _load(config_path, seed)
    output = _output_dir(config, out)
    train_set, test_set = load_splits(config)
    document = run_compare(config, train_set, test_set, output_dir=output)
    for name, rows in document["policies"].items():
        click.echo(name)
        click.echo(format_table(rows, TABLE_COLUMNS))
        click.echo("")


@main.command("simulate-check")
@config_options
@click.option("--draws", type=int, default=10000, show_default=True)
@click.option("--tolerance", type=float, default=0.02, show_default=True)
@reports_errors
def simulate_check(config_path, seed, draws, tolerance):
    """Monte-Carlo check that the simulator reproduces its profile means."""
    from extensions.calibration_check import run_calibration_check

    config = _load(config_path, seed)
    report = run_calibration_check(config, draws=draws, tolerance=tolerance)
    click.echo(json.dumps(report.to_dict(), indent=2))
    if not report.passed:
        sys.exit(1)


@main.command("make-dataset")
@config_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@reports_errors
def make_dataset(config_path, seed, out):
    """Write balanced synthetic train.jsonl / test.jsonl splits."""
    config = _load(config_path, seed)
    s = config.train.seed
    train_path = write_dataset(out / "train.jsonl", synthetic_dataset(config.data.train_size, config.schema, s, "train"))
    test_path = write_dataset(out / "test.jsonl", synthetic_dataset(config.data.test_size, config.schema, s, "test"))
    click.echo(json.dumps({"train": str(train_path), "test": str(test_path)}))


@main.command()
@config_options
@click.option("--run-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@reports_errors
def dashboard(config_path, seed, run_dir):
    """Launch the Streamlit dashboard on a run directory."""
    config = _load(config_path, seed)
    app = Path(__file__).resolve().parent.parent / "app.py"
    target = run_dir or Path(config.output.dir)
    cmd = ["streamlit", "run", str(app), "--", "--run-dir", str(target)]
    if config_path is not None:
        cmd += ["--config", str(config_path)]
    sys.exit(subprocess.call(cmd))


if __name__ == "__main__":
    main()
