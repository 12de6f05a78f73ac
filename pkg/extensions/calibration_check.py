"""
Calibration Check Extension
Monte-Carlo check that the simulator reproduces each (agent, context) profile:
mean F1 within a tolerance of f1_mean and mean latency near latency_mean_s.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np

from src.action_space import AgentId
from src.agents import AgentProfile, simulate_answer
from src.config import ExperimentConfig
from src.errors import ConfigurationError
from src.harness import build_agents, build_backend
from src.reward_metrics import token_f1
from src.utils import PHASE_CALIBRATION, make_rng

logger = logging.getLogger(__name__)

CALIBRATION_GOLD = "calibration gold answer"
LATENCY_RELATIVE_TOLERANCE = 0.05


@dataclass(frozen=True)
class CellCheck:
    agent: str
    context: str
    target_f1: float
    mean_f1: float
    target_latency_s: float
    mean_latency_s: float
    passed: bool


@dataclass
class CalibrationReport:
    draws: int
    tolerance: float
    cells: List[CellCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "draws": self.draws,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "cells": [c.__dict__ for c in self.cells],
        }


def check_cell(
    profile: AgentProfile,
    context_label: str,
    rng: np.random.Generator,
    draws: int = 10000,
    tolerance: float = 0.02,
) -> CellCheck:
    cell = profile.cell(context_label)
    f1s = np.empty(draws)
    latencies = np.empty(draws)
    for i in range(draws):
        response = simulate_answer(profile, context_label, CALIBRATION_GOLD, rng)
        f1s[i] = token_f1(response.text, CALIBRATION_GOLD)
        latencies[i] = response.latency_s

    mean_f1 = float(f1s.mean())
    mean_latency = float(latencies.mean())
    latency_ok = bool(np.all(np.isfinite(latencies)) and np.all(latencies > 0)) and math.isclose(
        mean_latency, cell.latency_mean_s, rel_tol=LATENCY_RELATIVE_TOLERANCE
    )
    return CellCheck(
        agent=profile.agent.name,
        context=context_label,
        target_f1=cell.f1_mean,
        mean_f1=mean_f1,
        target_latency_s=cell.latency_mean_s,
        mean_latency_s=mean_latency,
        passed=abs(mean_f1 - cell.f1_mean) <= tolerance and latency_ok,
    )


def simulate_check(
    profiles: Mapping[int, AgentProfile],
    schema: Sequence[str],
    seed: int = 0,
    draws: int = 10000,
    tolerance: float = 0.02,
) -> CalibrationReport:
    """Every profile cell in schema order, each on its own random stream."""
    if draws < 1:
        raise ConfigurationError(f"draws must be >= 1, got {draws}")
    report = CalibrationReport(draws=draws, tolerance=tolerance)
    for index, profile in sorted(profiles.items()):
        for position, label in enumerate(schema):
            rng = make_rng(seed, PHASE_CALIBRATION, index, position)
            check = check_cell(profile, label, rng, draws, tolerance)
            if not check.passed:
                logger.warning(
                    f"Calibration off for {check.agent}/{label}: F1 {check.mean_f1:.4f} vs {check.target_f1:.4f}, "
                    f"latency {check.mean_latency_s:.2f}s vs {check.target_latency_s:.2f}s"
                )
            report.cells.append(check)
    logger.info(f"Calibration check over {len(report.cells)} cells: {'passed' if report.passed else 'FAILED'}")
    return report


def run_calibration_check(config: ExperimentConfig, draws: int = 10000, tolerance: float = 0.02) -> CalibrationReport:
    agents: List[AgentId] = build_agents(config)
    if config.backend.kind != "simulator":
        raise ConfigurationError("simulate-check needs the simulator backend")
    backend = build_backend(config, agents)
    return simulate_check(backend.profiles, config.schema, config.train.seed, draws, tolerance)
