"""
Agents Module
Answering agents behind a common backend interface: a statistical simulator
calibrated to per-context F1/latency measurements, and a remote adapter that
talks JSON over HTTP to real answering services.
"""

import math
import time
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import requests

from src.action_space import AgentId
from src.errors import AgentError, AgentProtocolError, AgentTimeoutError, ConfigurationError
from src.reward_metrics import normalize_tokens
from src.utils import read_json, write_json

logger = logging.getLogger(__name__)

DEFAULT_LATENCY_CV = 0.1
DEFAULT_COPY_FACTOR = 0.9

# Training-set measurements per (agent, context): (F1, mean seconds).
MEASURED_PROFILES: Dict[str, Dict[str, Tuple[float, float]]] = {
    "NoR": {"A": (0.914, 0.66), "B": (0.061, 0.66), "C": (0.066, 0.67)},
    "OneR": {"A": (0.677, 6.46), "B": (0.518, 7.34), "C": (0.146, 6.41)},
    "IRCoT": {"A": (0.730, 189.78), "B": (0.580, 192.30), "C": (0.458, 184.85)},
}


@dataclass(frozen=True)
class ContextProfile:
    f1_mean: float
    latency_mean_s: float
    f1_dispersion: float = 0.0
    latency_dispersion: float = DEFAULT_LATENCY_CV

    def __post_init__(self):
        if not 0.0 <= self.f1_mean <= 1.0:
            raise ConfigurationError(f"f1_mean must lie in [0, 1], got {self.f1_mean}")
        if self.latency_mean_s <= 0:
            raise ConfigurationError(f"latency_mean_s must be > 0, got {self.latency_mean_s}")
        if self.f1_dispersion < 0 or self.latency_dispersion < 0:
            raise ConfigurationError("dispersions must be >= 0")


@dataclass(frozen=True)
class AgentProfile:
    """Simulated agent: F1 and latency distributions per context label."""

    agent: AgentId
    per_context: Mapping[str, ContextProfile]

    def cell(self, context_label: str) -> ContextProfile:
        try:
            return self.per_context[context_label]
        except KeyError:
            raise ConfigurationError(
                f"agent {self.agent.name} has no profile for context {context_label!r}"
            )

    def covers(self, schema: Sequence[str]) -> bool:
        return all(label in self.per_context for label in schema)


@dataclass(frozen=True)
class AgentResponse:
    """One agent's answer. `confidence` is the simulator's success probability."""

    text: str
    latency_s: float
    upstream_inputs: Tuple[Tuple[AgentId, str], ...] = ()
    failed: bool = False
    error: Optional[str] = None
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.latency_s < 0:
            raise ValueError(f"latency must be >= 0, got {self.latency_s}")


def default_profiles(
    agents: Sequence[AgentId],
    latency_cv: float = DEFAULT_LATENCY_CV,
) -> Dict[int, AgentProfile]:
    """Profiles for NoR / OneR / IRCoT from the training-set measurements."""
    profiles = {}
    for agent in agents:
        if agent.name not in MEASURED_PROFILES:
            raise ConfigurationError(f"no default profile for agent {agent.name!r}")
        cells = {
            label: ContextProfile(f1, latency, latency_dispersion=latency_cv)
            for label, (f1, latency) in MEASURED_PROFILES[agent.name].items()
        }
        profiles[agent.index] = AgentProfile(agent, cells)
    return profiles


def uniform_profiles(
    agents: Sequence[AgentId],
    schema: Sequence[str],
    f1_mean: float,
    latency_mean_s: float = 1.0,
    latency_cv: float = DEFAULT_LATENCY_CV,
) -> Dict[int, AgentProfile]:
    """Every agent identical in every context (useful for degenerate checks)."""
    cell = ContextProfile(f1_mean, latency_mean_s, latency_dispersion=latency_cv)
    return {a.index: AgentProfile(a, {label: cell for label in schema}) for a in agents}


def load_profiles(path: Path, agents: Sequence[AgentId]) -> Dict[int, AgentProfile]:
    """Profile file: JSON map agent -> context -> {f1_mean, latency_mean_s, ...}."""
    payload = read_json(path)
    profiles = {}
    for agent in agents:
        if agent.name not in payload:
            raise ConfigurationError(f"profile file {path} has no entry for agent {agent.name!r}")
        cells = {}
        for label, values in payload[agent.name].items():
            try:
                cells[label] = ContextProfile(
                    f1_mean=float(values["f1_mean"]),
                    latency_mean_s=float(values["latency_mean_s"]),
                    f1_dispersion=float(values.get("f1_dispersion", 0.0)),
                    latency_dispersion=float(values.get("latency_dispersion", DEFAULT_LATENCY_CV)),
                )
            except KeyError as e:
                raise ConfigurationError(f"profile {agent.name}/{label} is missing {e.args[0]!r}")
        profiles[agent.index] = AgentProfile(agent, cells)
    logger.info(f"Loaded {len(profiles)} agent profiles from {path}")
    return profiles


def save_profiles(path: Path, profiles: Mapping[int, AgentProfile]) -> Path:
    payload = {
        p.agent.name: {
            label: {
                "f1_mean": c.f1_mean,
                "latency_mean_s": c.latency_mean_s,
                "f1_dispersion": c.f1_dispersion,
                "latency_dispersion": c.latency_dispersion,
            }
            for label, c in p.per_context.items()
        }
        for p in profiles.values()
    }
    return write_json(path, payload)


def distractor_for(agent: AgentId, gold: str) -> str:
    """A wrong answer specific to the agent whose tokens never occur in the gold."""
    gold_tokens = set(normalize_tokens(gold))
    token = f"distractor{agent.index}"
    while token in gold_tokens:
        token += "x"
    return token


def sample_latency(cell: ContextProfile, rng: np.random.Generator) -> float:
    """Log-normal latency with the cell's mean and coefficient of variation."""
    if cell.latency_dispersion == 0:
        return cell.latency_mean_s
    sigma2 = math.log1p(cell.latency_dispersion ** 2)
    mu = math.log(cell.latency_mean_s) - sigma2 / 2
    return max(float(rng.lognormal(mu, math.sqrt(sigma2))), 1e-9)


def effective_success(own_p: float, upstream: Sequence[AgentResponse], copy_factor: float) -> float:
    """max(own p, copy_factor * best upstream success probability)."""
    best = max((r.confidence or 0.0 for r in upstream if not r.failed), default=0.0)
    return max(own_p, copy_factor * best)


def simulate_answer(
    profile: AgentProfile,
    context_label: str,
    gold: str,
    rng: np.random.Generator,
    upstream: Sequence[Tuple[AgentResponse, AgentId]] = (),
    copy_factor: float = DEFAULT_COPY_FACTOR,
) -> AgentResponse:
    """
    Gold with probability p, the agent's distractor otherwise; E[F1] = p.

    Draw order per call: optional success-probability jitter, the
    correctness uniform, then the latency.
    """
    cell = profile.cell(context_label)
    p = cell.f1_mean
    if cell.f1_dispersion > 0:
        p = float(np.clip(rng.normal(p, cell.f1_dispersion), 0.0, 1.0))
    responses = [r for r, _ in upstream]
    p = effective_success(p, responses, copy_factor)

    correct = rng.random() < p
    latency = sample_latency(cell, rng)
    text = gold if correct else distractor_for(profile.agent, gold)
    return AgentResponse(
        text=text,
        latency_s=latency,
        upstream_inputs=tuple((agent, r.text) for r, agent in upstream),
        confidence=p,
    )


class AgentBackend:
    """Interface the executor drives; one call per executed agent node."""

    concurrent = False

    def answer(
        self,
        agent: AgentId,
        question: str,
        upstream: Sequence[Tuple[AgentResponse, AgentId]],
        *,
        context_label: str,
        gold: Optional[str] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> AgentResponse:
        raise NotImplementedError


class SimulatedBackend(AgentBackend):
    """Calibrated statistical stand-in for real answering agents."""

    def __init__(self, profiles: Mapping[int, AgentProfile], copy_factor: float = DEFAULT_COPY_FACTOR):
        if not 0.0 <= copy_factor <= 1.0:
            raise ConfigurationError(f"copy_factor must lie in [0, 1], got {copy_factor}")
        self.profiles = dict(profiles)
        self.copy_factor = copy_factor
        self._lock = threading.Lock()

    def profile(self, agent: AgentId) -> AgentProfile:
        try:
            return self.profiles[agent.index]
        except KeyError:
            raise ConfigurationError(f"simulator has no profile for agent {agent.name!r}")

    def answer(self, agent, question, upstream, *, context_label, gold=None, rng=None):
        if gold is None:
            raise ConfigurationError("the simulator needs the gold answer")
        if rng is None:
            raise ConfigurationError("the simulator needs a random generator")
        with self._lock:
            return simulate_answer(self.profile(agent), context_label, gold, rng, upstream, self.copy_factor)


def remote_answer(
    endpoint: str,
    question: str,
    upstream: Sequence[Tuple[AgentId, str]],
    timeout_s: float,
    session: Optional[requests.Session] = None,
) -> AgentResponse:
    """
    POST {"question", "upstream"} to an answering service and time the call.

    Raises AgentTimeoutError (also for unreachable endpoints) or
    AgentProtocolError; both carry the elapsed seconds.
    """
    if not endpoint:
        raise ConfigurationError("remote endpoint is not configured")
    if timeout_s <= 0:
        raise ConfigurationError(f"timeout_s must be > 0, got {timeout_s}")

    payload = {
        "question": question,
        "upstream": [{"agent": agent.name, "text": text} for agent, text in upstream],
    }
    http = session or requests
    start = time.perf_counter()
    try:
        response = http.post(endpoint, json=payload, timeout=timeout_s)
        response.raise_for_status()
        body = response.json()
    except (requests.Timeout, requests.ConnectionError) as e:
        elapsed = time.perf_counter() - start
        raise AgentTimeoutError(f"no answer from {endpoint} after {elapsed:.2f}s: {e}", elapsed)
    except (requests.RequestException, ValueError) as e:
        elapsed = time.perf_counter() - start
        raise AgentProtocolError(f"bad response from {endpoint}: {e}", elapsed)
    elapsed = time.perf_counter() - start

    if not isinstance(body, dict) or not isinstance(body.get("answer"), str):
        raise AgentProtocolError(f"response from {endpoint} has no string 'answer' field", elapsed)
    return AgentResponse(text=body["answer"], latency_s=elapsed, upstream_inputs=tuple(upstream))


class RemoteBackend(AgentBackend):
    """HTTP adapter; one endpoint per agent name."""

    concurrent = True

    def __init__(self, endpoints: Mapping[str, str], timeout_s: float = 30.0):
        self.endpoints = dict(endpoints)
        self.timeout_s = float(timeout_s)
        self._local = threading.local()

    @property
    def session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def answer(self, agent, question, upstream, *, context_label, gold=None, rng=None):
        endpoint = self.endpoints.get(agent.name)
        if not endpoint:
            raise ConfigurationError(f"no endpoint configured for agent {agent.name!r}")
        inputs = [(a, r.text) for r, a in upstream]
        return remote_answer(endpoint, question, inputs, self.timeout_s, session=self.session)


def failed_response(error: AgentError, upstream: Sequence[Tuple[AgentResponse, AgentId]]) -> AgentResponse:
    return AgentResponse(
        text="",
        latency_s=max(error.elapsed_s, 0.0),
        upstream_inputs=tuple((agent, r.text) for r, agent in upstream),
        failed=True,
        error=str(error),
    )
