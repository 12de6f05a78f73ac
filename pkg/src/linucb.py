"""
LinUCB Module
Disjoint-arm contextual bandit: per-action ridge state, UCB scoring,
greedy selection and rank-one updates with a cached inverse.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from src.errors import (
    AQAError,
    ConfigurationError,
    DimensionMismatchError,
    NonFiniteError,
    UnknownActionError,
)

logger = logging.getLogger(__name__)

# Cached inverses are rebuilt from A after this many rank-one updates per arm.
REINVERT_EVERY = 1000
CHECKPOINT_FORMAT = "aqa-linucb/1"


@dataclass(frozen=True)
class ArmState:
    """Snapshot of one arm: A_a, b_a and the cached inverse of A_a."""

    matrix_a: np.ndarray
    vector_b: np.ndarray
    inverse_a: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return self.inverse_a @ self.vector_b


def as_context(x: Sequence[float], dimension: int) -> np.ndarray:
    """Validate and convert a context vector."""
    vec = np.asarray(x, dtype=np.float64).ravel()
    if vec.shape[0] != dimension:
        raise DimensionMismatchError(f"context has {vec.shape[0]} features, model expects {dimension}")
    if not np.all(np.isfinite(vec)):
        raise NonFiniteError("context vector contains non-finite values")
    return vec


class BanditModel:
    """
    Disjoint LinUCB over a fixed, canonically ordered set of actions.

    Arm state is stored stacked (one row per action, in canonical order) so
    every arm can be scored in a single vectorized pass. Select and update
    must be serialized by the caller.
    """

    def __init__(self, action_ids: Iterable[int], dimension: int, alpha: float):
        ordered = sorted(set(int(a) for a in action_ids))
        if not ordered:
            raise ConfigurationError("action set must not be empty")
        if int(dimension) < 1:
            raise ConfigurationError(f"context dimension must be >= 1, got {dimension}")
        if not np.isfinite(alpha) or alpha < 0:
            raise ConfigurationError(f"alpha must be a finite non-negative number, got {alpha}")

        self.action_ids: List[int] = ordered
        self.dimension = int(dimension)
        self.alpha = float(alpha)
        self._index: Dict[int, int] = {a: i for i, a in enumerate(ordered)}

        k, d = len(ordered), self.dimension
        self._a = np.tile(np.eye(d), (k, 1, 1))
        self._b = np.zeros((k, d))
        self._a_inv = np.tile(np.eye(d), (k, 1, 1))
        self._updates = np.zeros(k, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.action_ids)

    @property
    def arms(self) -> Dict[int, ArmState]:
        return {a: self.arm_state(a) for a in self.action_ids}

    def _slot(self, action: int) -> int:
        try:
            return self._index[int(action)]
        except (KeyError, TypeError, ValueError):
            raise UnknownActionError(f"action {action!r} is not in the model")

    def arm_state(self, action: int) -> ArmState:
        i = self._slot(action)
        return ArmState(self._a[i].copy(), self._b[i].copy(), self._a_inv[i].copy())

    def update_count(self, action: int) -> int:
        return int(self._updates[self._slot(action)])

    def theta(self, action: int) -> np.ndarray:
        i = self._slot(action)
        return self._a_inv[i] @ self._b[i]

    def thetas(self) -> np.ndarray:
        """theta_a for every arm, shape (n_actions, d)."""
        return np.einsum('kij,kj->ki', self._a_inv, self._b)

    def expected_rewards(self, x: Sequence[float]) -> np.ndarray:
        """theta_a^T x for every arm in canonical order."""
        vec = as_context(x, self.dimension)
        return self.thetas() @ vec

    def ucb_scores(self, x: Sequence[float], alpha: Optional[float] = None) -> np.ndarray:
        """p_a = theta_a^T x + alpha * sqrt(x^T A_a^-1 x) for every arm."""
        vec = as_context(x, self.dimension)
        alpha = self.alpha if alpha is None else float(alpha)
        estimate = self.thetas() @ vec
        if alpha == 0.0:
            return estimate
        variance = np.einsum('i,kij,j->k', vec, self._a_inv, vec)
        return estimate + alpha * np.sqrt(np.maximum(variance, 0.0))

    def ucb_score(self, action: int, x: Sequence[float]) -> float:
        i = self._slot(action)
        vec = as_context(x, self.dimension)
        a_inv = self._a_inv[i]
        theta = a_inv @ self._b[i]
        bonus = np.sqrt(max(float(vec @ a_inv @ vec), 0.0))
        return float(theta @ vec + self.alpha * bonus)

    def select_action(self, x: Sequence[float], alpha: Optional[float] = None) -> int:
        """Arg-max of the UCB scores; ties go to the lowest canonical action."""
        scores = self.ucb_scores(x, alpha)
        return self.action_ids[int(np.argmax(scores))]

    def update(self, action: int, x: Sequence[float], r: float) -> "BanditModel":
        """Rank-one update of the chosen arm; every other arm is left untouched."""
        i = self._slot(action)
        vec = as_context(x, self.dimension)
        if not np.isfinite(r):
            raise NonFiniteError(f"reward must be finite, got {r}")

        self._a[i] += np.outer(vec, vec)
        self._b[i] += r * vec
        self._updates[i] += 1

        if self._updates[i] % REINVERT_EVERY == 0:
            self._a_inv[i] = np.linalg.inv(self._a[i])
        else:
            # Sherman-Morrison: (A + x x^T)^-1 = A^-1 - (A^-1 x)(A^-1 x)^T / (1 + x^T A^-1 x)
            a_inv = self._a_inv[i]
            u = a_inv @ vec
            self._a_inv[i] = a_inv - np.outer(u, u) / (1.0 + vec @ u)
        return self

    def to_dict(self) -> Dict[str, object]:
        return {
            "format": CHECKPOINT_FORMAT,
            "dimension": self.dimension,
            "alpha": self.alpha,
            "action_ids": list(self.action_ids),
            "arms": [
                {
                    "action_id": a,
                    "matrix_a": self._a[i].ravel().tolist(),
                    "vector_b": self._b[i].tolist(),
                    "updates": int(self._updates[i]),
                }
                for i, a in enumerate(self.action_ids)
            ],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, object]) -> "BanditModel":
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ConfigurationError(f"unsupported checkpoint format {payload.get('format')!r}")
        model = cls(payload["action_ids"], payload["dimension"], payload["alpha"])
        d = model.dimension
        for arm in payload["arms"]:
            i = model._slot(arm["action_id"])
            model._a[i] = np.asarray(arm["matrix_a"], dtype=np.float64).reshape(d, d)
            model._b[i] = np.asarray(arm["vector_b"], dtype=np.float64)
            model._a_inv[i] = np.linalg.inv(model._a[i])
            model._updates[i] = int(arm.get("updates", 0))
        return model

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f)
        logger.info(f"Saved LinUCB checkpoint with {len(self)} arms to {path}")
        return path

    @classmethod
    def load(cls, path: Path) -> "BanditModel":
        try:
            with open(path, 'r') as f:
                payload = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"checkpoint {path} is not valid JSON: {e.msg}")
        if not isinstance(payload, dict):
            raise ConfigurationError(f"checkpoint {path} must hold a JSON object")
        try:
            model = cls.from_dict(payload)
        except AQAError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"checkpoint {path} is malformed: {e}")
        logger.info(f"Loaded LinUCB checkpoint from {path}")
        return model


def init_model(action_ids: Iterable[int], d: int, alpha: float) -> BanditModel:
    """A_a = I_d and b_a = 0 for every action."""
    return BanditModel(action_ids, d, alpha)
