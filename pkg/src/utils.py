"""
Utility functions for the adaptive QA orchestration harness.
Helpers for reproducible random streams, JSON files and CLI tables.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# Phases used as the first spawn-key element so training, evaluation and the
# baseline never share random streams.
PHASE_TRAIN = 0
PHASE_EVAL = 1
PHASE_BASELINE = 2
PHASE_SHUFFLE = 3
PHASE_CALIBRATION = 4


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """Deterministic SeedSequence for a (seed, key...) coordinate."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def child_sequence(parent: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    """Extend a SeedSequence coordinate with extra key elements."""
    return np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=tuple(parent.spawn_key) + tuple(int(k) for k in key),
    )


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *key))


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    """Write a JSON document with stable key order."""
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    logger.info(f"Wrote {path}")
    return path


def read_json(path: Path) -> Any:
    with open(path, 'r') as f:
        return json.load(f)


def modal_value(values: Sequence[Any]) -> Tuple[Any, float]:
    """Most frequent value and its frequency; ties go to the smallest value."""
    if not values:
        raise ValueError("modal_value of an empty sequence")
    counts: Dict[Any, int] = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    best = min(counts, key=lambda v: (-counts[v], v))
    return best, counts[best] / len(values)


def format_table(rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    """Plain-text table for CLI output."""
    frame = pd.DataFrame(list(rows), columns=list(columns))
    return frame.to_string(index=False, float_format="{:.3f}".format, na_rep="")
