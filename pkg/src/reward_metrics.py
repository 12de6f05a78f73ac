"""
Reward and Metrics Module
Token-level F1, latency penalties and the performance/time reward combination.
"""

import re
import math
import logging
from dataclasses import dataclass, field
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple, Union

from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

# (lower_bound_s, upper_bound_s, divisor): the band applies when lower < s <= upper
PenaltyBand = Tuple[float, float, float]

PENALTY_PRESETS: Dict[str, Tuple[PenaltyBand, ...]] = {
    "none": (),
    "individual": ((1.0, math.inf, 1000.0),),
    "collaborative": ((1.0, 10.0, 10000.0), (10.0, math.inf, 50.0)),
}

_TOKEN_SPLIT = re.compile(r'[^0-9a-z]+')
_ARTICLES = {"a", "an", "the"}


def validate_schedule(bands: Sequence[PenaltyBand]) -> Tuple[PenaltyBand, ...]:
    """Check that bands are well-formed and non-overlapping."""
    ordered = sorted((float(lo), float(hi), float(div)) for lo, hi, div in bands)
    for lo, hi, div in ordered:
        if div <= 0:
            raise ConfigurationError(f"penalty divisor must be > 0, got {div}")
        if hi <= lo:
            raise ConfigurationError(f"penalty band ({lo}, {hi}] is empty")
    for (_, prev_hi, _), (lo, _, _) in zip(ordered, ordered[1:]):
        if lo < prev_hi:
            raise ConfigurationError(f"penalty bands overlap at {lo}")
    return tuple(ordered)


def resolve_schedule(mode: Union[str, Sequence[PenaltyBand]]) -> Tuple[PenaltyBand, ...]:
    if isinstance(mode, str):
        if mode not in PENALTY_PRESETS:
            raise ConfigurationError(
                f"unknown penalty preset '{mode}', expected one of {sorted(PENALTY_PRESETS)}"
            )
        return PENALTY_PRESETS[mode]
    return validate_schedule(mode)


@dataclass(frozen=True)
class RewardConfig:
    """Weighting between answer quality and latency cost.

    The time weight is fixed to (1 - beta).
    """

    beta: float = 0.5
    penalty_preset: str = "collaborative"
    penalty_schedule: Tuple[PenaltyBand, ...] = field(default=())

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1], got {self.beta}")
        schedule = self.penalty_schedule or resolve_schedule(self.penalty_preset)
        object.__setattr__(self, "penalty_schedule", validate_schedule(schedule))

    @classmethod
    def time_agnostic(cls) -> "RewardConfig":
        return cls(beta=1.0, penalty_preset="none")

    @property
    def gamma(self) -> float:
        return 1.0 - self.beta

    def to_dict(self) -> Dict[str, object]:
        return {
            "beta": self.beta,
            "penalty_preset": self.penalty_preset,
            "penalty_schedule": [list(band) for band in self.penalty_schedule],
        }


def normalize_tokens(text: str, remove_articles: bool = False) -> List[str]:
    """Lowercase and split on non-alphanumeric runs."""
    tokens = [t for t in _TOKEN_SPLIT.split(text.lower()) if t]
    if remove_articles:
        tokens = [t for t in tokens if t not in _ARTICLES]
    return tokens


def token_f1(prediction: str, gold: str, remove_articles: bool = False) -> float:
    """
    Token-overlap F1 between a prediction and a gold answer.

    Both empty scores 1.0; exactly one empty scores 0.0.
    """
    pred_tokens = normalize_tokens(prediction, remove_articles)
    gold_tokens = normalize_tokens(gold, remove_articles)
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def best_f1(prediction: str, golds: Sequence[str]) -> float:
    """Maximum F1 over all gold aliases."""
    return max(token_f1(prediction, g) for g in golds)


def time_penalty(s: float, mode: Union[str, Sequence[PenaltyBand]] = "collaborative") -> float:
    """Multiplicative latency penalty T = s / divisor for the band containing s."""
    if s < 0 or math.isnan(s):
        raise ConfigurationError(f"execution time must be >= 0, got {s}")
    for lo, hi, divisor in resolve_schedule(mode):
        if lo < s <= hi:
            return s / divisor
    return 0.0


def reward(p: float, s: float, cfg: RewardConfig, mode: Optional[Union[str, Sequence[PenaltyBand]]] = None) -> float:
    """r = beta * p - (1 - beta) * T(s)."""
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"performance must lie in [0, 1], got {p}")
    schedule = cfg.penalty_schedule if mode is None else resolve_schedule(mode)
    return cfg.beta * p - (1.0 - cfg.beta) * time_penalty(s, schedule)
