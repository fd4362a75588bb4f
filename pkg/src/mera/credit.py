"""Eligibility-weighted delayed credit over a per-task trajectory.

After a task ends (acceptance or budget exhaustion), each step's reward is
clipped and propagated backward to earlier steps with geometrically decaying
eligibility, producing bounded weighted updates for the retrieval bandit and
the optional decoding learner. No value estimator is maintained, so the
propagated error reduces to the clipped reward itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .bandit import FeatureVector, RetrievalAction


@dataclass(frozen=True)
class CreditConfig:
    discount: float = 0.9           # gamma
    trace_decay: float = 0.8        # lambda
    learning_rate: float = 0.5      # alpha
    clip_bound: float = 1.0         # delta
    max_weight: float = 0.5         # fixed helper default
    eligibility_floor: float = 1e-3
    # Reserved: a learned value estimator would turn the clipped-reward
    # propagation back into a full temporal-difference error. Not supported.
    use_value_estimator: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must be in [0, 1]")
        if not 0.0 <= self.trace_decay <= 1.0:
            raise ValueError("trace_decay must be in [0, 1]")
        for name in ("learning_rate", "clip_bound", "max_weight", "eligibility_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.use_value_estimator:
            raise NotImplementedError("no value estimator is available")


@dataclass(frozen=True)
class TraceStep:
    """One attempt's contribution to the trajectory."""

    step_index: int
    features: FeatureVector
    retrieval_action: RetrievalAction
    decoding_action: str | None
    reward: float
    attributable_retrieval: bool

    def __post_init__(self) -> None:
        if not -1.0 <= self.reward <= 1.0:
            raise ValueError("step reward must lie in [-1, 1]")


@dataclass(frozen=True)
class DispatchRecord:
    """One delivered delayed-credit update, persisted for replay and audit."""

    source: int
    target: int
    delta: float
    eligibility: float
    weight: float
    signal: float

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "delta": self.delta,
            "eligibility": self.eligibility,
            "weight": self.weight,
            "signal": self.signal,
        }


def td_delta(cfg: CreditConfig, reward: float) -> float:
    """Clipped propagation error for one target step.

    With no value estimator the temporal-difference error collapses to the
    reward clipped into [-clip_bound, clip_bound].
    """
    return max(-cfg.clip_bound, min(cfg.clip_bound, reward))


BanditSink = Callable[[RetrievalAction, FeatureVector, float, float], None]
DecodingSink = Callable[[str, float, float], None]


def dispatch_delayed_credit(
    cfg: CreditConfig,
    trajectory: list[TraceStep],
    bandit_sink: BanditSink | None = None,
    decoding_sink: DecodingSink | None = None,
) -> list[DispatchRecord]:
    """Walk the trajectory once and emit eligibility-weighted updates.

    For each target step j, all earlier eligibilities decay by
    discount * trace_decay, step j is reinforced by one, and every source
    step i <= j at or above the eligibility floor receives the signal
    ``min(max_weight, learning_rate * E_i) * delta_j``. The bandit sink fires
    only for steps whose retrieval decision was attributable; the decoding
    sink only for steps that carried a decoding action. Every emitted update
    satisfies ``|signal| <= max_weight * clip_bound``.
    """
    records: list[DispatchRecord] = []
    eligibility = [0.0] * len(trajectory)
    for j, target in enumerate(trajectory):
        delta = td_delta(cfg, target.reward)
        for i in range(j + 1):
            eligibility[i] *= cfg.discount * cfg.trace_decay
        eligibility[j] += 1.0
        for i in range(j + 1):
            if eligibility[i] < cfg.eligibility_floor:
                continue
            weight = min(cfg.max_weight, cfg.learning_rate * eligibility[i])
            signal = weight * delta
            source = trajectory[i]
            if bandit_sink is not None and source.attributable_retrieval:
                bandit_sink(source.retrieval_action, source.features, delta, weight)
            if decoding_sink is not None and source.decoding_action is not None:
                decoding_sink(source.decoding_action, delta, weight)
            records.append(
                DispatchRecord(
                    source=i,
                    target=j,
                    delta=delta,
                    eligibility=eligibility[i],
                    weight=weight,
                    signal=signal,
                )
            )
    return records


def append_dispatch_log(path: Path, records: list[DispatchRecord]) -> None:
    """Append dispatch records to a per-run JSONL trace log."""
    with path.open("a", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
