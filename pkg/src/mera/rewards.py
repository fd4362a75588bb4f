"""Bounded shaped reward over validation outcomes, and its [0,1] remapping."""

from __future__ import annotations

from dataclasses import dataclass


class OutOfRange(ValueError):
    """Reward handed to pseudo_success was outside [-1, 1]."""


@dataclass(frozen=True)
class RewardConfig:
    """Coefficients of the shaped reward.

    The clip bound is fixed at [-1, 1]; everything else is configurable.
    Defaults keep terminal success dominant: partial progress over six checks
    stays below a success, and the penalty terms cannot drag an accepted
    attempt negative within a three-attempt budget.
    """

    success_bonus: float = 1.0
    progress_weight: float = 0.1
    attempt_penalty: float = 0.05
    extraction_penalty: float = 0.3
    behavior_penalty: float = 0.2
    latency_weight: float = 0.1
    latency_horizon: float = 120.0

    def __post_init__(self) -> None:
        for name in (
            "success_bonus",
            "progress_weight",
            "attempt_penalty",
            "extraction_penalty",
            "behavior_penalty",
            "latency_weight",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.latency_horizon <= 0:
            raise ValueError("latency_horizon must be positive")


def shaped_reward(
    cfg: RewardConfig,
    accepted: int,
    passed_count: int,
    attempt_index: int,
    extraction_failed: int,
    behavior_failed: int,
    duration: float,
) -> float:
    """Shaped reward in [-1, 1] for one attempt.

    Terminal acceptance earns the success bonus; otherwise partial credit is
    given per passed check. Later attempts, extraction failures, behavioral
    failures, and latency are penalized. The clip is applied exactly once, at
    the end.
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if attempt_index < 0:
        raise ValueError("attempt_index must be nonnegative")
    raw = (
        cfg.success_bonus * accepted
        + (1 - accepted) * cfg.progress_weight * passed_count
        - cfg.attempt_penalty * attempt_index
        - cfg.extraction_penalty * extraction_failed
        - cfg.behavior_penalty * behavior_failed
        - cfg.latency_weight * min(1.0, duration / cfg.latency_horizon)
    )
    return max(-1.0, min(1.0, raw))


def pseudo_success(reward: float) -> float:
    """Affine map of a clipped reward onto [0, 1] for Beta-style learners."""
    if not -1.0 <= reward <= 1.0:
        raise OutOfRange(f"reward {reward} outside [-1, 1]; missing clip upstream")
    return (reward + 1.0) / 2.0
